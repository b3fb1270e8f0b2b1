//! Streaming PCA: Oja's multiplicative update and Krasulina's
//! orthogonal-increment update, both scored by the sin^2 loss
//!
//! ```text
//! L_t <= (1 - 2 rho eta) L_{t-1} + 2 rho eta L_{t-1}^2 + Q_t + c eta^2
//! ```
//!
//! with `c = 4B^4` (Krasulina) or `5B^4 + 2 eta B^6` (Oja) and
//! `Q_t = -2 eta <v, v*> <z - E z, v*> / |v|^2`, where
//! `z = y (X - y v/|v|^2)`, `y = X^T v`, `E z = S v - (v^T S v) v/|v|^2`.

use serde::{Deserialize, Serialize};

use super::{collect_trace, Step, Stepper};
use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::recursion::{MagnitudeTerm, MeanTerm, RecursionParams};
use crate::schedule::StepSchedule;
use crate::streams::PcaStream;
use crate::trace::Trace;

/// `1 - <u, v>^2 / (|u|^2 |v|^2)`.
pub fn sin2(u: &[f64], v: &[f64]) -> Result<f64> {
    let (nu, nv) = (linalg::norm2(u), linalg::norm2(v));
    if !(nu > 0.0) || !(nv > 0.0) {
        return Err(Error::domain("sin^2 is undefined for a zero vector"));
    }
    let c = dot(u, v);
    Ok((1.0 - c * c / (nu * nv)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProblem {
    pub stream: PcaStream,
    covariance: Vec<Vec<f64>>,
    v_star: Vec<f64>,
}

impl PcaProblem {
    pub fn new(stream: PcaStream) -> Result<Self> {
        if stream.dim() < 2 {
            return Err(Error::domain("PCA needs at least two dimensions"));
        }
        Ok(PcaProblem {
            covariance: stream.covariance(),
            v_star: stream.v_star(),
            stream,
        })
    }

    pub fn dim(&self) -> usize {
        self.stream.dim()
    }

    pub fn b(&self) -> f64 {
        self.stream.b()
    }

    pub fn rho(&self) -> f64 {
        self.stream.rho()
    }

    pub fn lambda1(&self) -> f64 {
        self.stream.eigs()[0]
    }

    pub fn lambda2(&self) -> f64 {
        self.stream.eigs()[1]
    }

    pub fn v_star(&self) -> &[f64] {
        &self.v_star
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    /// Recursion constants for `method`; the `2 rho eta L^2` drift is a
    /// magnitude term `(2 rho, 1/2, 2)` and, for Oja, `2 B^6 eta^3` is
    /// `(2 B^6, 5/2, 0)`.
    pub fn params(&self, method: PcaMethod) -> RecursionParams {
        let (b, rho) = (self.b(), self.rho());
        let b4 = b.powi(4);
        let mut terms_mag = vec![MagnitudeTerm {
            coef: 2.0 * rho,
            eta_exp: 0.5,
            loss_exp: 2.0,
        }];
        let c2 = match method {
            PcaMethod::Krasulina => 4.0 * b4,
            PcaMethod::Oja { .. } => {
                terms_mag.push(MagnitudeTerm {
                    coef: 2.0 * b.powi(6),
                    eta_exp: 2.5,
                    loss_exp: 0.0,
                });
                5.0 * b4
            }
        };
        RecursionParams {
            c1: 2.0 * rho,
            c2,
            c3: 8.0 * b * b,
            terms_mean: vec![MeanTerm {
                coef: 2.0 * rho,
                eta_exp: 0.0,
                loss_exp: 2.0,
            }],
            terms_mag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PcaMethod {
    Oja {
        #[serde(default = "yes")]
        normalize_each_step: bool,
    },
    Krasulina,
}

fn yes() -> bool {
    true
}

pub struct PcaStepper {
    problem: PcaProblem,
    schedule: StepSchedule,
    method: PcaMethod,
    v: Vec<f64>,
    t: u64,
    seed: u64,
    /// `<z_t, v_{t-1}>` and `|v_t|^2 / |v_{t-1}|^2` of the last step.
    last_diag: (f64, f64, f64),
}

impl PcaStepper {
    pub fn new(
        problem: PcaProblem,
        schedule: StepSchedule,
        method: PcaMethod,
        v0: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if v0.len() != problem.dim() {
            return Err(Error::domain(format!(
                "v0 has {} entries, dim is {}",
                v0.len(),
                problem.dim()
            )));
        }
        let n = linalg::norm(&v0);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!(
                "v0 must be a unit vector, has norm {n}"
            )));
        }
        Ok(PcaStepper {
            problem,
            schedule,
            method,
            v: v0,
            t: 0,
            seed,
            last_diag: (0.0, 0.0, 1.0),
        })
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// `(<z_t, v_{t-1}>, |z_t| |v_{t-1}|, |v_t|^2/|v_{t-1}|^2)` for the last
    /// Krasulina step.
    pub fn last_diagnostics(&self) -> (f64, f64, f64) {
        self.last_diag
    }

    fn loss(&self) -> Result<f64> {
        sin2(&self.v, self.problem.v_star())
    }
}

impl Stepper for PcaStepper {
    fn name(&self) -> &'static str {
        match self.method {
            PcaMethod::Oja { .. } => "oja",
            PcaMethod::Krasulina => "krasulina",
        }
    }

    fn initial_loss(&self) -> f64 {
        self.loss().unwrap_or(1.0)
    }

    fn next_step(&mut self) -> Result<Step> {
        self.t += 1;
        let eta = self.schedule.eta(self.t);
        let x = self.problem.stream.sample(self.t, self.seed);
        let v = &self.v;
        let vn2 = linalg::norm2(v);
        if !(vn2 > 0.0) || !vn2.is_finite() {
            return Err(Error::Numeric(format!(
                "iterate degenerated at t = {}",
                self.t
            )));
        }
        let l_prev = sin2(v, self.problem.v_star())?;
        let y = dot(&x, v);

        // z = y (X - y v/|v|^2) and its conditional mean
        let mut z: Vec<f64> = x.iter().map(|xi| y * xi).collect();
        linalg::axpy(-y * y / vn2, v, &mut z);
        let sv = linalg::matvec(self.problem.covariance(), v);
        let vsv = dot(v, &sv);
        let mut ez = sv;
        linalg::axpy(-vsv / vn2, v, &mut ez);
        let vv = dot(v, self.problem.v_star());
        let q =
            -2.0 * eta * vv * (dot(&z, self.problem.v_star()) - dot(&ez, self.problem.v_star()))
                / vn2;

        let b = self.problem.b();
        let rho = self.problem.rho();
        let c = match self.method {
            PcaMethod::Krasulina => 4.0 * b.powi(4),
            PcaMethod::Oja { .. } => 5.0 * b.powi(4) + 2.0 * eta * b.powi(6),
        };
        let u = 2.0 * rho * eta * l_prev * l_prev + q + c * eta * eta;

        let mut next = self.v.clone();
        match self.method {
            PcaMethod::Krasulina => {
                linalg::axpy(eta, &z, &mut next);
                self.last_diag = (
                    dot(&z, &self.v),
                    linalg::norm(&z) * vn2.sqrt(),
                    linalg::norm2(&next) / vn2,
                );
            }
            PcaMethod::Oja {
                normalize_each_step,
            } => {
                linalg::axpy(eta * y, &x, &mut next);
                if normalize_each_step {
                    let n = linalg::norm(&next);
                    if !(n > 0.0) {
                        return Err(Error::Numeric(format!(
                            "iterate vanished at t = {}",
                            self.t
                        )));
                    }
                    linalg::scale(1.0 / n, &mut next);
                }
            }
        }
        self.v = next;
        Ok(Step {
            t: self.t,
            loss: self.loss()?,
            eta,
            noise: Some(u),
            aux: [q, 0.0],
        })
    }

    fn aux_names(&self) -> &'static [&'static str] {
        &["q"]
    }

    fn recursion_params(&self) -> Option<RecursionParams> {
        Some(self.problem.params(self.method))
    }
}

pub fn oja_stream(
    problem: &PcaProblem,
    schedule: &StepSchedule,
    v0: &[f64],
    horizon: usize,
    seed: u64,
    normalize_each_step: bool,
) -> Result<Trace> {
    schedule.validate(horizon as u64)?;
    let mut s = PcaStepper::new(
        problem.clone(),
        schedule.clone(),
        PcaMethod::Oja {
            normalize_each_step,
        },
        v0.to_vec(),
        seed,
    )?;
    collect_trace(&mut s, horizon, seed)
}

pub fn krasulina_stream(
    problem: &PcaProblem,
    schedule: &StepSchedule,
    v0: &[f64],
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    schedule.validate(horizon as u64)?;
    let mut s = PcaStepper::new(
        problem.clone(),
        schedule.clone(),
        PcaMethod::Krasulina,
        v0.to_vec(),
        seed,
    )?;
    collect_trace(&mut s, horizon, seed)
}

/// Unit vector at sin^2 distance `s2` from `e_1`, tilted towards `e_2`.
pub fn warm_start(dim: usize, s2: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = (1.0 - s2).sqrt();
    v[1] = s2.sqrt();
    v
}
