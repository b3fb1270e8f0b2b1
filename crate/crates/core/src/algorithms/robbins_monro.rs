//! Robbins-Monro root finding `X_t = X_{t-1} - eta_t Y(X_{t-1})` with loss
//! `|X_t - theta|^2`:
//!
//! ```text
//! L_t <= (1 - 2 R eta) L_{t-1} + Q_t + eta^2 Y^2,   Q_t = -2 eta (X_{t-1} - theta) xi_t
//! ```
//!
//! and `eta^2 Y^2 <= 2 eta^2 (P(sqrt L)^2 + R1^2)`.

use super::{collect_trace, Step, Stepper};
use crate::error::Result;
use crate::recursion::{MagnitudeTerm, RecursionParams};
use crate::schedule::StepSchedule;
use crate::streams::RmOracle;
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmProblem {
    pub oracle: RmOracle,
}

impl RmProblem {
    pub fn new(oracle: RmOracle) -> Self {
        RmProblem { oracle }
    }

    pub fn theta(&self) -> f64 {
        self.oracle.theta
    }

    pub fn r_lower(&self) -> f64 {
        self.oracle.r_lower()
    }

    pub fn r1(&self) -> f64 {
        self.oracle.r1
    }

    /// Coefficients of `P(s)^2`.
    pub fn poly_bound_squared(&self) -> Vec<f64> {
        let p = self.oracle.poly_bound();
        let mut sq = vec![0.0; 2 * p.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in p.iter().enumerate() {
                sq[i + j] += a * b;
            }
        }
        sq
    }

    /// `C1 = 2R`, `C3 = 2 R1`, `C2 = 2 R1^2 + 2 r_0`, and a magnitude term
    /// `(2 r_n, 3/2, n/2)` for each coefficient `r_n`, `n >= 1`, of `P^2`.
    pub fn params(&self) -> RecursionParams {
        let sq = self.poly_bound_squared();
        let r1 = self.r1();
        let terms_mag = sq
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &c)| c > 0.0)
            .map(|(n, &c)| MagnitudeTerm {
                coef: 2.0 * c,
                eta_exp: 1.5,
                loss_exp: n as f64 / 2.0,
            })
            .collect();
        RecursionParams {
            c1: 2.0 * self.r_lower(),
            c2: 2.0 * r1 * r1 + 2.0 * sq[0],
            c3: 2.0 * r1,
            terms_mean: vec![],
            terms_mag,
        }
    }
}

pub struct RmStepper {
    problem: RmProblem,
    schedule: StepSchedule,
    x: f64,
    t: u64,
    seed: u64,
}

impl RmStepper {
    pub fn new(problem: RmProblem, schedule: StepSchedule, x0: f64, seed: u64) -> Self {
        RmStepper {
            problem,
            schedule,
            x: x0,
            t: 0,
            seed,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }
}

impl Stepper for RmStepper {
    fn name(&self) -> &'static str {
        "robbins_monro"
    }

    fn initial_loss(&self) -> f64 {
        let u = self.x - self.problem.theta();
        u * u
    }

    fn next_step(&mut self) -> Result<Step> {
        self.t += 1;
        let eta = self.schedule.eta(self.t);
        let (y, xi) = self.problem.oracle.sample(self.x, self.t, self.seed);
        let u_prev = self.x - self.problem.theta();
        let q = -2.0 * eta * u_prev * xi;
        self.x -= eta * y;
        let u = self.x - self.problem.theta();
        Ok(Step {
            t: self.t,
            loss: u * u,
            eta,
            noise: Some(q + eta * eta * y * y),
            aux: [q, 0.0],
        })
    }

    fn aux_names(&self) -> &'static [&'static str] {
        &["q"]
    }

    fn recursion_params(&self) -> Option<RecursionParams> {
        Some(self.problem.params())
    }
}

pub fn robbins_monro(
    problem: &RmProblem,
    schedule: &StepSchedule,
    x0: f64,
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    schedule.validate(horizon as u64)?;
    let mut s = RmStepper::new(*problem, schedule.clone(), x0, seed);
    collect_trace(&mut s, horizon, seed)
}
