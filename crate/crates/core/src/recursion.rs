//! The almost-supermartingale recursion
//!
//! ```text
//! L_t <= (1 - c1 eta_t) L_{t-1} + U_t
//! |E[U_t | F_{t-1}]| <= c2 eta_t^2 + sum_i A_i eta_t^(1+a_i) L_{t-1}^(b_i)
//! |U_t|              <= c3 eta_t sqrt(L_{t-1}) + sum_i B_i eta_t^(1/2+c_i) L_{t-1}^(d_i)
//! ```
//!
//! together with a path-wise checker, a stress process that meets the
//! recursion with near equality, and the Bernoulli process showing that a
//! small initial loss is necessary for convergence to zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{channel_seed, draw_rng};
use crate::schedule::StepSchedule;
use crate::trace::Trace;

/// `coef * eta^(1 + eta_exp) * L^loss_exp` in the conditional-mean bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanTerm {
    pub coef: f64,
    pub eta_exp: f64,
    pub loss_exp: f64,
}

/// `coef * eta^(1/2 + eta_exp) * L^loss_exp` in the magnitude bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeTerm {
    pub coef: f64,
    pub eta_exp: f64,
    pub loss_exp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    #[serde(default)]
    pub terms_mean: Vec<MeanTerm>,
    #[serde(default)]
    pub terms_mag: Vec<MagnitudeTerm>,
}

impl RecursionParams {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let p = RecursionParams {
            c1,
            c2,
            c3,
            terms_mean: Vec::new(),
            terms_mag: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_mean_term(mut self, coef: f64, eta_exp: f64, loss_exp: f64) -> Result<Self> {
        self.terms_mean.push(MeanTerm {
            coef,
            eta_exp,
            loss_exp,
        });
        self.validate()?;
        Ok(self)
    }

    pub fn with_magnitude_term(mut self, coef: f64, eta_exp: f64, loss_exp: f64) -> Result<Self> {
        self.terms_mag.push(MagnitudeTerm {
            coef,
            eta_exp,
            loss_exp,
        });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0) || !self.c1.is_finite() {
            return Err(Error::domain(format!(
                "c1 must be positive, got {}",
                self.c1
            )));
        }
        for (name, v) in [("c2", self.c2), ("c3", self.c3)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        let check = |kind: &str, i: usize, coef: f64, e1: f64, e2: f64| -> Result<()> {
            if !(coef >= 0.0) || !(e1 >= 0.0) || !(e2 >= 0.0) || !(coef + e1 + e2).is_finite() {
                return Err(Error::domain(format!(
                    "{kind} term {i} needs nonnegative finite coefficient and exponents, got ({coef}, {e1}, {e2})"
                )));
            }
            Ok(())
        };
        for (i, t) in self.terms_mean.iter().enumerate() {
            check("mean", i, t.coef, t.eta_exp, t.loss_exp)?;
        }
        for (i, t) in self.terms_mag.iter().enumerate() {
            check("magnitude", i, t.coef, t.eta_exp, t.loss_exp)?;
        }
        Ok(())
    }

    /// Number of extra terms `m`.
    pub fn m(&self) -> usize {
        self.terms_mean.len().max(self.terms_mag.len())
    }

    /// `min_i {(a_i + b_i) ∧ (c_i + d_i)}`, or `+inf` when there are no
    /// extra terms.
    pub fn min_total_exponent(&self) -> f64 {
        self.terms_mean
            .iter()
            .map(|t| t.eta_exp + t.loss_exp)
            .chain(self.terms_mag.iter().map(|t| t.eta_exp + t.loss_exp))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the general stitching construction applies: every extra
    /// term must be of higher order than the leading ones.
    pub fn master_applicable(&self) -> bool {
        self.min_total_exponent() > 1.0
    }

    /// Right-hand side of the magnitude condition:
    /// `c3 eta sqrt(L) + c2 eta^2 + sum_i B_i eta^(1/2+c_i) L^(d_i)`.
    pub fn magnitude_bound(&self, eta: f64, l_prev: f64) -> f64 {
        let extra: f64 = self
            .terms_mag
            .iter()
            .map(|t| t.coef * eta.powf(0.5 + t.eta_exp) * l_prev.powf(t.loss_exp))
            .sum();
        self.c3 * eta * l_prev.sqrt() + self.c2 * eta * eta + extra
    }

    /// Right-hand side of the conditional-mean condition.
    pub fn mean_bound(&self, eta: f64, l_prev: f64) -> f64 {
        let extra: f64 = self
            .terms_mean
            .iter()
            .map(|t| t.coef * eta.powf(1.0 + t.eta_exp) * l_prev.powf(t.loss_exp))
            .sum();
        self.c2 * eta * eta + extra
    }

    /// `(1 - c1 eta) L + U`, evaluated in one fixed order so that producers
    /// and the checker agree bit for bit.
    pub fn recursion_rhs(&self, eta: f64, l_prev: f64, u: f64) -> f64 {
        (1.0 - self.c1 * eta) * l_prev + u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Recursion,
    Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub ok: bool,
    pub first_violation: Option<Violation>,
}

impl CheckReport {
    fn pass() -> Self {
        CheckReport {
            ok: true,
            first_violation: None,
        }
    }

    fn fail(v: Violation) -> Self {
        CheckReport {
            ok: false,
            first_violation: Some(v),
        }
    }
}

/// Default additive slack: `1e-10 * max(1, L_{t-1})`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Verifies, for every `t`, the recursion and the magnitude bound on the
/// recorded noise. The slack at step `t` is `tol * max(1, L_{t-1})`.
pub fn check_recursion(trace: &Trace, params: &RecursionParams, tol: f64) -> Result<CheckReport> {
    if !(tol >= 0.0) {
        return Err(Error::domain(format!(
            "tolerance must be nonnegative, got {tol}"
        )));
    }
    let noise = trace
        .noise()
        .ok_or_else(|| Error::structure("trace has no noise channel to check"))?;
    let losses = trace.losses();
    for (i, (&eta, &u)) in trace.steps().iter().zip(noise).enumerate() {
        let t = i + 1;
        let l_prev = losses[i];
        let slack = tol * l_prev.max(1.0);
        let rhs = params.recursion_rhs(eta, l_prev, u);
        if !(losses[t] <= rhs + slack) {
            return Ok(CheckReport::fail(Violation {
                t,
                lhs: losses[t],
                rhs,
                kind: ViolationKind::Recursion,
            }));
        }
        let bound = params.magnitude_bound(eta, l_prev);
        if !(u.abs() <= bound + slack) {
            return Ok(CheckReport::fail(Violation {
                t,
                lhs: u.abs(),
                rhs: bound,
                kind: ViolationKind::Magnitude,
            }));
        }
    }
    Ok(CheckReport::pass())
}

/// Stress process meeting the recursion with equality:
/// `L_t = (1 - c1 eta_t) L_{t-1} + U_t`, where
/// `U_t = c3 eta_t sqrt(L_{t-1}) xi_t + c2 eta_t^2 zeta_t`, `xi_t = ±1`,
/// `zeta_t ~ U[0, 1]`.
///
/// Draws that would push the loss below zero are truncated at
/// `-(1 - c1 eta_t) L_{t-1}`, which clamps `L_t` at 0 and only shrinks `|U_t|`.
pub fn simulate_saturating(
    params: &RecursionParams,
    schedule: &StepSchedule,
    l0: f64,
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    params.validate()?;
    schedule.validate(horizon as u64)?;
    if !(l0 >= 0.0) || !l0.is_finite() {
        return Err(Error::domain(format!(
            "l0 must be finite and nonnegative, got {l0}"
        )));
    }
    let mut losses = Vec::with_capacity(horizon + 1);
    let mut steps = Vec::with_capacity(horizon);
    let mut noise = Vec::with_capacity(horizon);
    losses.push(l0);
    let mut l = l0;
    for t in 1..=horizon {
        let eta = schedule.eta(t as u64);
        if params.c1 * eta > 1.0 {
            return Err(Error::domain(format!(
                "c1 * eta_{t} = {} exceeds 1; the contraction factor would be negative",
                params.c1 * eta
            )));
        }
        let mut rng = draw_rng(seed, t as u64);
        let xi = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let zeta: f64 = rng.random();
        let contraction = (1.0 - params.c1 * eta) * l;
        let a = params.c3 * eta * l.sqrt();
        let b = params.c2 * eta * eta;
        let u = (a * xi + b * zeta).max(-contraction);
        l = contraction + u;
        losses.push(l);
        steps.push(eta);
        noise.push(u);
    }
    Ok(Trace::new(losses, steps, Some(noise))?
        .with_meta("algorithm", "saturating")
        .with_meta("seed", seed))
}

/// Parameters under which the constant Bernoulli process below satisfies
/// the recursion `L_t <= (1 - eta_t) L_{t-1} + 2 eta_t L_{t-1}^2 + eta_t^2`.
pub fn counterexample_params() -> RecursionParams {
    RecursionParams {
        c1: 1.0,
        c2: 1.0,
        c3: 0.0,
        terms_mean: vec![MeanTerm {
            coef: 2.0,
            eta_exp: 0.0,
            loss_exp: 2.0,
        }],
        terms_mag: vec![
            MagnitudeTerm {
                coef: 2.0,
                eta_exp: 0.5,
                loss_exp: 2.0,
            },
            MagnitudeTerm {
                coef: 1.0,
                eta_exp: 1.5,
                loss_exp: 0.0,
            },
        ],
    }
}

/// Step sizes used by [`counterexample_process`]: `eta_t = 1/(t+1)`.
pub fn counterexample_schedule() -> StepSchedule {
    StepSchedule::inverse_time(1.0, 1.0)
}

/// Draws `Y ~ Bernoulli(p_one)` once and returns the constant trace
/// `L_t = Y`. The noise channel records `U_t = 2 eta_t L^2 + eta_t^2`, so
/// the trace satisfies the recursion of [`counterexample_params`] although
/// it converges to zero only when `Y = 0`.
pub fn counterexample_process(p_one: f64, horizon: usize, seed: u64) -> Result<Trace> {
    if !(0.0..=1.0).contains(&p_one) {
        return Err(Error::domain(format!(
            "p_one must lie in [0, 1], got {p_one}"
        )));
    }
    let y = if draw_rng(channel_seed(seed, 1), 0).random_bool(p_one) {
        1.0
    } else {
        0.0
    };
    let schedule = counterexample_schedule();
    let steps: Vec<f64> = (1..=horizon as u64).map(|t| schedule.eta(t)).collect();
    let noise = steps
        .iter()
        .map(|&eta| 2.0 * eta * y * y + eta * eta)
        .collect();
    Ok(Trace::new(vec![y; horizon + 1], steps, Some(noise))?
        .with_meta("algorithm", "counterexample")
        .with_meta("seed", seed)
        .with_meta("p_one", p_one))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare(c1: f64, c3: f64) -> RecursionParams {
        RecursionParams::new(c1, 0.0, c3).unwrap()
    }

    #[test]
    fn tight_step_passes() {
        let tr = Trace::new(vec![1.0, 0.5], vec![0.5], Some(vec![0.0])).unwrap();
        let r = check_recursion(&tr, &bare(1.0, 0.0), 0.0).unwrap();
        assert!(r.ok);
        assert!(r.first_violation.is_none());
    }

    #[test]
    fn loose_step_is_flagged() {
        let tr = Trace::new(vec![1.0, 0.6], vec![0.5], Some(vec![0.0])).unwrap();
        let r = check_recursion(&tr, &bare(1.0, 0.0), 0.0).unwrap();
        assert!(!r.ok);
        let v = r.first_violation.unwrap();
        assert_eq!(v.t, 1);
        assert_eq!(v.kind, ViolationKind::Recursion);
        assert_eq!(v.lhs, 0.6);
        assert_eq!(v.rhs, 0.5);
    }

    #[test]
    fn magnitude_violation_is_flagged() {
        // recursion holds (0.5 <= 0.5 + 0.1) but |U| = 0.1 > c3 eta sqrt(L) = 0
        let tr = Trace::new(vec![1.0, 0.5], vec![0.5], Some(vec![0.1])).unwrap();
        let r = check_recursion(&tr, &bare(1.0, 0.0), 0.0).unwrap();
        assert_eq!(r.first_violation.unwrap().kind, ViolationKind::Magnitude);
    }

    #[test]
    fn missing_noise_is_structural() {
        let tr = Trace::new(vec![1.0, 0.5], vec![0.5], None).unwrap();
        assert!(matches!(
            check_recursion(&tr, &bare(1.0, 0.0), 0.0),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn param_validation() {
        assert!(RecursionParams::new(0.0, 1.0, 1.0).is_err());
        assert!(RecursionParams::new(1.0, -1.0, 1.0).is_err());
        let p = RecursionParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(p.clone().with_magnitude_term(1.0, -0.5, 1.0).is_err());
        assert_eq!(p.m(), 0);
        assert!(p.master_applicable());
        let q = p.with_mean_term(1.0, 0.5, 0.4).unwrap();
        assert!(!q.master_applicable());
    }

    #[test]
    fn counterexample_params_are_applicable() {
        let p = counterexample_params();
        assert_eq!(p.m(), 2);
        assert_eq!(p.min_total_exponent(), 1.5);
        assert!(p.master_applicable());
    }

    #[test]
    fn noiseless_contraction_is_a_product() {
        let p = RecursionParams::new(1.0, 0.0, 0.0).unwrap();
        let s = StepSchedule::inverse_time(0.5, 0.0);
        let tr = simulate_saturating(&p, &s, 1.0, 500, 3).unwrap();
        let mut prod = 1.0;
        for (t, &l) in tr.losses().iter().enumerate().skip(1) {
            prod *= 1.0 - 1.0 / (2.0 * t as f64);
            assert!((l - prod).abs() <= 1e-12 * prod, "t={t}: {l} vs {prod}");
        }
    }

    #[test]
    fn saturating_process_meets_its_own_contract() {
        let p = RecursionParams::new(2.0, 1.0, 2.0).unwrap();
        let s = StepSchedule::inverse_time(1.0, 32.0);
        let tr = simulate_saturating(&p, &s, 1.0, 10_000, 7).unwrap();
        assert!(check_recursion(&tr, &p, 0.0).unwrap().ok);
        for ((&eta, &u), &l) in tr.steps().iter().zip(tr.noise().unwrap()).zip(tr.losses()) {
            assert!(u.abs() <= p.c3 * eta * l.sqrt() + p.c2 * eta * eta);
        }
    }

    #[test]
    fn saturating_process_converges_without_sqrt_noise() {
        let p = RecursionParams::new(2.0, 1.0, 0.0).unwrap();
        let s = StepSchedule::inverse_time(1.0, 32.0);
        let l0 = 100.0;
        let mut finals: Vec<f64> = (0..21)
            .map(|seed| {
                *simulate_saturating(&p, &s, l0, 100_000, seed)
                    .unwrap()
                    .losses()
                    .last()
                    .unwrap()
            })
            .collect();
        finals.sort_by(f64::total_cmp);
        assert!(finals[10] < 1e-2 * l0);
    }

    #[test]
    fn counterexample_extremes() {
        let z = counterexample_process(0.0, 50, 1).unwrap();
        assert!(z.losses().iter().all(|&l| l == 0.0));
        let o = counterexample_process(1.0, 50, 1).unwrap();
        assert!(o.losses().iter().all(|&l| l == 1.0));
        assert!(
            check_recursion(&o, &counterexample_params(), 0.0)
                .unwrap()
                .ok
        );
        assert!(counterexample_process(1.5, 5, 1).is_err());
    }
}
