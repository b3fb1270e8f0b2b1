//! Closed-form anytime boundaries, fixed-time bounds and their constants.
//!
//! Every anytime boundary here has the shape
//!
//! ```text
//! r(t) = bias + amp * (log(1/delta) + 2 log log(t + 9)) / (t + offset)
//! ```
//!
//! and comes paired with the step schedule under which it is valid.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::StepSchedule;

/// Which formula a [`Boundary`] evaluates, with its defining parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryKind {
    Conf {
        c1: f64,
        c2: f64,
        c3: f64,
        a: f64,
        l_off: u64,
    },
    Sgd {
        b: f64,
        lambda: f64,
    },
    Pl {
        b: f64,
        mu: f64,
        tau: f64,
    },
    Oja {
        b: f64,
        rho: f64,
        l_off: u64,
    },
    Ridge {
        b: f64,
        diam: f64,
        lambda_pen: f64,
        lambda_min: f64,
        theta_norm: f64,
    },
}

/// A time-uniform width `t -> r(t, delta)` at a fixed confidence level.
///
/// The level is fixed at construction because some offsets (Oja) depend on
/// it. When the offset is large relative to `log(1/delta)` the raw formula
/// first rises and then falls; [`Boundary::eval`] returns the smallest
/// nonincreasing majorant, i.e. it holds the peak value on the initial
/// rising stretch. [`Boundary::raw`] is the formula itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub label: String,
    pub kind: BoundaryKind,
    pub delta: f64,
    pub confidence_cost: f64,
    pub valid_from: u64,
    bias: f64,
    amp: f64,
    offset: f64,
    peak: u64,
    scale: f64,
    shift: u64,
}

/// `log(1/delta)` after checking `delta <= e^-2`.
fn checked_log_inv(delta: f64, max_log: f64, what: &str) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "{what}: delta must lie in (0, 1), got {delta}"
        )));
    }
    let ld = -delta.ln();
    if ld < max_log {
        return Err(Error::domain(format!(
            "{what}: delta = {delta} exceeds e^-{max_log}; the width is not monotone in t there"
        )));
    }
    Ok(ld)
}

fn positive(x: f64, name: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

fn nonneg(x: f64, name: &str) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be nonnegative and finite, got {x}"
        )))
    }
}

/// `log(1/delta) + 2 log log(t + 9)`.
pub fn lil_numerator(log_inv_delta: f64, t: f64) -> f64 {
    log_inv_delta + 2.0 * (t + 9.0).ln().ln()
}

/// `K = max{L - 2, 32} * (1 if L >= 32 else 32)`.
pub fn conf_k(l_off: u64) -> f64 {
    let base = (l_off.saturating_sub(2)).max(32) as f64;
    if l_off >= 32 {
        base
    } else {
        32.0 * base
    }
}

/// Offset of the Oja boundary: `max{ceil(128 B^4 log(1/delta)^2 / rho^2), 32}`.
pub fn oja_l_off(b: f64, rho: f64, delta: f64) -> Result<u64> {
    positive(b, "b")?;
    positive(rho, "rho")?;
    let ld = checked_log_inv(delta, 2.0, "oja_l_off")?;
    let raw = (128.0 * b.powi(4) * ld * ld / (rho * rho)).ceil();
    if raw > 1e15 {
        return Err(Error::domain(format!(
            "oja offset {raw} is too large to represent"
        )));
    }
    Ok((raw as u64).max(32))
}

impl Boundary {
    fn build(
        label: String,
        kind: BoundaryKind,
        delta: f64,
        confidence_cost: f64,
        bias: f64,
        amp: f64,
        offset: f64,
    ) -> Self {
        let mut b = Boundary {
            label,
            kind,
            delta,
            confidence_cost,
            valid_from: 0,
            bias,
            amp,
            offset,
            peak: 0,
            scale: 1.0,
            shift: 0,
        };
        b.peak = b.find_peak();
        b
    }

    fn core(&self, s: u64) -> f64 {
        let s = s as f64;
        self.bias + self.amp * lil_numerator(-self.delta.ln(), s) / (s + self.offset)
    }

    /// First `s` with `core(s + 1) <= core(s)`. The core is unimodal, so
    /// this predicate is monotone in `s`.
    fn find_peak(&self) -> u64 {
        let falls = |s: u64| self.core(s + 1) <= self.core(s);
        if falls(0) {
            return 0;
        }
        let mut lo = 0u64;
        let mut hi = 1u64;
        while !falls(hi) {
            lo = hi;
            hi *= 2;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if falls(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// The width at iterate `t`: nonincreasing in `t`.
    pub fn eval(&self, t: u64) -> f64 {
        let s = t.saturating_sub(self.shift).max(self.peak);
        self.scale * self.core(s)
    }

    /// The printed formula at `t`, without the monotone envelope.
    pub fn raw(&self, t: u64) -> f64 {
        self.scale * self.core(t.saturating_sub(self.shift))
    }

    /// Iterate (after any shift) where the raw formula peaks; 0 when it is
    /// already decreasing from the start.
    pub fn peak(&self) -> u64 {
        self.peak
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn amplitude(&self) -> f64 {
        self.amp
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale
    }

    pub fn shift(&self) -> u64 {
        self.shift
    }

    /// Multiplies the width by `factor` (used for falsification runs).
    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self.label = format!("{}*{factor}", self.label);
        self
    }

    /// Starts the boundary clock at iterate `t0`: the width at `t >= t0` is
    /// the unshifted width at `t - t0`, and checking begins at `t0`.
    pub fn shifted(mut self, t0: u64) -> Self {
        self.shift += t0;
        self.valid_from = self.valid_from.max(self.shift);
        self
    }

    /// The step schedule under which the boundary holds.
    pub fn paired_schedule(&self) -> StepSchedule {
        let (c, off) = match &self.kind {
            BoundaryKind::Conf { c1, l_off, .. } => (2.0 / c1, *l_off as f64),
            BoundaryKind::Sgd { lambda, .. } => (1.0 / lambda, 32.0),
            BoundaryKind::Pl { tau, .. } => (2.0 / tau, 32.0),
            BoundaryKind::Oja { rho, l_off, .. } => (2.0 / rho, *l_off as f64),
            BoundaryKind::Ridge { lambda_min, .. } => (2.0 / lambda_min, 32.0),
        };
        match self.shift {
            0 => StepSchedule::inverse_time(c, off),
            h => StepSchedule::TwoPhase {
                eta0: c / off,
                h0_end: h,
                c,
                beta: off,
            },
        }
    }

    pub fn formula(&self) -> &'static str {
        match self.kind {
            BoundaryKind::Conf { .. } => {
                "31.5*K*max{a*L/log(1/d), C2/C1^2, C3^2/C1^2}*(log(1/d)+2loglog(t+9))/(t+L), K=max{L-2,32}*(1 if L>=32 else 32)"
            }
            BoundaryKind::Sgd { .. } => "1008*B^2/lambda^2*(log(1/d)+2loglog(t+9))/(t+32)",
            BoundaryKind::Pl { .. } => {
                "1008*max{128B^2/(tau*log(1/d)), 2B^2*mu/tau^2}*(log(1/d)+2loglog(t+9))/(t+32)"
            }
            BoundaryKind::Oja { .. } => {
                "max{252L/log(1/d), 1008B^4/rho^2}*(log(1/d)+2loglog(t+9))/(t+L), L=max{ceil(128B^4 log(1/d)^2/rho^2), 32}"
            }
            BoundaryKind::Ridge { .. } => {
                "lambda^2|theta*|^2/lambda_min^2 + 1008*B1^2/lambda_min^2*(log(1/d)+2loglog(t+9))/(t+32), B1=B^2D+B^2+lambda*D+lambda|theta*|"
            }
        }
    }

    pub fn description(&self) -> &'static str {
        match self.kind {
            BoundaryKind::Conf { .. } => "generic boundary for recursions with sqrt-loss noise",
            BoundaryKind::Sgd { .. } => "projected SGD, strongly convex objective",
            BoundaryKind::Pl { .. } => "projected SGD, Polyak-Lojasiewicz objective",
            BoundaryKind::Oja { .. } => "Oja / Krasulina streaming PCA, sin^2 loss",
            BoundaryKind::Ridge { .. } => "projected SGD for ridge regression",
        }
    }

    /// `t,width` rows on the given grid.
    pub fn sample_csv(&self, grid: &[u64]) -> String {
        let mut s = String::from("t,width\n");
        for &t in grid {
            s.push_str(&format!("{t},{}\n", crate::trace::fmt_f64(self.eval(t))));
        }
        s
    }

    pub fn catalog_entry(&self) -> CatalogEntry {
        CatalogEntry {
            label: self.label.clone(),
            description: self.description().to_string(),
            formula: self.formula().to_string(),
            params: self.kind.clone(),
            delta: self.delta,
            confidence_cost: self.confidence_cost,
            valid_from: self.valid_from,
            schedule: self.paired_schedule(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub label: String,
    pub description: String,
    pub formula: String,
    pub params: BoundaryKind,
    pub delta: f64,
    pub confidence_cost: f64,
    pub valid_from: u64,
    pub schedule: StepSchedule,
}

/// Generic boundary for a recursion with `c1, c2, c3` and no extra terms,
/// under the schedule `eta_t = 2 / (c1 (t + l_off))`.
pub fn conf_boundary(
    c1: f64,
    c2: f64,
    c3: f64,
    a: f64,
    l_off: u64,
    delta: f64,
) -> Result<Boundary> {
    positive(c1, "c1")?;
    nonneg(c2, "c2")?;
    nonneg(c3, "c3")?;
    nonneg(a, "a")?;
    if l_off < 3 {
        return Err(Error::domain(format!(
            "l_off must be at least 3, got {l_off}"
        )));
    }
    let ld = checked_log_inv(delta, 2.0, "conf_boundary")?;
    let l = l_off as f64;
    let inner = (a * l / ld).max(c2 / (c1 * c1)).max(c3 * c3 / (c1 * c1));
    let amp = 31.5 * conf_k(l_off) * inner;
    Ok(Boundary::build(
        "conf".into(),
        BoundaryKind::Conf {
            c1,
            c2,
            c3,
            a,
            l_off,
        },
        delta,
        2.0,
        0.0,
        amp,
        l,
    ))
}

/// Strongly convex projected SGD under `eta_t = 1 / (lambda (t + 32))`.
pub fn sgd_boundary(b: f64, lambda: f64, delta: f64) -> Result<Boundary> {
    positive(b, "b")?;
    positive(lambda, "lambda")?;
    checked_log_inv(delta, 2.0, "sgd_boundary")?;
    Ok(Boundary::build(
        "sgd".into(),
        BoundaryKind::Sgd { b, lambda },
        delta,
        1.0,
        0.0,
        1008.0 * b * b / (lambda * lambda),
        32.0,
    ))
}

/// Fixed-time bound `21 B^2/lambda^2 log(1/delta) / (t + 3)` under
/// `eta_t = 1 / (lambda (t + 3))`.
pub fn sgd_last_iterate(b: f64, lambda: f64, delta: f64, t: u64) -> Result<f64> {
    positive(b, "b")?;
    positive(lambda, "lambda")?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if t == 0 {
        return Err(Error::domain("sgd_last_iterate is stated for t >= 1"));
    }
    Ok(21.0 * b * b / (lambda * lambda) * (-delta.ln()) / (t as f64 + 3.0))
}

/// The fixed-horizon SGD bound `624 B^2/lambda^2 (log(1/delta) + log log T) / t`.
pub fn rakhlin_fixed_horizon(
    b: f64,
    lambda: f64,
    delta: f64,
    t_horizon: u64,
    t: u64,
) -> Result<f64> {
    positive(b, "b")?;
    positive(lambda, "lambda")?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if t_horizon < 3 {
        return Err(Error::domain(format!(
            "horizon must be at least 3, got {t_horizon}"
        )));
    }
    if t == 0 || t > t_horizon {
        return Err(Error::domain(format!(
            "t = {t} is outside [1, {t_horizon}]; the fixed-horizon bound is not anytime-valid"
        )));
    }
    Ok(624.0 * b * b / (lambda * lambda) * (-delta.ln() + (t_horizon as f64).ln().ln()) / t as f64)
}

/// Anytime PL boundary under `eta_t = 2 / (tau (t + 32))`.
pub fn pl_boundary(b: f64, mu: f64, tau: f64, delta: f64) -> Result<Boundary> {
    positive(b, "b")?;
    positive(mu, "mu")?;
    positive(tau, "tau")?;
    let ld = checked_log_inv(delta, 2.0, "pl_boundary")?;
    let inner = (128.0 * b * b / (tau * ld)).max(2.0 * b * b * mu / (tau * tau));
    Ok(Boundary::build(
        "pl".into(),
        BoundaryKind::Pl { b, mu, tau },
        delta,
        1.0,
        0.0,
        1008.0 * inner,
        32.0,
    ))
}

/// Fixed-time PL bound `21 mu B^2/tau^2 log(1/delta) / (t + 3)` under
/// `eta_t = 2 / (tau (t + 3))`; needs `delta <= e^-4` and `t >= 3/log(1/delta)`.
pub fn pl_last_iterate(b: f64, mu: f64, tau: f64, delta: f64, t: u64) -> Result<f64> {
    positive(b, "b")?;
    positive(mu, "mu")?;
    positive(tau, "tau")?;
    let ld = checked_log_inv(delta, 4.0, "pl_last_iterate")?;
    if (t as f64) < 3.0 / ld {
        return Err(Error::domain(format!(
            "t = {t} is below 3/log(1/delta) = {}",
            3.0 / ld
        )));
    }
    Ok(21.0 * mu * b * b / (tau * tau) * ld / (t as f64 + 3.0))
}

/// Oja / Krasulina boundary under `eta_t = 2 / (rho (t + l_off))`. The
/// guarantee needs `P(L_0 <= 1/4) >= 1 - delta^3` at the start.
pub fn oja_boundary(b: f64, rho: f64, delta: f64) -> Result<Boundary> {
    let l_off = oja_l_off(b, rho, delta)?;
    let ld = -delta.ln();
    let l = l_off as f64;
    let inner = (252.0 * l / ld).max(1008.0 * b.powi(4) / (rho * rho));
    Ok(Boundary::build(
        "oja".into(),
        BoundaryKind::Oja { b, rho, l_off },
        delta,
        2.0 * (E + 1.0),
        0.0,
        inner,
        l,
    ))
}

/// Ridge SGD boundary under `eta_t = 2 / (lambda_min (t + 32))`.
pub fn ridge_boundary(
    b: f64,
    diam: f64,
    lambda_pen: f64,
    lambda_min: f64,
    theta_norm: f64,
    delta: f64,
) -> Result<Boundary> {
    positive(b, "b")?;
    positive(diam, "diam")?;
    nonneg(lambda_pen, "lambda_pen")?;
    positive(lambda_min, "lambda_min")?;
    nonneg(theta_norm, "theta_norm")?;
    checked_log_inv(delta, 2.0, "ridge_boundary")?;
    let b1 = ridge_b1(b, diam, lambda_pen, theta_norm);
    let lm2 = lambda_min * lambda_min;
    Ok(Boundary::build(
        "ridge".into(),
        BoundaryKind::Ridge {
            b,
            diam,
            lambda_pen,
            lambda_min,
            theta_norm,
        },
        delta,
        1.0,
        lambda_pen * lambda_pen * theta_norm * theta_norm / lm2,
        1008.0 * b1 * b1 / lm2,
        32.0,
    ))
}

/// `B1 = B^2 D + B^2 + lambda D + lambda |theta*|`.
pub fn ridge_b1(b: f64, diam: f64, lambda_pen: f64, theta_norm: f64) -> f64 {
    b * b * diam + b * b + lambda_pen * diam + lambda_pen * theta_norm
}

/// Constant of the short-interval maximal inequality on `[t0, t1]`.
/// The associated crossing level at `t` is
/// [`maximal_crossing_threshold`].
#[allow(clippy::too_many_arguments)]
pub fn maximal_inequality_m(
    c1: f64,
    c2: f64,
    c3: f64,
    a: f64,
    l_off: u64,
    t0: u64,
    t1: u64,
    delta: f64,
) -> Result<f64> {
    positive(c1, "c1")?;
    nonneg(c2, "c2")?;
    nonneg(c3, "c3")?;
    nonneg(a, "a")?;
    if l_off < 3 {
        return Err(Error::domain(format!(
            "l_off must be at least 3, got {l_off}"
        )));
    }
    if t1 <= t0 {
        return Err(Error::domain(format!("need t1 > t0, got t0={t0}, t1={t1}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let ld = -delta.ln();
    let l = l_off as f64;
    let c1s = c1 * c1;
    let inner = (a * l * (l - 1.0) / (ld * (t1 - t0) as f64))
        .max(c2 / (c1s * ld))
        .max(c2 / (c1s * ld.sqrt()))
        .max(c3 * c3 / c1s);
    Ok(31.5 * (l - 1.0) / l * inner)
}

/// `M (t1 - t0) log(1/delta) / (t + 3)^2`.
pub fn maximal_crossing_threshold(m: f64, t0: u64, t1: u64, delta: f64, t: u64) -> f64 {
    let s = t as f64 + 3.0;
    m * (t1 - t0) as f64 * (-delta.ln()) / (s * s)
}

/// LIL lower-bound constant `sqrt(l1) / (4 (1 + l2 log(8) m'))` for steps
/// `l1/t <= eta_t <= l2/t` and root slope `m'`.
pub fn lil_lower_constant(l1: f64, l2: f64, m_prime: f64) -> Result<f64> {
    positive(l1, "l1")?;
    positive(l2, "l2")?;
    positive(m_prime, "m_prime")?;
    if l2 < l1 {
        return Err(Error::domain(format!(
            "need l1 <= l2, got l1={l1}, l2={l2}"
        )));
    }
    Ok(l1.sqrt() / (4.0 * (1.0 + l2 * 8f64.ln() * m_prime)))
}

/// Cold-start schedule for Oja: a constant step `c_stable/(rho H0)` for
/// `t <= H0 = ceil(c_explore B^4 / (delta^6 rho^2))`, then
/// `(c_stable/rho) / (H0 + t - H0)`.
pub fn two_phase_oja_schedule(
    b: f64,
    rho: f64,
    delta: f64,
    c_explore: f64,
    c_stable: f64,
) -> Result<StepSchedule> {
    positive(b, "b")?;
    positive(rho, "rho")?;
    positive(c_explore, "c_explore")?;
    positive(c_stable, "c_stable")?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let h0 = (c_explore * b.powi(4) / (delta.powi(6) * rho * rho)).ceil();
    if h0 > 1e15 {
        return Err(Error::domain(format!(
            "exploration length {h0} is too large"
        )));
    }
    let h0 = (h0 as u64).max(1);
    Ok(StepSchedule::TwoPhase {
        eta0: c_stable / (rho * h0 as f64),
        h0_end: h0,
        c: c_stable / rho,
        beta: h0 as f64,
    })
}

/// One instance of every anytime boundary at `delta`, for listing.
pub fn catalog(delta: f64) -> Result<Vec<Boundary>> {
    Ok(vec![
        conf_boundary(2.0, 1.0, 2.0, 1.0, 32, delta)?,
        sgd_boundary(1.0, 1.0, delta)?,
        pl_boundary(1.0, 1.0, 1.0, delta)?,
        oja_boundary(3f64.sqrt(), 1.0, delta)?,
        ridge_boundary(1.0, 2.0, 0.1, 1.0, 1.0, delta)?,
    ])
}
