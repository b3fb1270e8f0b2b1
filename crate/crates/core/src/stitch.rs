//! Stitched piecewise-constant schedule for a general recursion.
//!
//! Epoch `i` uses the constant step `eta_i = kappa h_{i-1} / log(1/delta_i)`
//! with `h_i = h_0 2^-i` and `delta_i = delta / (i + 10)^2`, and lasts the
//! smallest number of steps that contracts by a factor of at least 8.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recursion::RecursionParams;
use crate::schedule::{Epoch, StepSchedule};

/// Upper end of the index range searched for the minimum inside `A_k(delta)`.
pub const A_SEARCH_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchSchedule {
    pub c1: f64,
    pub delta: f64,
    /// `h_0, h_1, ..., h_k`.
    pub h: Vec<f64>,
    /// `delta_1, ..., delta_k`.
    pub deltas: Vec<f64>,
    /// `eta_1, ..., eta_k`.
    pub etas: Vec<f64>,
    /// `t_0 = 0, t_1, ..., t_k` with `t_k >= horizon`.
    pub epochs: Vec<u64>,
    pub kappa: f64,
    pub h0: f64,
    pub d_const: f64,
    /// `M = 4 sup_k h_k (t_k + 10) / (log(1/delta) + log log(t_k + 10))`
    /// over the emitted epochs.
    pub m_const: f64,
    /// For each magnitude term, the index `i` attaining the minimum in
    /// `A_k(delta)`.
    pub a_argmin: Vec<u64>,
}

/// `D = max{A_i/C1, sqrt(m+1) B_i/sqrt(C1), C2/C1, C3 sqrt(m+1)/sqrt(C1)}`.
pub fn d_constant(p: &RecursionParams) -> f64 {
    let m1 = (p.m() as f64 + 1.0).sqrt();
    let sc1 = p.c1.sqrt();
    let mean = p.terms_mean.iter().map(|t| t.coef / p.c1);
    let mag = p.terms_mag.iter().map(|t| m1 * t.coef / sc1);
    mean.chain(mag)
        .chain([p.c2 / p.c1, p.c3 * m1 / sc1])
        .fold(0.0, f64::max)
}

/// `kappa = min{1, x^2/2, x}` with `x = 1 / ((2m+2) 128 D)`; 1 when `D = 0`.
pub fn kappa(m: usize, d: f64) -> f64 {
    if d == 0.0 {
        return 1.0;
    }
    let x = 1.0 / ((2.0 * m as f64 + 2.0) * 128.0 * d);
    1f64.min(0.5 * x * x).min(x)
}

/// `ln` of `min_{1 <= i <= limit} 2^((i-1) e) / sqrt(log(1/delta_i))`,
/// together with the minimizing `i`.
fn log_min_a(e: f64, log_inv_delta: f64, limit: u64) -> (f64, u64) {
    let ln2 = std::f64::consts::LN_2;
    let mut best = (f64::INFINITY, 1);
    for i in 1..=limit {
        let li = log_inv_delta + 2.0 * (i as f64 + 10.0).ln();
        let v = (i - 1) as f64 * e * ln2 - 0.5 * li.ln();
        if v < best.0 {
            best = (v, i);
        }
    }
    best
}

/// Smallest `n >= 1` with `(1 - c1 eta)^n <= 1/8`.
fn epoch_length(c1: f64, eta: f64) -> u64 {
    let lf = (-c1 * eta).ln_1p();
    let mut n = ((1.0f64 / 8.0).ln() / lf).ceil().max(1.0) as u64;
    while n > 1 && (1.0 - c1 * eta).powf((n - 1) as f64) <= 0.125 {
        n -= 1;
    }
    while (1.0 - c1 * eta).powf(n as f64) > 0.125 {
        n += 1;
    }
    n
}

impl StitchSchedule {
    /// Builds epochs until `t_k >= horizon`.
    pub fn new(params: &RecursionParams, delta: f64, horizon: u64) -> Result<Self> {
        params.validate()?;
        if !params.master_applicable() {
            return Err(Error::domain(format!(
                "stitching needs every extra term of total exponent above 1 (a_i+b_i and c_i+d_i), got minimum {}",
                params.min_total_exponent()
            )));
        }
        if !(delta > 0.0 && delta <= (-2f64).exp()) {
            return Err(Error::domain(format!(
                "delta must lie in (0, e^-2], got {delta}"
            )));
        }
        if horizon == 0 {
            return Err(Error::domain("horizon must be positive"));
        }
        let ld = -delta.ln();
        let m = params.m();
        let d = d_constant(params);
        let kap = kappa(m, d);
        let x = if d == 0.0 {
            1.0
        } else {
            1.0 / ((2.0 * m as f64 + 2.0) * 128.0 * d)
        };
        let ln2 = std::f64::consts::LN_2;

        let mut h0 = ld / (16.0 * params.c1 * kap);
        let mut a_argmin = Vec::new();
        for t in &params.terms_mag {
            let e = t.eta_exp + t.loss_exp - 1.0;
            let (lm, i) = log_min_a(e, ld, A_SEARCH_LIMIT);
            a_argmin.push(i);
            let a_k = x.ln() - (t.eta_exp + t.loss_exp) * ln2 + lm;
            h0 = h0.min((a_k / e).exp());
        }
        for t in &params.terms_mean {
            let e = t.eta_exp + t.loss_exp - 1.0;
            let b_k = x.ln() - (t.eta_exp + t.loss_exp) * ln2;
            h0 = h0.min((b_k / e).exp());
        }
        if !(h0 > 0.0) || !h0.is_finite() {
            return Err(Error::Numeric(format!(
                "initial level h_0 = {h0} is degenerate"
            )));
        }

        let mut h = vec![h0];
        let mut deltas = Vec::new();
        let mut etas = Vec::new();
        let mut epochs = vec![0u64];
        let mut i = 0u64;
        while *epochs.last().unwrap() < horizon {
            i += 1;
            let di = delta / ((i as f64 + 10.0).powi(2));
            let eta = kap * h[(i - 1) as usize] / (-di.ln());
            if eta * params.c1 > 1.0 / 16.0 * (1.0 + 1e-12) {
                return Err(Error::Numeric(format!(
                    "eta_{i} = {eta} exceeds 1/(16 c1); check h_0"
                )));
            }
            let n = epoch_length(params.c1, eta);
            let factor = (1.0 - params.c1 * eta).powf(n as f64);
            assert!(
                factor >= 1.0 / 16.0,
                "epoch {i}: contraction {factor} fell below 1/16"
            );
            let t_prev = *epochs.last().unwrap();
            deltas.push(di);
            etas.push(eta);
            epochs.push(
                t_prev
                    .checked_add(n)
                    .ok_or_else(|| Error::Numeric("epoch index overflow".into()))?,
            );
            h.push(h0 * 0.5f64.powi(i as i32));
        }

        let m_const = 4.0
            * h.iter()
                .zip(&epochs)
                .map(|(&hk, &tk)| {
                    let s = tk as f64 + 10.0;
                    hk * s / (ld + s.ln().ln())
                })
                .fold(0.0, f64::max);

        Ok(StitchSchedule {
            c1: params.c1,
            delta,
            h,
            deltas,
            etas,
            epochs,
            kappa: kap,
            h0,
            d_const: d,
            m_const,
            a_argmin,
        })
    }

    /// Epoch index `i >= 1` containing `t >= 1`.
    fn epoch_of(&self, t: u64) -> usize {
        let i = self.epochs.partition_point(|&e| e < t);
        i.clamp(1, self.etas.len())
    }

    pub fn eta(&self, t: u64) -> f64 {
        self.etas[self.epoch_of(t.max(1)) - 1]
    }

    /// `r*_t`: `h_0` at 0, `h_i` at `t_i`, and `4 (1 - c1 eta_i)^(t - t_{i-1}) h_i`
    /// strictly inside epoch `i`.
    pub fn width(&self, t: u64) -> f64 {
        if t == 0 {
            return self.h0;
        }
        let i = self.epoch_of(t);
        if t == self.epochs[i] {
            return self.h[i];
        }
        let k = (t - self.epochs[i - 1]) as f64;
        4.0 * (1.0 - self.c1 * self.etas[i - 1]).powf(k) * self.h[i]
    }

    /// `M (log(1/delta) + log log(t + 10)) / (t + 10)`.
    pub fn envelope(&self, t: u64) -> f64 {
        let s = t as f64 + 10.0;
        self.m_const * (-self.delta.ln() + s.ln().ln()) / s
    }

    /// `(1 - c1 eta_i)^(t_i - t_{i-1})` for every epoch.
    pub fn epoch_factors(&self) -> Vec<f64> {
        self.etas
            .iter()
            .zip(self.epochs.windows(2))
            .map(|(&eta, w)| (1.0 - self.c1 * eta).powf((w[1] - w[0]) as f64))
            .collect()
    }

    /// Largest `c'` with `c'/t <= eta_t <= 1/(c' t)` on `[lo, hi]`, scanning
    /// epoch boundaries (where `eta_t t` is extremal).
    pub fn eta_sandwich(&self, lo: u64, hi: u64) -> f64 {
        let mut ts = vec![lo, hi];
        for &e in &self.epochs {
            for t in [e, e + 1] {
                if t >= lo && t <= hi {
                    ts.push(t);
                }
            }
        }
        let (mut mn, mut mx) = (f64::INFINITY, 0f64);
        for t in ts {
            let r = self.eta(t) * t as f64;
            mn = mn.min(r);
            mx = mx.max(r);
        }
        mn.min(1.0 / mx)
    }

    pub fn to_step_schedule(&self) -> StepSchedule {
        StepSchedule::PiecewiseConstant {
            epochs: self
                .etas
                .iter()
                .zip(&self.epochs[1..])
                .map(|(&eta, &t_end)| Epoch { t_end, eta })
                .collect(),
        }
    }

    /// `t,eta,width` at every epoch boundary and its successor up to `horizon`,
    /// plus the points of `grid`.
    pub fn dump_csv(&self, horizon: u64, grid: &[u64]) -> String {
        let mut ts: Vec<u64> = self
            .epochs
            .iter()
            .flat_map(|&e| [e, e + 1])
            .chain(grid.iter().copied())
            .filter(|&t| t >= 1 && t <= horizon)
            .collect();
        ts.sort_unstable();
        ts.dedup();
        let mut s = String::from("t,eta,width\n");
        for t in ts {
            s.push_str(&format!(
                "{t},{},{}\n",
                crate::trace::fmt_f64(self.eta(t)),
                crate::trace::fmt_f64(self.width(t))
            ));
        }
        s
    }
}
