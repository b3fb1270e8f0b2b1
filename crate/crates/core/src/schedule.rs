use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One constant-step epoch ending (inclusively) at `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub t_end: u64,
    pub eta: f64,
}

/// Deterministic step-size rule `t -> eta_t`, defined for `t >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `eta_t = c / (t + offset)`.
    InverseTime { c: f64, offset: f64 },
    /// Constant `eta` on `(previous t_end, t_end]`; the last epoch extends
    /// past its end.
    PiecewiseConstant { epochs: Vec<Epoch> },
    /// `eta0` for `t <= h0_end`, then `c / (beta + t - h0_end)`.
    TwoPhase {
        eta0: f64,
        h0_end: u64,
        c: f64,
        beta: f64,
    },
}

impl StepSchedule {
    pub fn inverse_time(c: f64, offset: f64) -> Self {
        StepSchedule::InverseTime { c, offset }
    }

    pub fn eta(&self, t: u64) -> f64 {
        match self {
            StepSchedule::InverseTime { c, offset } => c / (t as f64 + offset),
            StepSchedule::PiecewiseConstant { epochs } => {
                let i = epochs.partition_point(|e| e.t_end < t);
                epochs[i.min(epochs.len() - 1)].eta
            }
            StepSchedule::TwoPhase {
                eta0,
                h0_end,
                c,
                beta,
            } => {
                if t <= *h0_end {
                    *eta0
                } else {
                    c / (beta + (t - h0_end) as f64)
                }
            }
        }
    }

    /// Checks that every `eta_t`, `1 <= t <= horizon`, lies in `(0, 1)`.
    ///
    /// Each variant is monotone on its pieces, so only the extreme values
    /// of each piece are inspected.
    pub fn validate(&self, horizon: u64) -> Result<()> {
        let in_range = |eta: f64, what: &str| -> Result<()> {
            if eta.is_finite() && eta > 0.0 && eta < 1.0 {
                Ok(())
            } else {
                Err(Error::domain(format!(
                    "step size {what} = {eta} is not in (0, 1)"
                )))
            }
        };
        match self {
            StepSchedule::InverseTime { c, offset } => {
                if !(*c > 0.0) || !(*offset >= 0.0) {
                    return Err(Error::domain(format!(
                        "inverse_time needs c > 0 and offset >= 0, got c={c}, offset={offset}"
                    )));
                }
                in_range(self.eta(1), "eta_1")?;
                in_range(self.eta(horizon.max(1)), "eta_horizon")
            }
            StepSchedule::PiecewiseConstant { epochs } => {
                if epochs.is_empty() {
                    return Err(Error::domain("piecewise_constant schedule has no epochs"));
                }
                for w in epochs.windows(2) {
                    if w[1].t_end <= w[0].t_end {
                        return Err(Error::domain(format!(
                            "epoch ends must be strictly increasing ({} then {})",
                            w[0].t_end, w[1].t_end
                        )));
                    }
                }
                for (i, e) in epochs.iter().enumerate() {
                    in_range(e.eta, &format!("epoch[{i}].eta"))?;
                }
                Ok(())
            }
            StepSchedule::TwoPhase {
                eta0,
                h0_end,
                c,
                beta,
            } => {
                if *h0_end > 0 {
                    in_range(*eta0, "eta0")?;
                }
                if horizon > *h0_end {
                    if !(*c > 0.0) || !(*beta >= 0.0) {
                        return Err(Error::domain(format!(
                            "two_phase stable part needs c > 0 and beta >= 0, got c={c}, beta={beta}"
                        )));
                    }
                    in_range(self.eta(h0_end + 1), "first stable-phase step")?;
                }
                Ok(())
            }
        }
    }
}
