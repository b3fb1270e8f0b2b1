//! Monte Carlo coverage of an anytime boundary: run independent
//! replications of an algorithm under the boundary's schedule and count the
//! paths that ever cross it.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{check_pairing, AlgorithmSpec, BoundarySpec};
use super::{default_grid, normalize_grid, pool, quantile};
use crate::boundaries::Boundary;
use crate::error::{Error, Result};
use crate::rng::split_seed;
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    pub problem: AlgorithmSpec,
    /// Defaults to the boundary matching the problem's constants.
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    #[serde(default = "one")]
    pub boundary_scale: f64,
    pub delta: f64,
    pub n_reps: usize,
    pub horizon: u64,
    #[serde(default)]
    pub seed_base: u64,
    /// Iterates at which loss quantiles are reported.
    #[serde(default)]
    pub record_grid: Option<Vec<u64>>,
    /// Must equal the boundary's paired schedule when given.
    #[serde(default)]
    pub schedule: Option<StepSchedule>,
    /// A falsification run passes when the violation rate exceeds the
    /// threshold instead of staying below it.
    #[serde(default)]
    pub expect_violations: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub t: u64,
    pub width: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub algorithm: String,
    pub boundary: String,
    pub formula: String,
    pub delta: f64,
    pub confidence_cost: f64,
    pub n_reps: usize,
    pub horizon: u64,
    pub valid_from: u64,
    pub schedule: StepSchedule,
    pub violations: usize,
    pub violation_rate: f64,
    /// Largest violation rate consistent with the nominal level:
    /// `p + 3 sqrt(p / n)` with `p = min(1, cost * delta)`.
    pub threshold: f64,
    pub expect_violations: bool,
    pub pass: bool,
    /// First crossing iterate of each violating replication.
    pub first_violations: Vec<u64>,
    /// Largest `L_t / width(t)` seen on any path.
    pub max_ratio: f64,
    pub quantiles: Vec<QuantileRow>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl CoverageReport {
    pub fn widths_csv(&self) -> String {
        let mut s = String::from("t,width,q50,q90,q99\n");
        for r in &self.quantiles {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t, r.width, r.q50, r.q90, r.q99
            ));
        }
        s
    }
}

pub fn nominal_threshold(cost: f64, delta: f64, n: usize) -> f64 {
    let p = (cost * delta).min(1.0);
    p + 3.0 * (p / n as f64).sqrt()
}

struct RepOutcome {
    first_violation: Option<u64>,
    max_ratio: f64,
    at_grid: Vec<f64>,
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(
                "delta",
                format!("must lie in (0, 1), got {}", self.delta),
            ));
        }
        if self.n_reps == 0 {
            return Err(Error::config("n_reps", "must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be positive"));
        }
        if !(self.boundary_scale > 0.0) {
            return Err(Error::config("boundary_scale", "must be positive"));
        }
        self.problem.validate()?;
        Ok(())
    }

    /// The boundary under test, after pairing checks and scaling.
    pub fn boundary(&self) -> Result<Boundary> {
        let spec = match &self.boundary {
            Some(b) => b.clone(),
            None => BoundarySpec::matching(&self.problem)?,
        };
        let b = spec.build(self.delta).map_err(|e| match e {
            Error::Domain(m) => Error::config("boundary", m),
            other => other,
        })?;
        check_pairing(&self.problem, &b)?;
        Ok(if self.boundary_scale == 1.0 {
            b
        } else {
            b.scaled(self.boundary_scale)
        })
    }

    pub fn resolved_schedule(&self, b: &Boundary) -> Result<StepSchedule> {
        let paired = b.paired_schedule();
        if let Some(s) = &self.schedule {
            if *s != paired {
                return Err(Error::config(
                    "schedule",
                    format!("the boundary holds under {paired:?}, not {s:?}"),
                ));
            }
        }
        paired
            .validate(self.horizon)
            .map_err(|e| Error::config("schedule", e.to_string()))?;
        Ok(paired)
    }
}

pub fn run_coverage(cfg: &CoverageConfig, threads: Option<usize>) -> Result<CoverageReport> {
    let start = Instant::now();
    cfg.validate()?;
    let b = cfg.boundary()?;
    let schedule = cfg.resolved_schedule(&b)?;
    let grid: Vec<u64> = match &cfg.record_grid {
        Some(g) => normalize_grid(g, cfg.horizon)?,
        None => default_grid(cfg.horizon),
    };

    let one_rep = |rep: usize| -> Result<RepOutcome> {
        let seed = split_seed(cfg.seed_base, rep as u64);
        let mut st = cfg.problem.stepper(schedule.clone(), seed)?;
        let mut out = RepOutcome {
            first_violation: None,
            max_ratio: 0.0,
            at_grid: Vec::with_capacity(grid.len()),
        };
        let mut gi = 0;
        let mut visit = |t: u64, l: f64, out: &mut RepOutcome| {
            while gi < grid.len() && grid[gi] == t {
                out.at_grid.push(l);
                gi += 1;
            }
            if t >= b.valid_from {
                let w = b.eval(t);
                out.max_ratio = out.max_ratio.max(l / w);
                if l > w && out.first_violation.is_none() {
                    out.first_violation = Some(t);
                }
            }
        };
        visit(0, st.initial_loss(), &mut out);
        for _ in 0..cfg.horizon {
            let s = st.next_step()?;
            if !s.loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at t={} in replication {rep}",
                    s.t
                )));
            }
            visit(s.t, s.loss, &mut out);
        }
        Ok(out)
    };

    let outcomes: Vec<RepOutcome> = pool(threads)?.install(|| {
        (0..cfg.n_reps)
            .into_par_iter()
            .map(one_rep)
            .collect::<Result<_>>()
    })?;

    let first_violations: Vec<u64> = outcomes.iter().filter_map(|o| o.first_violation).collect();
    let violations = first_violations.len();
    let violation_rate = violations as f64 / cfg.n_reps as f64;
    let threshold = nominal_threshold(b.confidence_cost, cfg.delta, cfg.n_reps);
    let pass = if cfg.expect_violations {
        violation_rate > threshold
    } else {
        violation_rate <= threshold
    };
    let quantiles = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut v: Vec<f64> = outcomes.iter().map(|o| o.at_grid[i]).collect();
            v.sort_by(f64::total_cmp);
            QuantileRow {
                t,
                width: b.eval(t),
                q50: quantile(&v, 0.5),
                q90: quantile(&v, 0.9),
                q99: quantile(&v, 0.99),
            }
        })
        .collect();

    Ok(CoverageReport {
        algorithm: cfg.problem.name().to_string(),
        boundary: b.label.clone(),
        formula: b.formula().to_string(),
        delta: cfg.delta,
        confidence_cost: b.confidence_cost,
        n_reps: cfg.n_reps,
        horizon: cfg.horizon,
        valid_from: b.valid_from,
        schedule,
        violations,
        violation_rate,
        threshold,
        expect_violations: cfg.expect_violations,
        pass,
        first_violations,
        max_ratio: outcomes.iter().map(|o| o.max_ratio).fold(0.0, f64::max),
        quantiles,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
