//! Empirical check that the martingale part of an algorithm's noise is
//! centred: across replications, the mean of the first `aux` channel at a
//! fixed iterate should vanish up to Monte Carlo error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pool;
use super::spec::AlgorithmSpec;
use crate::error::{Error, Result};
use crate::rng::split_seed;
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenteringConfig {
    pub problem: AlgorithmSpec,
    pub schedule: StepSchedule,
    pub times: Vec<u64>,
    pub n_reps: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Allowed `|mean|` in units of `max |value| / sqrt(n_reps)`.
    #[serde(default = "four")]
    pub z: f64,
}

fn four() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringRow {
    pub t: u64,
    pub mean: f64,
    pub max_abs: f64,
    pub allowed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringReport {
    pub channel: String,
    pub rows: Vec<CenteringRow>,
    pub pass: bool,
}

pub fn run_centering(cfg: &CenteringConfig, threads: Option<usize>) -> Result<CenteringReport> {
    if cfg.n_reps == 0 {
        return Err(Error::config("n_reps", "must be positive"));
    }
    cfg.problem.validate()?;
    let mut times = cfg.times.clone();
    times.sort_unstable();
    times.dedup();
    let Some(&last) = times.last() else {
        return Err(Error::config("times", "must not be empty"));
    };
    if times[0] == 0 {
        return Err(Error::config("times", "iterates start at 1"));
    }
    let channel = cfg
        .problem
        .stepper(cfg.schedule.clone(), 0)?
        .aux_names()
        .first()
        .copied();
    let Some(channel) = channel else {
        return Err(Error::config(
            "problem",
            format!("{} records no martingale channel", cfg.problem.name()),
        ));
    };

    let samples: Vec<Vec<f64>> = pool(threads)?.install(|| {
        (0..cfg.n_reps)
            .into_par_iter()
            .map(|rep| {
                let mut st = cfg
                    .problem
                    .stepper(cfg.schedule.clone(), split_seed(cfg.seed_base, rep as u64))?;
                let mut out = Vec::with_capacity(times.len());
                let mut i = 0;
                for _ in 0..last {
                    let s = st.next_step()?;
                    if s.t == times[i] {
                        out.push(s.aux[0]);
                        i += 1;
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()
    })?;

    let rows: Vec<CenteringRow> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let n = cfg.n_reps as f64;
            let mean = samples.iter().map(|s| s[k]).sum::<f64>() / n;
            let max_abs = samples.iter().map(|s| s[k].abs()).fold(0.0, f64::max);
            let allowed = cfg.z * max_abs / n.sqrt();
            CenteringRow {
                t,
                mean,
                max_abs,
                allowed,
                pass: mean.abs() <= allowed,
            }
        })
        .collect();
    Ok(CenteringReport {
        channel: channel.to_string(),
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}
