//! Monte Carlo experiments and their reports.
//!
//! Every experiment is driven by a serde config, runs its replications on a
//! rayon pool with seeds `split_seed(seed_base, rep)`, and collects results
//! in replication order, so reports do not depend on the thread count.

pub mod centering;
pub mod coverage;
pub mod experiments;
pub mod spec;

pub use centering::{run_centering, CenteringConfig, CenteringReport};
pub use coverage::{nominal_threshold, run_coverage, CoverageConfig, CoverageReport, QuantileRow};
pub use experiments::{
    run_counterexample, run_last_iterate, run_lil, run_oja_cold_start, width_comparison, width_csv,
    ColdMethod, CounterexampleConfig, CounterexampleReport, LastIterateConfig, LastIterateReport,
    LilConfig, LilReport, LilSeed, OjaColdConfig, OjaColdReport, WidthConfig, WidthRow,
};
pub use spec::{AlgorithmSpec, BoundarySpec, PcaInit, PcaSpec, RidgeSpec, RmSpec, SgdSpec};

use crate::error::{Error, Result};

/// Thread pool with `threads` workers; `None` or `Some(0)` lets rayon pick.
pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))
}

/// Nearest-rank quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// `1, 2, 5, 10, 20, 50, ...` up to `horizon`, plus `horizon` itself.
pub fn default_grid(horizon: u64) -> Vec<u64> {
    let mut g = Vec::new();
    let mut dec = 1u64;
    'outer: loop {
        for m in [1, 2, 5] {
            let t = dec.saturating_mul(m);
            if t > horizon {
                break 'outer;
            }
            g.push(t);
        }
        dec = dec.saturating_mul(10);
    }
    if g.last() != Some(&horizon) {
        g.push(horizon);
    }
    g
}

/// Sorted, deduplicated copy of a user grid, checked against the horizon.
pub(crate) fn normalize_grid(grid: &[u64], horizon: u64) -> Result<Vec<u64>> {
    if let Some(&t) = grid.iter().find(|&&t| t > horizon) {
        return Err(Error::config(
            "record_grid",
            format!("point {t} exceeds the horizon {horizon}"),
        ));
    }
    let mut g = grid.to_vec();
    g.sort_unstable();
    g.dedup();
    Ok(g)
}
