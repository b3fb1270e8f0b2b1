//! Fixed-time, width, LIL, cold-start and counterexample experiments.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coverage::nominal_threshold;
use super::pool;
use super::spec::{AlgorithmSpec, PcaInit, PcaSpec, SgdSpec};
use crate::algorithms::{RmProblem, RmStepper, SgdLoss, SgdStepper, Stepper};
use crate::boundaries::{self, lil_lower_constant, oja_boundary, two_phase_oja_schedule};
use crate::error::{Error, Result};
use crate::recursion::{
    check_recursion, counterexample_params, counterexample_process, DEFAULT_TOL,
};
use crate::rng::split_seed;
use crate::schedule::StepSchedule;
use crate::streams::{MKind, RmOracle};

fn check_delta(delta: f64, field: &str) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(
            field,
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    Ok(())
}

fn check_reps(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config("n_reps", "must be positive"));
    }
    Ok(())
}

// last iterate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LastIterateConfig {
    pub problem: SgdSpec,
    pub deltas: Vec<f64>,
    pub t_eval: u64,
    pub n_reps: usize,
    #[serde(default)]
    pub seed_base: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastIterateRow {
    pub delta: f64,
    pub bound: f64,
    pub exceedances: usize,
    pub exceedance_rate: f64,
    /// `delta + 3 sqrt(delta / n_reps)`.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastIterateReport {
    pub t_eval: u64,
    pub n_reps: usize,
    pub schedule: StepSchedule,
    pub rows: Vec<LastIterateRow>,
    pub pass: bool,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Runs projected SGD under `eta_t = 1/(lambda (t + 3))` and compares
/// `L_{t_eval}` with the fixed-time bound at each `delta`.
pub fn run_last_iterate(
    cfg: &LastIterateConfig,
    threads: Option<usize>,
) -> Result<LastIterateReport> {
    let start = Instant::now();
    check_reps(cfg.n_reps)?;
    if cfg.t_eval == 0 {
        return Err(Error::config("t_eval", "must be positive"));
    }
    if cfg.deltas.is_empty() {
        return Err(Error::config("deltas", "must not be empty"));
    }
    for &d in &cfg.deltas {
        check_delta(d, "deltas")?;
    }
    AlgorithmSpec::SgdStronglyConvex(cfg.problem.clone()).validate()?;
    let problem = cfg.problem.problem()?;
    let schedule = StepSchedule::inverse_time(1.0 / cfg.problem.lambda, 3.0);
    schedule
        .validate(cfg.t_eval)
        .map_err(|e| Error::config("problem.lambda", e.to_string()))?;

    let finals: Vec<f64> = pool(threads)?.install(|| {
        (0..cfg.n_reps)
            .into_par_iter()
            .map(|rep| {
                let seed = split_seed(cfg.seed_base, rep as u64);
                let mut st = SgdStepper::new(
                    problem.clone(),
                    schedule.clone(),
                    SgdLoss::StronglyConvex,
                    cfg.problem.start(),
                    seed,
                )?;
                let mut l = st.initial_loss();
                for _ in 0..cfg.t_eval {
                    l = st.next_step()?.loss;
                }
                Ok(l)
            })
            .collect::<Result<_>>()
    })?;

    let rows = cfg
        .deltas
        .iter()
        .map(|&delta| {
            let bound =
                boundaries::sgd_last_iterate(cfg.problem.b, cfg.problem.lambda, delta, cfg.t_eval)?;
            let exceedances = finals.iter().filter(|&&l| l > bound).count();
            let exceedance_rate = exceedances as f64 / cfg.n_reps as f64;
            let threshold = delta + 3.0 * (delta / cfg.n_reps as f64).sqrt();
            Ok(LastIterateRow {
                delta,
                bound,
                exceedances,
                exceedance_rate,
                threshold,
                pass: exceedance_rate <= threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LastIterateReport {
        t_eval: cfg.t_eval,
        n_reps: cfg.n_reps,
        schedule,
        pass: rows.iter().all(|r| r.pass),
        rows,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

// width table

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthConfig {
    pub b: f64,
    pub lambda: f64,
    pub delta: f64,
    pub horizons: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub t: u64,
    pub anytime: f64,
    pub fixed_horizon: f64,
    pub ratio: f64,
}

/// Anytime SGD width at `t = T` against the fixed-horizon bound tuned for
/// horizon `T`, for each `T`.
pub fn width_comparison(cfg: &WidthConfig) -> Result<Vec<WidthRow>> {
    if cfg.horizons.is_empty() {
        return Err(Error::config("horizons", "must not be empty"));
    }
    let b = boundaries::sgd_boundary(cfg.b, cfg.lambda, cfg.delta)
        .map_err(|e| Error::config("delta", e.to_string()))?;
    cfg.horizons
        .iter()
        .map(|&t| {
            let anytime = b.eval(t);
            let fixed_horizon =
                boundaries::rakhlin_fixed_horizon(cfg.b, cfg.lambda, cfg.delta, t, t)
                    .map_err(|e| Error::config("horizons", e.to_string()))?;
            Ok(WidthRow {
                t,
                anytime,
                fixed_horizon,
                ratio: anytime / fixed_horizon,
            })
        })
        .collect()
}

pub fn width_csv(rows: &[WidthRow]) -> String {
    let mut s = String::from("t,anytime,fixed_horizon,ratio\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.t, r.anytime, r.fixed_horizon, r.ratio
        ));
    }
    s
}

// LIL lower bound

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LilConfig {
    /// Slope `M'(theta)` of the linear mean field.
    #[serde(default = "unit")]
    pub slope: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "default_r1")]
    pub r1: f64,
    #[serde(default = "unit")]
    pub x0: f64,
    pub l1: f64,
    pub l2: f64,
    pub n_blocks: u32,
    pub n_seeds: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_fraction")]
    pub min_fraction: f64,
}

fn unit() -> f64 {
    1.0
}

fn default_r1() -> f64 {
    3f64.sqrt()
}

fn default_fraction() -> f64 {
    0.9
}

pub const MAX_LIL_BLOCKS: u32 = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilSeed {
    pub seed: u64,
    /// Maximum of `t L_t / log log t` over `[2^n + 1, 2^(n+1)]`, `n = 1..`.
    pub block_stats: Vec<f64>,
    pub running_max: Vec<f64>,
    /// Maximum over the later half of the blocks only.
    pub tail_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilReport {
    pub l_const: f64,
    pub n_blocks: u32,
    pub horizon: u64,
    pub schedule: StepSchedule,
    pub seeds: Vec<LilSeed>,
    /// Share of seeds whose final running max reaches `l_const`.
    pub fraction_reached: f64,
    /// Same share using only the later half of the blocks.
    pub tail_fraction_reached: f64,
    pub min_fraction: f64,
    pub pass: bool,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Robbins-Monro with a linear mean field and `eta_t = l1 / t`.
pub fn run_lil(cfg: &LilConfig, threads: Option<usize>) -> Result<LilReport> {
    let start = Instant::now();
    if cfg.n_blocks == 0 || cfg.n_blocks > MAX_LIL_BLOCKS {
        return Err(Error::config(
            "n_blocks",
            format!("must lie in [1, {MAX_LIL_BLOCKS}], got {}", cfg.n_blocks),
        ));
    }
    if cfg.n_seeds == 0 {
        return Err(Error::config("n_seeds", "must be positive"));
    }
    let l_const = lil_lower_constant(cfg.l1, cfg.l2, cfg.slope)
        .map_err(|e| Error::config("l1", e.to_string()))?;
    let oracle = RmOracle::new(MKind::Linear { slope: cfg.slope }, cfg.theta, cfg.r1)
        .map_err(|e| Error::config("r1", e.to_string()))?;
    let problem = RmProblem::new(oracle);
    let schedule = StepSchedule::inverse_time(cfg.l1, 0.0);
    let horizon = 1u64 << (cfg.n_blocks + 1);
    let tail_from = cfg.n_blocks as usize / 2;

    let seeds: Vec<LilSeed> = pool(threads)?.install(|| {
        (0..cfg.n_seeds)
            .into_par_iter()
            .map(|rep| {
                let seed = split_seed(cfg.seed_base, rep as u64);
                let mut st = RmStepper::new(problem, schedule.clone(), cfg.x0, seed);
                let mut block_stats = vec![f64::NEG_INFINITY; cfg.n_blocks as usize];
                for _ in 0..horizon {
                    let s = st.next_step()?;
                    if s.t <= 2 {
                        continue;
                    }
                    // t in [2^n + 1, 2^(n+1)]  <=>  n = floor(log2(t - 1))
                    let n = (63 - (s.t - 1).leading_zeros()) as usize;
                    let tf = s.t as f64;
                    let v = tf * s.loss / tf.ln().ln();
                    let slot = &mut block_stats[n - 1];
                    *slot = slot.max(v);
                }
                let running_max = block_stats
                    .iter()
                    .scan(f64::NEG_INFINITY, |m, &v| {
                        *m = m.max(v);
                        Some(*m)
                    })
                    .collect();
                let tail_max = block_stats[tail_from..]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok(LilSeed {
                    seed,
                    block_stats,
                    running_max,
                    tail_max,
                })
            })
            .collect::<Result<_>>()
    })?;

    let n = seeds.len() as f64;
    let fraction_reached = seeds
        .iter()
        .filter(|s| *s.running_max.last().unwrap() >= l_const)
        .count() as f64
        / n;
    let tail_fraction_reached = seeds.iter().filter(|s| s.tail_max >= l_const).count() as f64 / n;
    Ok(LilReport {
        l_const,
        n_blocks: cfg.n_blocks,
        horizon,
        schedule,
        seeds,
        fraction_reached,
        tail_fraction_reached,
        min_fraction: cfg.min_fraction,
        pass: fraction_reached >= cfg.min_fraction,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

// Oja cold start

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColdMethod {
    #[default]
    Oja,
    Krasulina,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OjaColdConfig {
    pub eigs: Vec<f64>,
    #[serde(default)]
    pub rotation_seed: Option<u64>,
    #[serde(default)]
    pub method: ColdMethod,
    /// Sets the exploration length and the hit-rate target `1 - delta^3`.
    pub delta: f64,
    /// Level of the boundary applied after the split. Defaults to
    /// `min(delta, e^-2)`, the largest level the boundary admits.
    #[serde(default)]
    pub boundary_delta: Option<f64>,
    #[serde(default = "unit")]
    pub c_explore: f64,
    #[serde(default = "unit")]
    pub c_stable: f64,
    /// Iterations after the split.
    pub horizon: u64,
    pub n_reps: usize,
    #[serde(default)]
    pub seed_base: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OjaColdReport {
    pub split: u64,
    pub schedule: StepSchedule,
    pub hits: usize,
    pub hit_rate: f64,
    pub hit_target: f64,
    pub hit_pass: bool,
    pub boundary: String,
    pub boundary_delta: f64,
    pub confidence_cost: f64,
    pub violations: usize,
    pub violation_rate: f64,
    pub threshold: f64,
    pub first_violations: Vec<u64>,
    /// Median `sin^2` at the split.
    pub split_median: f64,
    pub pass: bool,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Two-phase run from a uniformly random start: a constant exploration
/// step until the split, then the boundary's own schedule, with the
/// boundary shifted to start at the split.
pub fn run_oja_cold_start(cfg: &OjaColdConfig, threads: Option<usize>) -> Result<OjaColdReport> {
    let start = Instant::now();
    check_delta(cfg.delta, "delta")?;
    check_reps(cfg.n_reps)?;
    let pca = PcaSpec {
        eigs: cfg.eigs.clone(),
        rotation_seed: cfg.rotation_seed,
        init: PcaInit::UniformSphere,
    };
    let alg = match cfg.method {
        ColdMethod::Oja => AlgorithmSpec::Oja {
            pca,
            normalize_each_step: true,
        },
        ColdMethod::Krasulina => AlgorithmSpec::Krasulina(pca),
    };
    alg.validate()?;
    let (AlgorithmSpec::Oja { pca, .. } | AlgorithmSpec::Krasulina(pca)) = &alg else {
        unreachable!()
    };
    let problem = pca.problem()?;
    let (b, rho) = (problem.b(), problem.rho());

    let explore = two_phase_oja_schedule(b, rho, cfg.delta, cfg.c_explore, cfg.c_stable)
        .map_err(|e| Error::config("c_explore", e.to_string()))?;
    let StepSchedule::TwoPhase {
        eta0,
        h0_end: split,
        ..
    } = explore
    else {
        unreachable!()
    };
    let bd = cfg.boundary_delta.unwrap_or(cfg.delta.min((-2.0f64).exp()));
    let boundary = oja_boundary(b, rho, bd)
        .map_err(|e| Error::config("boundary_delta", e.to_string()))?
        .shifted(split);
    let schedule = match boundary.paired_schedule() {
        StepSchedule::TwoPhase {
            h0_end, c, beta, ..
        } => StepSchedule::TwoPhase {
            eta0,
            h0_end,
            c,
            beta,
        },
        _ => unreachable!(),
    };
    schedule
        .validate(split + cfg.horizon)
        .map_err(|e| Error::config("c_stable", e.to_string()))?;

    let outcomes: Vec<(f64, Option<u64>)> = pool(threads)?.install(|| {
        (0..cfg.n_reps)
            .into_par_iter()
            .map(|rep| {
                let seed = split_seed(cfg.seed_base, rep as u64);
                let mut st = alg.stepper(schedule.clone(), seed)?;
                let mut at_split = st.initial_loss();
                let mut first = None;
                for _ in 0..split + cfg.horizon {
                    let s = st.next_step()?;
                    if s.t == split {
                        at_split = s.loss;
                    }
                    if s.t >= boundary.valid_from && first.is_none() && s.loss > boundary.eval(s.t)
                    {
                        first = Some(s.t);
                    }
                }
                Ok((at_split, first))
            })
            .collect::<Result<_>>()
    })?;

    let n = cfg.n_reps as f64;
    let hits = outcomes.iter().filter(|o| o.0 <= 0.25).count();
    let hit_rate = hits as f64 / n;
    let hit_target = 1.0 - cfg.delta.powi(3);
    let first_violations: Vec<u64> = outcomes.iter().filter_map(|o| o.1).collect();
    let violations = first_violations.len();
    let violation_rate = violations as f64 / n;
    let threshold = nominal_threshold(boundary.confidence_cost, bd, cfg.n_reps);
    let mut split_losses: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    split_losses.sort_by(f64::total_cmp);
    let hit_pass = hit_rate >= hit_target;
    Ok(OjaColdReport {
        split,
        schedule,
        hits,
        hit_rate,
        hit_target,
        hit_pass,
        boundary: boundary.label.clone(),
        boundary_delta: bd,
        confidence_cost: boundary.confidence_cost,
        violations,
        violation_rate,
        threshold,
        first_violations,
        split_median: super::quantile(&split_losses, 0.5),
        pass: hit_pass && violation_rate <= threshold,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

// counterexample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub p_one: f64,
    pub n_reps: usize,
    #[serde(default = "default_ce_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Allowed gap between the observed and the predicted share; defaults
    /// to three binomial standard deviations.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_ce_horizon() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub p_one: f64,
    pub n_reps: usize,
    pub horizon: usize,
    /// Every path satisfied the recursion it is built to satisfy.
    pub recursion_ok: bool,
    pub converged: usize,
    pub fraction_converged: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Paths of the constant Bernoulli process: each satisfies the same
/// recursion, yet only those drawn at zero converge.
pub fn run_counterexample(
    cfg: &CounterexampleConfig,
    threads: Option<usize>,
) -> Result<CounterexampleReport> {
    let start = Instant::now();
    if !(0.0..=1.0).contains(&cfg.p_one) {
        return Err(Error::config(
            "p_one",
            format!("must lie in [0, 1], got {}", cfg.p_one),
        ));
    }
    check_reps(cfg.n_reps)?;
    if cfg.horizon == 0 {
        return Err(Error::config("horizon", "must be positive"));
    }
    let params = counterexample_params();
    let outcomes: Vec<(bool, bool)> = pool(threads)?.install(|| {
        (0..cfg.n_reps)
            .into_par_iter()
            .map(|rep| {
                let seed = split_seed(cfg.seed_base, rep as u64);
                let tr = counterexample_process(cfg.p_one, cfg.horizon, seed)?;
                let ok = check_recursion(&tr, &params, DEFAULT_TOL)?.ok;
                Ok((ok, *tr.losses().last().unwrap() == 0.0))
            })
            .collect::<Result<_>>()
    })?;
    let n = cfg.n_reps as f64;
    let converged = outcomes.iter().filter(|o| o.1).count();
    let fraction_converged = converged as f64 / n;
    let expected = 1.0 - cfg.p_one;
    let tolerance = cfg
        .tolerance
        .unwrap_or_else(|| 3.0 * (cfg.p_one * (1.0 - cfg.p_one) / n).sqrt());
    let recursion_ok = outcomes.iter().all(|o| o.0);
    Ok(CounterexampleReport {
        p_one: cfg.p_one,
        n_reps: cfg.n_reps,
        horizon: cfg.horizon,
        recursion_ok,
        converged,
        fraction_converged,
        expected,
        tolerance,
        pass: recursion_ok && (fraction_converged - expected).abs() <= tolerance,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
