use std::fs;
use std::path::Path;

use anytime_core::boundaries::catalog as boundary_catalog;
use anytime_core::harness::{
    default_grid, run_counterexample, run_coverage, run_last_iterate, run_lil, run_oja_cold_start,
    width_comparison, width_csv, CounterexampleConfig, CoverageConfig, LastIterateConfig,
    LilConfig, OjaColdConfig, WidthConfig,
};
use anytime_core::recursion::RecursionParams;
use anytime_core::stitch::StitchSchedule;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{CatalogArgs, Common, SEED_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] anytime_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(anytime_core::Error::Config { .. } | anytime_core::Error::Domain(_)) => {
                2
            }
            _ => 1,
        }
    }
}

pub enum Verdict {
    Pass,
    Fail,
}

impl From<bool> for Verdict {
    fn from(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: cannot read: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => {
            s.trim().parse().map(Some).map_err(|_| {
                CliError::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer"))
            })
        }
        Err(_) => Ok(None),
    }
}

fn threads(c: &Common) -> Option<usize> {
    (c.threads > 0).then_some(c.threads)
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    fs::write(dir.join(name), s)?;
    Ok(())
}

#[derive(Serialize)]
struct Timing {
    wall_time_s: f64,
    threads: usize,
}

fn write_timing(c: &Common, wall_time_s: f64) -> Result<()> {
    write_json(
        &c.out_dir,
        "timing.json",
        &Timing {
            wall_time_s,
            threads: c.threads,
        },
    )
}

pub fn coverage(c: &Common) -> Result<Verdict> {
    let mut cfg: CoverageConfig = load(&c.config)?;
    if let Some(s) = seed_override()? {
        cfg.seed_base = s;
    }
    cfg.validate()?;
    out_dir(&c.out_dir)?;
    let r = run_coverage(&cfg, threads(c))?;
    write_json(&c.out_dir, "coverage_report.json", &r)?;
    fs::write(c.out_dir.join("widths.csv"), r.widths_csv())?;
    write_timing(c, r.wall_time_s)?;
    println!(
        "coverage {} / {}: {}/{} paths crossed (rate {:.4}, threshold {:.4}{}) {}",
        r.algorithm,
        r.boundary,
        r.violations,
        r.n_reps,
        r.violation_rate,
        r.threshold,
        if r.expect_violations {
            ", expecting violations"
        } else {
            ""
        },
        if r.pass { "PASS" } else { "FAIL" }
    );
    Ok(r.pass.into())
}

pub fn last_iterate(c: &Common) -> Result<Verdict> {
    let mut cfg: LastIterateConfig = load(&c.config)?;
    if let Some(s) = seed_override()? {
        cfg.seed_base = s;
    }
    out_dir(&c.out_dir)?;
    let r = run_last_iterate(&cfg, threads(c))?;
    write_json(&c.out_dir, "last_iterate_report.json", &r)?;
    write_timing(c, r.wall_time_s)?;
    for row in &r.rows {
        println!(
            "last-iterate t={} delta={}: {}/{} above {:.6} (threshold {:.4}) {}",
            r.t_eval,
            row.delta,
            row.exceedances,
            r.n_reps,
            row.bound,
            row.threshold,
            if row.pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(r.pass.into())
}

pub fn width_table(c: &Common) -> Result<Verdict> {
    let cfg: WidthConfig = load(&c.config)?;
    let rows = width_comparison(&cfg)?;
    out_dir(&c.out_dir)?;
    write_json(&c.out_dir, "width_table.json", &rows)?;
    fs::write(c.out_dir.join("width_table.csv"), width_csv(&rows))?;
    for r in &rows {
        println!(
            "T={}: anytime {:.6e}, fixed-horizon {:.6e}, ratio {:.4}",
            r.t, r.anytime, r.fixed_horizon, r.ratio
        );
    }
    Ok(Verdict::Pass)
}

pub fn lil(c: &Common) -> Result<Verdict> {
    let mut cfg: LilConfig = load(&c.config)?;
    if let Some(s) = seed_override()? {
        cfg.seed_base = s;
    }
    out_dir(&c.out_dir)?;
    let r = run_lil(&cfg, threads(c))?;
    write_json(&c.out_dir, "lil_report.json", &r)?;
    let mut csv = String::from("seed,block,stat,running_max\n");
    for s in &r.seeds {
        for (k, (v, m)) in s.block_stats.iter().zip(&s.running_max).enumerate() {
            csv.push_str(&format!("{},{},{v},{m}\n", s.seed, k + 1));
        }
    }
    fs::write(c.out_dir.join("lil_blocks.csv"), csv)?;
    write_timing(c, r.wall_time_s)?;
    println!(
        "lil: {:.3} of {} seeds reach L = {:.6} by t = {} (later blocks only: {:.3}; need {}) {}",
        r.fraction_reached,
        r.seeds.len(),
        r.l_const,
        r.horizon,
        r.tail_fraction_reached,
        r.min_fraction,
        if r.pass { "PASS" } else { "FAIL" }
    );
    Ok(r.pass.into())
}

pub fn oja_cold_start(c: &Common) -> Result<Verdict> {
    let mut cfg: OjaColdConfig = load(&c.config)?;
    if let Some(s) = seed_override()? {
        cfg.seed_base = s;
    }
    out_dir(&c.out_dir)?;
    let r = run_oja_cold_start(&cfg, threads(c))?;
    write_json(&c.out_dir, "oja_cold_report.json", &r)?;
    write_timing(c, r.wall_time_s)?;
    println!(
        "oja-cold-start: split at {}, hit rate {:.4} (target {:.4}), {} crossings after the split (rate {:.4}, threshold {:.4}) {}",
        r.split,
        r.hit_rate,
        r.hit_target,
        r.violations,
        r.violation_rate,
        r.threshold,
        if r.pass { "PASS" } else { "FAIL" }
    );
    Ok(r.pass.into())
}

pub fn counterexample(c: &Common) -> Result<Verdict> {
    let mut cfg: CounterexampleConfig = load(&c.config)?;
    if let Some(s) = seed_override()? {
        cfg.seed_base = s;
    }
    out_dir(&c.out_dir)?;
    let r = run_counterexample(&cfg, threads(c))?;
    write_json(&c.out_dir, "counterexample_report.json", &r)?;
    write_timing(c, r.wall_time_s)?;
    println!(
        "counterexample: {:.4} of {} paths converge (expected {:.4} +- {:.4}) {}",
        r.fraction_converged,
        r.n_reps,
        r.expected,
        r.tolerance,
        if r.pass { "PASS" } else { "FAIL" }
    );
    Ok(r.pass.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StitchConfig {
    params: RecursionParams,
    delta: f64,
    horizon: u64,
    /// Extra iterates to include besides the epoch boundaries.
    #[serde(default)]
    grid: Option<Vec<u64>>,
}

pub fn stitch_dump(c: &Common) -> Result<Verdict> {
    let cfg: StitchConfig = load(&c.config)?;
    let s = StitchSchedule::new(&cfg.params, cfg.delta, cfg.horizon)?;
    let grid = cfg.grid.unwrap_or_else(|| default_grid(cfg.horizon));
    out_dir(&c.out_dir)?;
    fs::write(c.out_dir.join("stitch.csv"), s.dump_csv(cfg.horizon, &grid))?;
    write_json(&c.out_dir, "stitch.json", &s)?;
    println!(
        "stitch: {} epochs up to t = {}, kappa = {:.4e}, h0 = {:.4e}, M = {:.4e}",
        s.etas.len(),
        s.epochs.last().unwrap(),
        s.kappa,
        s.h0,
        s.m_const
    );
    Ok(Verdict::Pass)
}

pub fn catalog(c: &CatalogArgs) -> Result<Verdict> {
    let entries: Vec<_> = boundary_catalog(c.delta)?
        .iter()
        .map(|b| b.catalog_entry())
        .collect();
    for e in &entries {
        println!("{:<6} {}  [{}]", e.label, e.formula, e.description);
    }
    if let Some(dir) = &c.out_dir {
        out_dir(dir)?;
        write_json(dir, "catalog.json", &entries)?;
    }
    Ok(Verdict::Pass)
}
