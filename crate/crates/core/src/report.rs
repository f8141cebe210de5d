//! Experiment arms (cooperation × leaks), CSV output and comparison tables.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::engine::{self, EngineError, Policy, RunResult};
use crate::species::Species;

pub const CSV_HEADER: &str = "step,hours,species,aggregate_ugm3,forecast_ugm3,coop_fraction,aqi";
pub const TRACE_HEADER: &str = "step,agent_id,species,decision,p,q,reward";
pub const SUMMARY_HEADER: &str = "arm,species,mean_ugm3,max_ugm3,pct_steps_above_goal";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Arm {
    pub cooperation: bool,
    pub leaks: bool,
}

impl Arm {
    /// nocoop+leaks, coop+leaks, coop+noleaks, nocoop+noleaks.
    pub const ALL: [Arm; 4] = [
        Arm { cooperation: false, leaks: true },
        Arm { cooperation: true, leaks: true },
        Arm { cooperation: true, leaks: false },
        Arm { cooperation: false, leaks: false },
    ];

    pub fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig { cooperation: self.cooperation, leaks: self.leaks, ..base.clone() }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coop = if self.cooperation { "coop" } else { "nocoop" };
        let leaks = if self.leaks { "leaks" } else { "noleaks" };
        write!(f, "{coop}-{leaks}")
    }
}

#[derive(Debug, Clone)]
pub struct MatrixResult {
    pub runs: Vec<(Arm, RunResult)>,
}

/// Runs every arm with the base config's seed, so arms differ only in their flags.
pub fn run_matrix(config: &ScenarioConfig, arms: &[Arm], trace_agents: bool) -> Result<MatrixResult, EngineError> {
    assert!(!arms.is_empty(), "run_matrix needs at least one arm");
    let runs = arms
        .par_iter()
        .map(|arm| {
            let cfg = arm.apply(config);
            engine::run_with_policy(&cfg, Policy::from_cooperation(arm.cooperation), trace_agents).map(|r| (*arm, r))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MatrixResult { runs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub arm: Arm,
    pub species: Species,
    pub mean: f64,
    pub max: f64,
    pub pct_above_goal: f64,
}

pub fn comparison(matrix: &MatrixResult) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    for (arm, result) in &matrix.runs {
        let summary = result.summary();
        for (species, s) in summary.iter() {
            rows.push(ComparisonRow {
                arm: *arm,
                species,
                mean: s.mean,
                max: s.max,
                pct_above_goal: 100.0 * s.above_goal,
            });
        }
    }
    rows
}

/// Human-readable table of [`comparison`] rows.
pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let mut out = format!("{:<16} {:<8} {:>12} {:>12} {:>14}\n", "arm", "species", "mean ug/m3", "max ug/m3", "% above goal");
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:<8} {:>12.2} {:>12.2} {:>14.1}\n",
            r.arm.to_string(),
            r.species.to_string(),
            r.mean,
            r.max,
            r.pct_above_goal
        ));
    }
    out
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Long-format per-step series: one row per (step, species).
pub fn write_csv_to(result: &RunResult, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &result.records {
        let hours = r.step as u64 * result.hours_per_step as u64;
        for s in Species::ALL {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.step,
                hours,
                s.tag(),
                r.aggregate[s],
                r.forecast[s],
                r.coop_fraction[s],
                r.aqi
            )?;
        }
    }
    out.flush()
}

pub fn write_csv(result: &RunResult, path: impl AsRef<Path>) -> io::Result<()> {
    write_csv_to(result, create(path.as_ref())?)
}

/// Per-step agent states; empty (header only) when tracing was off.
pub fn write_agent_trace(result: &RunResult, path: impl AsRef<Path>) -> io::Result<()> {
    let mut out = create(path.as_ref())?;
    writeln!(out, "{TRACE_HEADER}")?;
    for t in result.agent_trace.iter().flatten() {
        writeln!(out, "{},{},{},{},{},{},{}", t.step, t.agent_id, t.species.tag(), t.decision.as_bit(), t.p, t.q, t.reward)?;
    }
    out.flush()
}

pub fn write_summary(rows: &[ComparisonRow], path: impl AsRef<Path>) -> io::Result<()> {
    let mut out = create(path.as_ref())?;
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.arm, r.species.tag(), r.mean, r.max, r.pct_above_goal)?;
    }
    out.flush()
}

/// Writes `<arm>.csv` (and `<arm>_agents.csv` when traced) for each arm plus `summary.csv`.
pub fn write_matrix(matrix: &MatrixResult, dir: impl AsRef<Path>) -> io::Result<Vec<ComparisonRow>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (arm, result) in &matrix.runs {
        write_csv(result, dir.join(format!("{arm}.csv")))?;
        if result.agent_trace.is_some() {
            write_agent_trace(result, dir.join(format!("{arm}_agents.csv")))?;
        }
    }
    let rows = comparison(matrix);
    write_summary(&rows, dir.join("summary.csv"))?;
    Ok(rows)
}
