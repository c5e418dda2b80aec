//! The three pipeline stages as file-producing commands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use roadplan_core::bezier::{continuity_report, control_points, BezierError};
use roadplan_core::sim::{self, metrics, EndReason, Metrics, Scenario, SimError};
use serde::Serialize;

use crate::format::{fmt_g, write_candidates, write_reference, write_replans, write_trace};
use crate::scenario::ParseError;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot encode metrics: {0}")]
    Toml(#[from] toml::ser::Error),
}

impl From<BezierError> for CommandError {
    fn from(e: BezierError) -> Self {
        CommandError::Sim(e.into())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CommandError + '_ {
    move |source| CommandError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CommandError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Sibling of `out` holding the continuity report of `cmd_smooth`:
/// `ref.csv` becomes `ref_report.csv`.
pub fn report_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "reference".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_report.csv"))
}

/// Writes the smoothed reference line to `out` and its continuity report,
/// with the control points of every corner, to [`report_path`].
pub fn cmd_smooth(scenario: &Scenario, out: &Path) -> Result<(), CommandError> {
    let line = sim::build_reference(scenario)?;
    let report = continuity_report(&line)?;
    let beziers = scenario.corners.iter().map(control_points).collect::<Result<Vec<_>, _>>()?;

    let mut rows: Vec<(String, f64)> = vec![
        ("max_heading_jump".into(), report.max_heading_jump),
        ("max_second_derivative_jump".into(), report.max_second_derivative_jump),
        ("max_curvature_jump".into(), report.max_curvature_jump),
        ("spacing".into(), report.spacing),
    ];
    for (i, b) in beziers.iter().enumerate() {
        for (j, p) in b.control_points.iter().enumerate() {
            rows.push((format!("corner{i}_p{j}_x"), p.x));
            rows.push((format!("corner{i}_p{j}_y"), p.y));
        }
    }

    write_reference(create(out)?, &line).map_err(csv_err(out))?;
    let rp = report_path(out);
    let mut w = csv::Writer::from_writer(create(&rp)?);
    let res: csv::Result<()> = (|| {
        w.write_record(["quantity", "value"])?;
        for (k, v) in &rows {
            w.write_record([k.clone(), fmt_g(*v)])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(csv_err(&rp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanSummary {
    pub candidates: usize,
    pub checked: usize,
    pub selected: Option<usize>,
}

/// Writes one planning cycle's candidate table. A cycle without a feasible
/// candidate still writes the table and reports `selected: None`.
pub fn cmd_plan(scenario: &Scenario, out: &Path) -> Result<PlanSummary, CommandError> {
    let cycle = sim::plan_cycle(scenario)?;
    let selected = cycle.selection.map(|s| s.selected);
    write_candidates(create(out)?, &cycle.candidates, selected).map_err(csv_err(out))?;
    Ok(PlanSummary {
        candidates: cycle.candidates.len(),
        checked: cycle.selection.map_or(cycle.candidates.len(), |s| s.checked),
        selected,
    })
}

#[derive(Serialize)]
struct MetricsFile {
    end: EndReason,
    seed: u64,
    metrics: Metrics,
}

/// Runs the closed loop and writes `trace.csv`, `replans.csv` and
/// `metrics.toml` into `dir`. Nothing is written when the run fails.
pub fn cmd_simulate(scenario: &Scenario, dir: &Path) -> Result<Metrics, CommandError> {
    let trace = sim::run(scenario)?;
    let m = metrics(&trace, scenario.vehicle.wheelbase)?;
    let report = toml::to_string(&MetricsFile {
        end: trace.end,
        seed: scenario.sim.seed,
        metrics: m,
    })?;

    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = dir.join("trace.csv");
    write_trace(create(&p)?, &trace.rows).map_err(csv_err(&p))?;
    let p = dir.join("replans.csv");
    write_replans(create(&p)?, &trace.replans).map_err(csv_err(&p))?;
    let p = dir.join("metrics.toml");
    let mut f = create(&p)?;
    f.write_all(report.as_bytes()).and_then(|_| f.flush()).map_err(io_err(&p))?;
    Ok(m)
}
