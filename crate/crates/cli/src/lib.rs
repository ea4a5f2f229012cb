//! Experiment driver: runs an experiment, writes `report.csv`, the fields as
//! CONFGRID files and optional SVG heatmaps.

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;

pub use config::{Experiment, ExperimentConfig, Tolerances};
pub use report::Row;

/// What a run left behind.
#[derive(Debug)]
pub struct RunSummary {
    pub rows: Vec<Row>,
    pub report: String,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Runs `cfg.experiment` and writes every artifact into `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<RunSummary> {
    let start = Instant::now();
    let mut outcome = experiments::run(cfg)?;
    let runtime_ms = if cfg.timing { start.elapsed().as_millis() } else { 0 };
    report::sort_rows(&mut outcome.rows);
    let text = report::to_csv(cfg.experiment.name(), &outcome.rows, runtime_ms);
    let out = &cfg.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("report.csv"), &text)?;
    for (name, field) in &outcome.fields {
        write(&out.join(format!("{name}.confgrid")), &field.to_confgrid_string())?;
        if cfg.svg {
            write(&out.join(format!("{name}.svg")), &svg::heatmap(field))?;
        }
    }
    for (name, table) in &outcome.tables {
        write(&out.join(format!("{name}.csv")), table)?;
    }
    Ok(RunSummary { rows: outcome.rows, report: text })
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
