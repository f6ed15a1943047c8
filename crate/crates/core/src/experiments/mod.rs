//! Config-driven experiment runners producing versioned error tables.
//!
//! Every runner returns an [`ErrorTable`] together with the tolerance gates
//! it evaluated. [`write_outputs`] stores the table as `detail.csv` or
//! `detail.json` next to a `summary.json` manifest.

mod algebra;
mod classical;
pub mod config;
mod egorov;
mod matrix;
mod nc;
mod reduction;
pub mod table;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use algebra::AlgebraModel;
pub use classical::ClassicalModel;
pub use config::{ExperimentConfig, ExperimentKind, OutputFormat, SymbolConfig, TermConfig};
pub use matrix::{FdConfig, MatrixModel};
pub use nc::{NcModel, SandwichConfig};
pub use reduction::{CosineConfig, ReductionModel};
pub use table::{ErrorRow, ErrorTable, TableSummary};

/// A tolerance check on one aggregated value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub passed: bool,
}

impl Gate {
    /// `value ≤ max`; a missing value fails.
    pub fn at_most(name: impl Into<String>, value: Option<f64>, max: f64) -> Self {
        let passed = value.is_some_and(|v| v <= max);
        Gate {
            name: name.into(),
            value,
            min: None,
            max: Some(max),
            passed,
        }
    }

    /// `min ≤ value ≤ max`; a missing value fails.
    pub fn within(name: impl Into<String>, value: Option<f64>, min: f64, max: f64) -> Self {
        let passed = value.is_some_and(|v| (min..=max).contains(&v));
        Gate {
            name: name.into(),
            value,
            min: Some(min),
            max: Some(max),
            passed,
        }
    }

    pub fn describe(&self) -> String {
        let bound = match (self.min, self.max) {
            (Some(lo), Some(hi)) => format!("in [{lo:e}, {hi:e}]"),
            (None, Some(hi)) => format!("<= {hi:e}"),
            (Some(lo), None) => format!(">= {lo:e}"),
            (None, None) => "defined".into(),
        };
        match self.value {
            Some(v) => format!("{} = {v:e}, required {bound}", self.name),
            None => format!("{} has no data, required {bound}", self.name),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub table: ErrorTable,
    pub gates: Vec<Gate>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn gate(&self, name: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub gate: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub orbiquant: String,
    pub schema: String,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            orbiquant: env!("CARGO_PKG_VERSION").into(),
            schema: table::SCHEMA.into(),
        }
    }
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub format: OutputFormat,
    pub versions: Versions,
    pub passed: bool,
    pub gates: Vec<Gate>,
    pub failures: Vec<Failure>,
    /// Set when the run stopped before producing a table.
    pub error: Option<String>,
    pub table: TableSummary,
}

impl Summary {
    pub fn from_report(report: &Report, cfg: &ExperimentConfig, format: OutputFormat) -> Self {
        let failures = report
            .gates
            .iter()
            .filter(|g| !g.passed)
            .map(|g| Failure {
                gate: g.name.clone(),
                detail: g.describe(),
            })
            .collect();
        Summary {
            experiment: report.experiment.name().into(),
            seed: cfg.seed,
            format,
            versions: Versions::default(),
            passed: report.passed(),
            gates: report.gates.clone(),
            failures,
            error: None,
            table: report.table.summary(),
        }
    }

    /// Manifest for a run that failed with an error.
    pub fn from_error(experiment: &str, seed: u64, format: OutputFormat, err: &Error) -> Self {
        Summary {
            experiment: experiment.into(),
            seed,
            format,
            versions: Versions::default(),
            passed: false,
            gates: Vec::new(),
            failures: vec![Failure {
                gate: "run".into(),
                detail: err.to_string(),
            }],
            error: Some(err.to_string()),
            table: TableSummary::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

/// Parses and checks the model block without running anything.
pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    match cfg.experiment {
        ExperimentKind::ClassicalEgorov => classical::prepare(cfg).map(drop),
        ExperimentKind::MatrixEgorov => matrix::prepare(cfg).map(drop),
        ExperimentKind::NcEgorov => nc::prepare(cfg).map(drop),
        ExperimentKind::Reduction => reduction::prepare(cfg).map(drop),
        ExperimentKind::AlgebraSuite => algebra::prepare(cfg).map(drop),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let (table, gates) = match cfg.experiment {
        ExperimentKind::ClassicalEgorov => classical::run(cfg)?,
        ExperimentKind::MatrixEgorov => matrix::run(cfg)?,
        ExperimentKind::NcEgorov => nc::run(cfg)?,
        ExperimentKind::Reduction => reduction::run(cfg)?,
        ExperimentKind::AlgebraSuite => algebra::run(cfg)?,
    };
    Ok(Report {
        experiment: cfg.experiment,
        table,
        gates,
    })
}

pub fn run_classical_egorov(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    Ok(classical::run(cfg)?.0)
}

pub fn run_matrix_egorov(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    Ok(matrix::run(cfg)?.0)
}

pub fn run_nc_egorov(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    Ok(nc::run(cfg)?.0)
}

pub fn run_reduction(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    Ok(reduction::run(cfg)?.0)
}

pub fn run_algebra_suite(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    Ok(algebra::run(cfg)?.0)
}

pub fn write_summary(summary: &Summary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.json"), summary.to_json())?;
    Ok(())
}

/// Writes the detail table and `summary.json` into `dir`.
pub fn write_outputs(
    report: &Report,
    cfg: &ExperimentConfig,
    dir: &Path,
    format: OutputFormat,
) -> Result<Summary> {
    std::fs::create_dir_all(dir)?;
    let detail = match format {
        OutputFormat::Csv => report.table.to_csv(),
        OutputFormat::Json => report.table.to_json(),
    };
    std::fs::write(dir.join(format.detail_file()), detail)?;
    let summary = Summary::from_report(report, cfg, format);
    write_summary(&summary, dir)?;
    Ok(summary)
}
