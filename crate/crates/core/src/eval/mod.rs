//! Fit → calibrate → evaluate orchestration and rejection-rate reports.

mod config;
mod pipeline;
mod report;
mod synth;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::Dataset;
use crate::monitor::Monitor;

pub use config::{
    CalibrationSource, DatasetEntry, MonitorChoice, MonitorSection, RunConfig, RunRole,
};
pub use pipeline::{run, EvalRun};
pub use report::{
    emit_report, parse_report_csv, render_plot_csv, render_report, CsvRow, ReportFormat,
};
pub use synth::{generate_synthetic, SynthConfig, SynthData};

/// How a test dataset relates to the monitored domain. ID rows are better
/// when lower; OoD rows when higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    Id,
    NearOod,
    FarOod,
}

impl DatasetRole {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetRole::Id => "id",
            DatasetRole::NearOod => "near_ood",
            DatasetRole::FarOod => "far_ood",
        }
    }

    pub fn heading(self) -> &'static str {
        match self {
            DatasetRole::Id => "ID",
            DatasetRole::NearOod => "Near OoD",
            DatasetRole::FarOod => "Far OoD",
        }
    }
}

impl fmt::Display for DatasetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id" => Ok(DatasetRole::Id),
            "near_ood" => Ok(DatasetRole::NearOod),
            "far_ood" => Ok(DatasetRole::FarOod),
            other => Err(Error::invalid(format!("unknown dataset role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub dataset_name: String,
    pub role: DatasetRole,
    pub n: usize,
    pub rejected: usize,
    pub rejection_rate: f64,
}

/// Rejection rates of one monitor over a set of datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub monitor_kind: String,
    pub monitor_config: BTreeMap<String, serde_json::Value>,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn with_config(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.monitor_config.insert(key.to_string(), value.into());
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Counts rejections of `monitor` on each dataset, in the given order.
pub fn evaluate(monitor: &Monitor, datasets: &[(&Dataset, DatasetRole)]) -> Result<EvalReport> {
    let mut names = HashSet::new();
    let mut rows = Vec::with_capacity(datasets.len());
    for (data, role) in datasets {
        if data.is_empty() {
            return Err(Error::EmptyDataset(data.name().to_string()));
        }
        if data.dim() != monitor.dim() {
            return Err(Error::DimensionMismatch {
                line: None,
                expected: monitor.dim(),
                found: data.dim(),
            });
        }
        if !names.insert(data.name()) {
            return Err(Error::invalid(format!(
                "dataset {:?} listed twice",
                data.name()
            )));
        }
        let mut rejected = 0;
        for x in data.points() {
            if !monitor.accepts(x)? {
                rejected += 1;
            }
        }
        rows.push(EvalRow {
            dataset_name: data.name().to_string(),
            role: *role,
            n: data.len(),
            rejected,
            rejection_rate: rejected as f64 / data.len() as f64,
        });
    }
    let mut monitor_config = BTreeMap::new();
    if let Some(t) = monitor.threshold() {
        let key = if matches!(monitor, Monitor::Bam(_)) {
            "delta"
        } else {
            "threshold"
        };
        monitor_config.insert(key.to_string(), t.into());
    }
    Ok(EvalReport {
        label: monitor.kind().to_string(),
        monitor_kind: monitor.kind().to_string(),
        monitor_config,
        rows,
    })
}
