//! TOML run configuration for `bam eval`.
//!
//! ```toml
//! seed = 1
//! calib_fraction = 0.2
//! calibration = "holdout"      # or "train"
//!
//! [monitor]
//! kind = "all"                 # bam | mahalanobis | cosine | all
//! clusters = 8                 # default round(sqrt(n_train))
//! target_tpr = 0.95
//! fixed_deltas = [0.2, 0.4, 0.8, 1.0]
//!
//! [[dataset]]
//! path = "med_train.jsonl"
//! role = "train"
//!
//! [[dataset]]
//! path = "anatomy.jsonl"
//! name = "Anatomy"
//! role = "near_ood"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetRole;
use crate::bam::EnlargementMode;
use crate::baselines::DEFAULT_EPSILON_SCALE;
use crate::calibration::DEFAULT_TARGET_TPR;
use crate::clustering::{DEFAULT_MAX_ITER, DEFAULT_REL_TOL};
use crate::error::{Error, Result};

pub const DEFAULT_CALIB_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationSource {
    /// Hold out `calib_fraction` of the training set (unless a
    /// `calibration` dataset is listed).
    #[default]
    Holdout,
    /// Calibrate on the training set itself.
    Train,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorChoice {
    Bam,
    Mahalanobis,
    Cosine,
    #[default]
    All,
}

impl MonitorChoice {
    pub fn includes(self, kind: MonitorChoice) -> bool {
        self == MonitorChoice::All || self == kind
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunRole {
    Train,
    Calibration,
    Id,
    NearOod,
    FarOod,
}

impl RunRole {
    pub fn test_role(self) -> Option<DatasetRole> {
        match self {
            RunRole::Id => Some(DatasetRole::Id),
            RunRole::NearOod => Some(DatasetRole::NearOod),
            RunRole::FarOod => Some(DatasetRole::FarOod),
            RunRole::Train | RunRole::Calibration => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub role: RunRole,
}

impl DatasetEntry {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSection {
    pub kind: MonitorChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
    pub target_tpr: f64,
    /// Fixed Δ for the primary box monitor instead of calibrating it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Additional fixed-Δ box monitors reported alongside.
    pub fixed_deltas: Vec<f64>,
    pub enlargement: EnlargementMode,
    pub epsilon_scale: f64,
}

impl Default for MonitorSection {
    fn default() -> Self {
        Self {
            kind: MonitorChoice::All,
            clusters: None,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_REL_TOL,
            target_tpr: DEFAULT_TARGET_TPR,
            delta: None,
            fixed_deltas: Vec::new(),
            enlargement: EnlargementMode::Sigma,
            epsilon_scale: DEFAULT_EPSILON_SCALE,
        }
    }
}

fn default_calib_fraction() -> f64 {
    DEFAULT_CALIB_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_calib_fraction")]
    pub calib_fraction: f64,
    #[serde(default)]
    pub calibration: CalibrationSource,
    #[serde(default)]
    pub monitor: MonitorSection,
    #[serde(rename = "dataset")]
    pub datasets: Vec<DatasetEntry>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Reads a config file; relative dataset paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let count = |role| self.datasets.iter().filter(|d| d.role == role).count();
        if count(RunRole::Train) != 1 {
            return Err(Error::Config(
                "exactly one dataset must have role \"train\"".into(),
            ));
        }
        if count(RunRole::Calibration) > 1 {
            return Err(Error::Config(
                "at most one dataset may have role \"calibration\"".into(),
            ));
        }
        if !self.datasets.iter().any(|d| d.role.test_role().is_some()) {
            return Err(Error::Config(
                "no id/near_ood/far_ood dataset to evaluate".into(),
            ));
        }
        let m = &self.monitor;
        if !(m.target_tpr > 0.0 && m.target_tpr <= 1.0) {
            return Err(Error::Config(format!(
                "target_tpr must lie in (0, 1], got {}",
                m.target_tpr
            )));
        }
        if !(self.calib_fraction > 0.0 && self.calib_fraction < 1.0) {
            return Err(Error::Config(format!(
                "calib_fraction must lie in (0, 1), got {}",
                self.calib_fraction
            )));
        }
        for &d in m.delta.iter().chain(&m.fixed_deltas) {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::Config(format!(
                    "delta must be finite and >= 0, got {d}"
                )));
            }
        }
        if m.clusters == Some(0) {
            return Err(Error::Config("clusters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn entry(&self, role: RunRole) -> Option<&DatasetEntry> {
        self.datasets.iter().find(|d| d.role == role)
    }
}
