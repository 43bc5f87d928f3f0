//! A single enum over all monitor kinds plus their versioned JSON files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bam::{BamMonitor, ClusterBox, EnlargementMode};
use crate::baselines::{CosineMonitor, MahalanobisMonitor};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Monitor {
    Bam(BamMonitor),
    Mahalanobis(MahalanobisMonitor),
    Cosine(CosineMonitor),
}

impl Monitor {
    pub fn kind(&self) -> &'static str {
        match self {
            Monitor::Bam(_) => "bam",
            Monitor::Mahalanobis(_) => "mahalanobis",
            Monitor::Cosine(_) => "cosine",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Monitor::Bam(m) => m.dim(),
            Monitor::Mahalanobis(m) => m.dim(),
            Monitor::Cosine(m) => m.dim(),
        }
    }

    /// Margin score, Mahalanobis distance, or cosine similarity.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            Monitor::Bam(m) => m.margin_score(x),
            Monitor::Mahalanobis(m) => m.score(x),
            Monitor::Cosine(m) => m.score(x),
        }
    }

    pub fn accepts(&self, x: &[f64]) -> Result<bool> {
        match self {
            Monitor::Bam(m) => m.contains(x),
            Monitor::Mahalanobis(m) => m.accepts(x),
            Monitor::Cosine(m) => m.accepts(x),
        }
    }

    /// Δ for box monitors, τ for score monitors.
    pub fn threshold(&self) -> Option<f64> {
        match self {
            Monitor::Bam(m) => Some(m.delta()),
            Monitor::Mahalanobis(m) => m.threshold(),
            Monitor::Cosine(m) => m.threshold(),
        }
    }

    pub fn to_json(&self) -> String {
        let file = match self {
            Monitor::Bam(m) => MonitorFile::Bam {
                dim: m.dim(),
                delta: m.delta(),
                enlargement_mode: m.mode(),
                boxes: m.boxes().to_vec(),
            },
            Monitor::Mahalanobis(m) => MonitorFile::Mahalanobis {
                mean: m.mean().to_vec(),
                covariance: m.covariance().to_vec(),
                epsilon: m.epsilon(),
                threshold: m.threshold(),
            },
            Monitor::Cosine(m) => MonitorFile::Cosine {
                mean: m.mean().to_vec(),
                threshold: m.threshold(),
            },
        };
        let versioned = Versioned {
            version: FORMAT_VERSION,
            body: &file,
        };
        let mut out = serde_json::to_string_pretty(&versioned).expect("monitor serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Error::from_json(&e, text))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::InvalidMonitor("top level must be an object".into()))?;
        match obj.remove("version") {
            Some(v) if v.as_u64() == Some(FORMAT_VERSION) => {}
            Some(v) => return Err(Error::UnknownVersion(v.to_string())),
            None => return Err(Error::InvalidMonitor("missing version".into())),
        }
        match obj.get("kind").and_then(Value::as_str) {
            Some("bam" | "mahalanobis" | "cosine") => {}
            Some(other) => return Err(Error::UnknownKind(other.into())),
            None => return Err(Error::InvalidMonitor("missing kind".into())),
        }
        let file: MonitorFile =
            serde_json::from_value(value).map_err(|e| Error::InvalidMonitor(e.to_string()))?;
        match file {
            MonitorFile::Bam {
                dim,
                delta,
                enlargement_mode,
                boxes,
            } => {
                let m = BamMonitor::new(boxes, delta, enlargement_mode)?;
                if m.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        line: None,
                        expected: dim,
                        found: m.dim(),
                    });
                }
                Ok(Monitor::Bam(m))
            }
            MonitorFile::Mahalanobis {
                mean,
                covariance,
                epsilon,
                threshold,
            } => Ok(Monitor::Mahalanobis(MahalanobisMonitor::from_parts(
                mean, covariance, epsilon, threshold,
            )?)),
            MonitorFile::Cosine { mean, threshold } => {
                Ok(Monitor::Cosine(CosineMonitor::new(mean, threshold)?))
            }
        }
    }
}

impl From<BamMonitor> for Monitor {
    fn from(m: BamMonitor) -> Self {
        Monitor::Bam(m)
    }
}

impl From<MahalanobisMonitor> for Monitor {
    fn from(m: MahalanobisMonitor) -> Self {
        Monitor::Mahalanobis(m)
    }
}

impl From<CosineMonitor> for Monitor {
    fn from(m: CosineMonitor) -> Self {
        Monitor::Cosine(m)
    }
}

#[derive(Serialize)]
struct Versioned<'a> {
    version: u64,
    #[serde(flatten)]
    body: &'a MonitorFile,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum MonitorFile {
    Bam {
        dim: usize,
        delta: f64,
        #[serde(default)]
        enlargement_mode: EnlargementMode,
        boxes: Vec<ClusterBox>,
    },
    Mahalanobis {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        epsilon: f64,
        threshold: Option<f64>,
    },
    Cosine {
        mean: Vec<f64>,
        threshold: Option<f64>,
    },
}

pub fn save_monitor(monitor: &Monitor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, monitor.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_monitor(path: impl AsRef<Path>) -> Result<Monitor> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Monitor::from_json(&text)
}
