//! Feature-vector datasets and their JSON Lines interchange format.
//!
//! One record per line:
//!
//! ```text
//! {"id":"q-0001","vector":[0.25,-1.5,3e-7],"meta":{"dataset":"med"}}
//! ```
//!
//! `meta` is optional. Coordinates are written with shortest round-trip
//! formatting, so `load(save(d))` reproduces every `f64` bit for bit.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// One query's feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureVector {
    pub id: String,
    pub vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl FeatureVector {
    pub fn new(id: impl Into<String>, vector: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            vector,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Calibration,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Calibration => "calibration",
            Role::Test => "test",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "calibration" => Ok(Role::Calibration),
            "test" => Ok(Role::Test),
            other => Err(Error::invalid(format!("unknown dataset role {other:?}"))),
        }
    }
}

/// An ordered, validated collection of equal-dimension feature vectors.
///
/// Construction goes through [`Dataset::new`] or [`load_dataset`], so a
/// `Dataset` value always has unique ids, finite coordinates and a single
/// dimension `dim >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    dim: usize,
    role: Role,
    vectors: Vec<FeatureVector>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, role: Role, vectors: Vec<FeatureVector>) -> Result<Self> {
        let name = name.into();
        let first = vectors
            .first()
            .ok_or_else(|| Error::EmptyDataset(name.clone()))?;
        let dim = first.vector.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                line: Some(1),
                expected: 1,
                found: 0,
            });
        }
        let mut seen = HashSet::with_capacity(vectors.len());
        for (i, fv) in vectors.iter().enumerate() {
            validate_record(fv, dim, i + 1)?;
            if !seen.insert(fv.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: fv.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Self {
            name,
            dim,
            role,
            vectors,
        })
    }

    /// Builds a dataset from bare vectors, naming records `{prefix}-{index}`.
    pub fn from_points(
        name: impl Into<String>,
        role: Role,
        prefix: &str,
        points: impl IntoIterator<Item = Vec<f64>>,
    ) -> Result<Self> {
        let vectors = points
            .into_iter()
            .enumerate()
            .map(|(i, v)| FeatureVector::new(format!("{prefix}-{i:05}"), v))
            .collect();
        Self::new(name, role, vectors)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[FeatureVector] {
        &self.vectors
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.vectors.iter().map(|fv| fv.vector.as_slice())
    }

    pub fn ids(&self) -> Vec<&str> {
        self.vectors.iter().map(|fv| fv.id.as_str()).collect()
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Serializes the dataset in canonical JSONL form, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for fv in &self.vectors {
            // FeatureVector holds only strings and finite floats; this cannot fail.
            out.push_str(&serde_json::to_string(fv).expect("feature record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses JSONL text. `dim` is taken from the first record unless
    /// `expected_dim` is given.
    pub fn from_jsonl(
        name: impl Into<String>,
        role: Role,
        text: &str,
        expected_dim: Option<usize>,
    ) -> Result<Self> {
        let name = name.into();
        let body = text.strip_suffix('\n').unwrap_or(text);
        if body.is_empty() {
            return Err(Error::EmptyDataset(name));
        }
        let mut dim = expected_dim;
        let mut seen = HashSet::new();
        let mut vectors = Vec::new();
        for (idx, line) in body.split('\n').enumerate() {
            let line_no = idx + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                return Err(Error::MalformedLine {
                    line: line_no,
                    message: "empty line".into(),
                });
            }
            let fv: FeatureVector =
                serde_json::from_str(line).map_err(|e| Error::MalformedLine {
                    line: line_no,
                    message: e.to_string(),
                })?;
            let d = *dim.get_or_insert(fv.vector.len());
            validate_record(&fv, d, line_no)?;
            if !seen.insert(fv.id.clone()) {
                return Err(Error::DuplicateId {
                    id: fv.id,
                    line: line_no,
                });
            }
            vectors.push(fv);
        }
        Self::new(name, role, vectors)
    }
}

fn validate_record(fv: &FeatureVector, dim: usize, line: usize) -> Result<()> {
    if dim == 0 || fv.vector.len() != dim {
        return Err(Error::DimensionMismatch {
            line: Some(line),
            expected: dim.max(1),
            found: fv.vector.len(),
        });
    }
    if let Some(index) = fv.vector.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            line: Some(line),
            index,
        });
    }
    Ok(())
}

/// Loads a JSONL feature file. The dataset is named after the file stem and
/// given the `train` role; callers re-role it as needed.
pub fn load_dataset(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::from_jsonl(name, Role::Train, &text, expected_dim)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(dataset.to_jsonl().as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// `ceil(fraction * n)`, ignoring round-off that lands just above an integer
/// (e.g. `0.7 * 10 = 7.000000000000001`).
pub(crate) fn ceil_count(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    let nearest = raw.round();
    if (raw - nearest).abs() <= 1e-9 * raw.abs().max(1.0) {
        nearest as usize
    } else {
        raw.ceil() as usize
    }
}

/// Splits `dataset` into (train, calibration) with `ceil(fraction * n)`
/// calibration vectors, chosen by a seeded shuffle. Both parts keep the
/// original record order.
pub fn split_dataset(
    dataset: &Dataset,
    calibration_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(calibration_fraction > 0.0 && calibration_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "calibration fraction must lie in (0, 1), got {calibration_fraction}"
        )));
    }
    let n = dataset.len();
    let n_calib = ceil_count(calibration_fraction, n);
    if n < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: n,
        });
    }
    if n_calib >= n {
        return Err(Error::invalid(format!(
            "calibration fraction {calibration_fraction} leaves no training vectors out of {n}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream_rng(seed, rng::SPLIT_STREAM));
    let mut in_calib = vec![false; n];
    for &i in &order[..n_calib] {
        in_calib[i] = true;
    }

    let (mut train, mut calib) = (Vec::with_capacity(n - n_calib), Vec::with_capacity(n_calib));
    for (fv, &c) in dataset.vectors.iter().zip(&in_calib) {
        if c {
            calib.push(fv.clone());
        } else {
            train.push(fv.clone());
        }
    }
    let name = dataset.name();
    Ok((
        Dataset::new(format!("{name}.train"), Role::Train, train)?,
        Dataset::new(format!("{name}.calibration"), Role::Calibration, calib)?,
    ))
}
