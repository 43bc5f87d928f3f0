//! Boxed-abstraction monitor: the accept region is a union of axis-aligned
//! boxes, one per cluster, each widened symmetrically by `delta` times a
//! per-dimension scale.
//!
//! With [`EnlargementMode::Sigma`] the scale is the cluster's population
//! standard deviation along that dimension. With [`EnlargementMode::Ratio`]
//! it is half the box width, so `delta = 0.05` grows every side length by
//! 5%.
//!
//! A coordinate `v` above the box passes at `delta` when
//! `(v - upper) / scale <= delta`, which is `v <= upper + delta * scale`
//! rearranged. Both [`BamMonitor::contains`] and
//! [`BamMonitor::margin_score`] evaluate that same quotient, so `contains(x)`
//! at `delta` holds exactly when `margin_score(x) <= delta`, with no
//! floating-point disagreement at the boundary.

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::feature_store::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnlargementMode {
    #[default]
    Sigma,
    Ratio,
}

impl std::str::FromStr for EnlargementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma" => Ok(EnlargementMode::Sigma),
            "ratio" => Ok(EnlargementMode::Ratio),
            other => Err(Error::invalid(format!(
                "unknown enlargement mode {other:?}"
            ))),
        }
    }
}

/// Tight bounds of one cluster plus its per-dimension spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ClusterBox {
    /// Bounds and population standard deviation of `points`.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> Option<Self> {
        let points: Vec<&[f64]> = points.into_iter().collect();
        let dim = points.first()?.len();
        let n = points.len() as f64;
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        let mut sigma = vec![0.0; dim];
        for j in 0..dim {
            let mut sum = 0.0;
            for p in &points {
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
                sum += p[j];
            }
            if lower[j] == upper[j] {
                continue;
            }
            // Scale by the largest deviation so tiny spreads do not underflow to 0.
            let mean = sum / n;
            let scale = points
                .iter()
                .map(|p| (p[j] - mean).abs())
                .fold(0.0, f64::max);
            let var = points
                .iter()
                .map(|p| {
                    let z = (p[j] - mean) / scale;
                    z * z
                })
                .sum::<f64>()
                / n;
            sigma[j] = scale * var.sqrt();
        }
        Some(Self {
            lower,
            upper,
            sigma,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        for len in [self.lower.len(), self.upper.len(), self.sigma.len()] {
            if len != dim {
                return Err(Error::DimensionMismatch {
                    line: None,
                    expected: dim,
                    found: len,
                });
            }
        }
        for j in 0..dim {
            let (l, u, s) = (self.lower[j], self.upper[j], self.sigma[j]);
            if !(l.is_finite() && u.is_finite() && s.is_finite()) || l > u || s < 0.0 {
                return Err(Error::invalid(format!(
                    "box dimension {j} has invalid bounds [{l}, {u}] or sigma {s}"
                )));
            }
        }
        Ok(())
    }

    fn scale(&self, j: usize, mode: EnlargementMode) -> f64 {
        match mode {
            EnlargementMode::Sigma => self.sigma[j],
            EnlargementMode::Ratio => (self.upper[j] - self.lower[j]) / 2.0,
        }
    }

    /// Enlarged `(lower, upper)` bounds at `delta`.
    pub fn enlarged(&self, delta: f64, mode: EnlargementMode) -> (Vec<f64>, Vec<f64>) {
        (0..self.dim())
            .map(|j| {
                let s = self.scale(j, mode);
                (self.lower[j] - delta * s, self.upper[j] + delta * s)
            })
            .unzip()
    }

    /// How many scale units `v` lies outside `[lower[j], upper[j]]`; zero
    /// inside, +inf outside along a zero-scale dimension.
    fn excess(&self, j: usize, v: f64, mode: EnlargementMode) -> f64 {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        if v < lo {
            (lo - v) / self.scale(j, mode)
        } else if v > hi {
            (v - hi) / self.scale(j, mode)
        } else {
            0.0
        }
    }

    fn contains(&self, x: &[f64], delta: f64, mode: EnlargementMode) -> bool {
        x.iter()
            .enumerate()
            .all(|(j, &v)| self.excess(j, v, mode) <= delta)
    }

    /// Smallest `delta` at which this box accepts `x`, or +inf.
    fn required_delta(&self, x: &[f64], mode: EnlargementMode) -> f64 {
        let mut req: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            req = req.max(self.excess(j, v, mode));
            if req == f64::INFINITY {
                break;
            }
        }
        req
    }
}

/// Union-of-boxes monitor. Immutable; [`BamMonitor::with_delta`] returns a
/// new value.
#[derive(Debug, Clone, PartialEq)]
pub struct BamMonitor {
    dim: usize,
    boxes: Vec<ClusterBox>,
    delta: f64,
    mode: EnlargementMode,
}

impl BamMonitor {
    pub fn new(boxes: Vec<ClusterBox>, delta: f64, mode: EnlargementMode) -> Result<Self> {
        let dim = boxes
            .first()
            .map(ClusterBox::dim)
            .ok_or_else(|| Error::invalid("monitor needs at least one box"))?;
        if dim == 0 {
            return Err(Error::invalid("box dimension must be at least 1"));
        }
        for b in &boxes {
            b.validate(dim)?;
        }
        check_delta(delta)?;
        Ok(Self {
            dim,
            boxes,
            delta,
            mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[ClusterBox] {
        &self.boxes
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mode(&self) -> EnlargementMode {
        self.mode
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            delta,
            ..self.clone()
        })
    }

    pub fn with_mode(&self, mode: EnlargementMode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    /// True iff `x` lies in at least one enlarged box. O(m·d), with early
    /// exit inside each box.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_query(x)?;
        Ok(self
            .boxes
            .iter()
            .any(|b| b.contains(x, self.delta, self.mode)))
    }

    /// Smallest enlargement factor that would accept `x`; zero inside a
    /// tight box, +inf when every box needs a zero-spread dimension to move.
    pub fn margin_score(&self, x: &[f64]) -> Result<f64> {
        self.check_query(x)?;
        let mut best = f64::INFINITY;
        for b in &self.boxes {
            best = best.min(b.required_delta(x, self.mode));
            if best == 0.0 {
                break;
            }
        }
        Ok(best)
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                line: None,
                expected: self.dim,
                found: x.len(),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { line: None, index });
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "delta must be finite and >= 0, got {delta}"
        )))
    }
}

/// One tight box per cluster of `model`, with `delta = 0`.
pub fn fit_boxes(data: &Dataset, model: &ClusterModel) -> Result<BamMonitor> {
    let points: Vec<&[f64]> = data.points().collect();
    fit_boxes_points(&points, model)
}

pub fn fit_boxes_points(points: &[&[f64]], model: &ClusterModel) -> Result<BamMonitor> {
    if model.assignments.len() != points.len() {
        return Err(Error::invalid(format!(
            "cluster model covers {} points but dataset has {}",
            model.assignments.len(),
            points.len()
        )));
    }
    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); model.m()];
    for (p, &a) in points.iter().zip(&model.assignments) {
        members
            .get_mut(a)
            .ok_or_else(|| Error::invalid(format!("assignment {a} out of range")))?
            .push(p);
    }
    let boxes = members
        .into_iter()
        .enumerate()
        .map(|(i, pts)| {
            ClusterBox::enclosing(pts)
                .ok_or_else(|| Error::invalid(format!("cluster {i} is empty")))
        })
        .collect::<Result<Vec<_>>>()?;
    BamMonitor::new(boxes, 0.0, EnlargementMode::Sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(sigma: [f64; 2]) -> BamMonitor {
        let b = ClusterBox {
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 2.0],
            sigma: sigma.to_vec(),
        };
        BamMonitor::new(vec![b], 0.0, EnlargementMode::Sigma).unwrap()
    }

    #[test]
    fn enclosing_bounds_and_population_sigma() {
        let b = ClusterBox::enclosing([&[0.0, 0.0][..], &[1.0, 2.0], &[0.5, 1.0]]).unwrap();
        assert_eq!(b.lower, vec![0.0, 0.0]);
        assert_eq!(b.upper, vec![1.0, 2.0]);

        let b = ClusterBox::enclosing([&[0.0, 0.0][..], &[2.0, 0.0]]).unwrap();
        assert_eq!(b.sigma, vec![1.0, 0.0]);

        let b = ClusterBox::enclosing([&[3.0, 4.0][..]]).unwrap();
        assert_eq!(
            (b.lower.clone(), b.upper.clone(), b.sigma),
            (vec![3.0, 4.0], vec![3.0, 4.0], vec![0.0, 0.0])
        );
    }

    #[test]
    fn sigma_is_zero_exactly_for_constant_coordinates() {
        // The mean of three 0.1s is not 0.1 in floating point.
        let b = ClusterBox::enclosing([&[0.1, 1.0][..], &[0.1, 1.5], &[0.1, 1.0]]).unwrap();
        assert_eq!(b.sigma[0], 0.0);
        assert!(b.sigma[1] > 0.0);
        let b = ClusterBox::enclosing([&[1e-310][..], &[2e-310]]).unwrap();
        assert!(b.sigma[0] > 0.0);
    }

    #[test]
    fn containment_and_enlargement() {
        let m = square([1.0, 1.0]);
        assert!(m.contains(&[1.0, 1.0]).unwrap());
        assert!(!m.contains(&[3.0, 1.0]).unwrap());
        assert!(m.with_delta(1.0).unwrap().contains(&[3.0, 1.0]).unwrap());
        assert!(!m.with_delta(0.999).unwrap().contains(&[3.0, 1.0]).unwrap());
    }

    #[test]
    fn union_of_boxes() {
        let a = ClusterBox {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            sigma: vec![0.5, 0.5],
        };
        let b = ClusterBox {
            lower: vec![10.0, 0.0],
            upper: vec![11.0, 1.0],
            sigma: vec![0.5, 0.5],
        };
        let m = BamMonitor::new(vec![a, b], 0.0, EnlargementMode::Sigma).unwrap();
        assert!(m.contains(&[10.5, 0.5]).unwrap());
        assert!(m.contains(&[0.5, 0.5]).unwrap());
        // Midpoint between the two accepted points is outside both boxes.
        assert!(!m.contains(&[5.5, 0.5]).unwrap());
    }

    #[test]
    fn margin_scores() {
        assert_eq!(square([1.0, 1.0]).margin_score(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(square([1.0, 1.0]).margin_score(&[3.0, 1.0]).unwrap(), 1.0);
        assert_eq!(
            square([1.0, 0.0]).margin_score(&[1.0, 5.0]).unwrap(),
            f64::INFINITY
        );
        assert_eq!(square([1.0, 0.0]).margin_score(&[-0.5, 2.0]).unwrap(), 0.5);
    }

    #[test]
    fn zero_sigma_dimension_is_inert() {
        let m = square([1.0, 0.0]).with_delta(100.0).unwrap();
        assert!(!m.contains(&[1.0, 2.0 + 1e-12]).unwrap());
        assert!(m.contains(&[50.0, 2.0]).unwrap());
    }

    #[test]
    fn ratio_mode_grows_side_length() {
        let m = square([0.0, 0.0]).with_mode(EnlargementMode::Ratio);
        // width 2, delta 0.05 -> each side moves by 0.05.
        let m = m.with_delta(0.05).unwrap();
        assert!(m.contains(&[2.05, 1.0]).unwrap());
        assert!(!m.contains(&[2.06, 1.0]).unwrap());
        let (lo, hi) = m.boxes()[0].enlarged(0.05, EnlargementMode::Ratio);
        assert_eq!((lo[0], hi[0]), (-0.05, 2.05));
    }

    #[test]
    fn query_errors() {
        let m = square([1.0, 1.0]);
        assert!(matches!(
            m.contains(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            m.contains(&[1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(m.margin_score(&[1.0, 2.0, 3.0]).is_err());
        assert!(m.with_delta(-1.0).is_err());
        assert!(m.with_delta(f64::INFINITY).is_err());
    }

    #[test]
    fn fit_rejects_length_mismatch() {
        let model = ClusterModel {
            centroids: vec![vec![0.0]],
            assignments: vec![0, 0],
            inertia: 0.0,
            inertia_trace: vec![],
            lloyd_iterations: 0,
            converged: true,
        };
        let pts: Vec<&[f64]> = vec![&[0.0]];
        assert!(fit_boxes_points(&pts, &model).is_err());
    }
}
