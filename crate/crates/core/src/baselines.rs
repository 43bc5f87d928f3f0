//! Score-based comparison monitors: Mahalanobis distance to one Gaussian
//! fitted on all ID features, and cosine similarity to the ID mean.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::feature_store::Dataset;

/// Default ridge scale: `epsilon = 1e-6 * trace(cov) / d`.
pub const DEFAULT_EPSILON_SCALE: f64 = 1e-6;

/// Gaussian fitted to ID features. The Cholesky factor of the
/// (regularized) covariance is computed once at construction.
#[derive(Debug, Clone)]
pub struct MahalanobisMonitor {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    epsilon: f64,
    threshold: Option<f64>,
    factor: Cholesky<f64, Dyn>,
}

impl PartialEq for MahalanobisMonitor {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean
            && self.covariance == other.covariance
            && self.epsilon == other.epsilon
            && self.threshold == other.threshold
    }
}

impl MahalanobisMonitor {
    /// Builds a monitor from an already regularized covariance.
    #[allow(clippy::needless_range_loop)]
    pub fn from_parts(
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        epsilon: f64,
        threshold: Option<f64>,
    ) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::invalid("mean must have at least one coordinate"));
        }
        if covariance.len() != d {
            return Err(Error::DimensionMismatch {
                line: None,
                expected: d,
                found: covariance.len(),
            });
        }
        if let Some(row) = covariance.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                line: None,
                expected: d,
                found: row.len(),
            });
        }
        if mean
            .iter()
            .chain(covariance.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("mean and covariance must be finite"));
        }
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::invalid("epsilon must be positive"));
        }
        check_threshold(threshold, |t| t >= 0.0)?;
        for i in 0..d {
            for j in 0..i {
                if covariance[i][j] != covariance[j][i] {
                    return Err(Error::invalid("covariance is not symmetric"));
                }
            }
        }
        let matrix = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
        let factor = Cholesky::new(matrix).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            mean,
            covariance,
            epsilon,
            threshold,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        check_threshold(Some(threshold), |t| t >= 0.0)?;
        Ok(Self {
            threshold: Some(threshold),
            ..self.clone()
        })
    }

    /// `sqrt((x−μ)ᵀ Σ⁻¹ (x−μ))` via a triangular solve against the
    /// Cholesky factor.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_query(x, self.dim())?;
        let diff = DVector::from_iterator(self.dim(), x.iter().zip(&self.mean).map(|(a, b)| a - b));
        let y = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&diff)
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(y.norm())
    }

    /// Accept iff distance ≤ threshold.
    pub fn accepts(&self, x: &[f64]) -> Result<bool> {
        let t = self.threshold.ok_or(Error::NotCalibrated)?;
        Ok(self.score(x)? <= t)
    }
}

/// Fits mean and population covariance, adding `epsilon·I` with
/// `epsilon = epsilon_scale · trace(cov)/d` (or `epsilon_scale` when the
/// trace is zero).
pub fn fit_mahalanobis(data: &Dataset, epsilon_scale: f64) -> Result<MahalanobisMonitor> {
    let points: Vec<&[f64]> = data.points().collect();
    fit_mahalanobis_points(&points, epsilon_scale)
}

#[allow(clippy::needless_range_loop)]
pub fn fit_mahalanobis_points(points: &[&[f64]], epsilon_scale: f64) -> Result<MahalanobisMonitor> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: points.len(),
        });
    }
    if !(epsilon_scale > 0.0 && epsilon_scale.is_finite()) {
        return Err(Error::invalid("epsilon scale must be positive"));
    }
    let d = points[0].len();
    let mean = mean_of(points)?;
    let n = points.len() as f64;
    let mut cov = vec![vec![0.0; d]; d];
    for p in points {
        for i in 0..d {
            let di = p[i] - mean[i];
            for j in 0..=i {
                cov[i][j] += di * (p[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            cov[i][j] /= n;
            cov[j][i] = cov[i][j];
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();
    let epsilon = if trace > 0.0 {
        epsilon_scale * trace / d as f64
    } else {
        epsilon_scale
    };
    for (i, row) in cov.iter_mut().enumerate() {
        row[i] += epsilon;
    }
    MahalanobisMonitor::from_parts(mean, cov, epsilon, None)
}

/// Cosine similarity to the ID mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineMonitor {
    mean: Vec<f64>,
    threshold: Option<f64>,
}

impl CosineMonitor {
    pub fn new(mean: Vec<f64>, threshold: Option<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::invalid("mean must have at least one coordinate"));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mean must be finite"));
        }
        if mean.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroMean);
        }
        check_threshold(threshold, |t| (-1.0..=1.0).contains(&t))?;
        Ok(Self { mean, threshold })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        Self::new(self.mean.clone(), Some(threshold))
    }

    /// `⟨x, μ⟩ / (‖x‖·‖μ‖)`, clamped to [−1, 1]. A zero query scores −1.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_query(x, self.dim())?;
        let xx: f64 = x.iter().map(|v| v * v).sum();
        if xx == 0.0 {
            log::warn!("zero feature vector scored as cosine similarity -1");
            return Ok(-1.0);
        }
        let mm: f64 = self.mean.iter().map(|v| v * v).sum();
        let dot: f64 = x.iter().zip(&self.mean).map(|(a, b)| a * b).sum();
        // sqrt(xx·mm) rather than sqrt(xx)·sqrt(mm): gives exactly 1 for x = μ.
        Ok((dot / (xx * mm).sqrt()).clamp(-1.0, 1.0))
    }

    /// Accept iff similarity ≥ threshold.
    pub fn accepts(&self, x: &[f64]) -> Result<bool> {
        let t = self.threshold.ok_or(Error::NotCalibrated)?;
        Ok(self.score(x)? >= t)
    }
}

pub fn fit_cosine(data: &Dataset) -> Result<CosineMonitor> {
    let points: Vec<&[f64]> = data.points().collect();
    fit_cosine_points(&points)
}

pub fn fit_cosine_points(points: &[&[f64]]) -> Result<CosineMonitor> {
    CosineMonitor::new(mean_of(points)?, None)
}

fn mean_of(points: &[&[f64]]) -> Result<Vec<f64>> {
    let first = points
        .first()
        .ok_or_else(|| Error::EmptyDataset("baseline input".into()))?;
    let d = first.len();
    let mut mean = vec![0.0; d];
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                line: None,
                expected: d,
                found: p.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(p.iter()) {
            *m += v;
        }
    }
    let n = points.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

fn check_query(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            line: None,
            expected: dim,
            found: x.len(),
        });
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { line: None, index });
    }
    Ok(())
}

fn check_threshold(t: Option<f64>, valid: impl Fn(f64) -> bool) -> Result<()> {
    match t {
        Some(t) if !(t.is_finite() && valid(t)) => {
            Err(Error::invalid(format!("threshold {t} out of range")))
        }
        _ => Ok(()),
    }
}
