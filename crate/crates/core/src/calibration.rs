//! Threshold selection on ID-only calibration data.
//!
//! Every monitor here accepts monotonically in its threshold, so the
//! smallest threshold accepting at least `k = ceil(target_tpr · n)` of the
//! calibration points is the k-th order statistic of their scores
//! (nearest-rank quantile, no interpolation). "TPR" throughout means the
//! ID accept rate; FPR95 and "TPR = 95%" name the same operating point.

use serde::{Deserialize, Serialize};

use crate::bam::BamMonitor;
use crate::baselines::{CosineMonitor, MahalanobisMonitor};
use crate::error::{Error, Result};
use crate::feature_store::{ceil_count, Dataset};

pub const DEFAULT_TARGET_TPR: f64 = 0.95;

/// Enlargement factors swept in fixed-Δ mode.
pub const FIXED_DELTAS: [f64; 4] = [0.2, 0.4, 0.8, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Lower is more in-distribution; accept iff score ≤ threshold.
    Distance,
    /// Higher is more in-distribution; accept iff score ≥ threshold.
    Similarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub target_tpr: f64,
    pub threshold: f64,
    pub achieved_id_accept_rate: f64,
    pub n_calibration: usize,
    pub n_accepted: usize,
}

/// `ceil(target · n)`, at least 1.
pub fn required_accepts(target_tpr: f64, n: usize) -> usize {
    ceil_count(target_tpr, n).clamp(1, n)
}

fn check_target(target_tpr: f64) -> Result<()> {
    if target_tpr > 0.0 && target_tpr <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "target TPR must lie in (0, 1], got {target_tpr}"
        )))
    }
}

/// Nearest-rank threshold over raw calibration scores.
pub fn calibrate_scores(
    kind: ScoreKind,
    scores: &[f64],
    target_tpr: f64,
) -> Result<CalibrationResult> {
    check_target(target_tpr)?;
    if scores.is_empty() {
        return Err(Error::EmptyDataset("calibration scores".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("calibration scores contain NaN"));
    }
    let n = scores.len();
    let k = required_accepts(target_tpr, n);
    let mut sorted = scores.to_vec();
    match kind {
        ScoreKind::Distance => sorted.sort_by(f64::total_cmp),
        ScoreKind::Similarity => sorted.sort_by(|a, b| b.total_cmp(a)),
    }
    let threshold = sorted[k - 1];
    let n_accepted = scores
        .iter()
        .filter(|&&s| match kind {
            ScoreKind::Distance => s <= threshold,
            ScoreKind::Similarity => s >= threshold,
        })
        .count();
    Ok(CalibrationResult {
        target_tpr,
        threshold,
        achieved_id_accept_rate: n_accepted as f64 / n as f64,
        n_calibration: n,
        n_accepted,
    })
}

/// Score-monitor calibration over finite scores.
pub fn calibrate_score_monitor(
    kind: ScoreKind,
    scores: &[f64],
    target_tpr: f64,
) -> Result<CalibrationResult> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("calibration scores must be finite"));
    }
    calibrate_scores(kind, scores, target_tpr)
}

/// Sets Δ to the nearest-rank quantile of the calibration margin scores.
pub fn calibrate_bam(
    monitor: &BamMonitor,
    calib: &Dataset,
    target_tpr: f64,
) -> Result<(BamMonitor, CalibrationResult)> {
    check_target(target_tpr)?;
    check_dim(monitor.dim(), calib)?;
    let scores = calib
        .points()
        .map(|x| monitor.margin_score(x))
        .collect::<Result<Vec<_>>>()?;
    let result = calibrate_scores(ScoreKind::Distance, &scores, target_tpr)?;
    if result.threshold.is_infinite() {
        return Err(Error::InfiniteThreshold {
            violating: scores.iter().filter(|s| s.is_infinite()).count(),
            n: scores.len(),
        });
    }
    Ok((monitor.with_delta(result.threshold)?, result))
}

pub fn calibrate_mahalanobis(
    monitor: &MahalanobisMonitor,
    calib: &Dataset,
    target_tpr: f64,
) -> Result<(MahalanobisMonitor, CalibrationResult)> {
    check_dim(monitor.dim(), calib)?;
    let scores = calib
        .points()
        .map(|x| monitor.score(x))
        .collect::<Result<Vec<_>>>()?;
    let result = calibrate_score_monitor(ScoreKind::Distance, &scores, target_tpr)?;
    Ok((monitor.with_threshold(result.threshold)?, result))
}

pub fn calibrate_cosine(
    monitor: &CosineMonitor,
    calib: &Dataset,
    target_tpr: f64,
) -> Result<(CosineMonitor, CalibrationResult)> {
    check_dim(monitor.dim(), calib)?;
    let scores = calib
        .points()
        .map(|x| monitor.score(x))
        .collect::<Result<Vec<_>>>()?;
    let result = calibrate_score_monitor(ScoreKind::Similarity, &scores, target_tpr)?;
    Ok((monitor.with_threshold(result.threshold)?, result))
}

fn check_dim(dim: usize, calib: &Dataset) -> Result<()> {
    if calib.dim() != dim {
        return Err(Error::DimensionMismatch {
            line: None,
            expected: dim,
            found: calib.dim(),
        });
    }
    Ok(())
}
