use log::info;

use super::config::{CalibrationSource, MonitorChoice, RunConfig, RunRole};
use super::{evaluate, DatasetRole, EvalReport};
use crate::bam::{fit_boxes, BamMonitor};
use crate::baselines::{fit_cosine, fit_mahalanobis};
use crate::calibration::{
    calibrate_bam, calibrate_cosine, calibrate_mahalanobis, CalibrationResult,
};
use crate::clustering::{default_cluster_count, kmeans_fit, KMeansParams};
use crate::error::{Error, Result};
use crate::feature_store::{load_dataset, split_dataset, Dataset, Role};
use crate::monitor::Monitor;

/// Everything one `eval` run produced.
#[derive(Debug, Clone)]
pub struct EvalRun {
    pub reports: Vec<EvalReport>,
    /// Ids of the calibration set every calibrated monitor used.
    pub calibration_ids: Vec<String>,
    /// Test datasets in config order, with their ids.
    pub test_sets: Vec<(String, DatasetRole, Vec<String>)>,
    pub clusters: usize,
}

/// Runs the full fit → calibrate → evaluate protocol of `cfg`.
///
/// All monitors share one training set, one calibration set and the same
/// test datasets.
pub fn run(cfg: &RunConfig) -> Result<EvalRun> {
    cfg.validate()?;
    let train_entry = cfg.entry(RunRole::Train).expect("validated");
    let full_train = load_dataset(&train_entry.path, None)?.with_name(train_entry.display_name());
    let dim = full_train.dim();

    let (train, calib, calib_source) = match (cfg.entry(RunRole::Calibration), cfg.calibration) {
        (Some(entry), _) => {
            let c = load_dataset(&entry.path, Some(dim))?
                .with_name(entry.display_name())
                .with_role(Role::Calibration);
            (full_train, c, "dataset")
        }
        (None, CalibrationSource::Train) => {
            let c = full_train.clone().with_role(Role::Calibration);
            (full_train, c, "train")
        }
        (None, CalibrationSource::Holdout) => {
            let (t, c) = split_dataset(&full_train, cfg.calib_fraction, cfg.seed)?;
            (t, c, "holdout")
        }
    };

    let mut tests: Vec<(Dataset, DatasetRole)> = Vec::new();
    for entry in &cfg.datasets {
        if let Some(role) = entry.role.test_role() {
            let d = load_dataset(&entry.path, Some(dim))?
                .with_name(entry.display_name())
                .with_role(Role::Test);
            tests.push((d, role));
        }
    }
    let test_refs: Vec<(&Dataset, DatasetRole)> = tests.iter().map(|(d, r)| (d, *r)).collect();

    let m = &cfg.monitor;
    let clusters = m
        .clusters
        .unwrap_or_else(|| default_cluster_count(train.len()));
    let common = |report: EvalReport| {
        report
            .with_config("seed", cfg.seed)
            .with_config("calibration", calib_source)
            .with_config("n_train", train.len())
    };
    let calibrated = |report: EvalReport, result: &CalibrationResult| {
        common(report)
            .with_config("target_tpr", result.target_tpr)
            .with_config("n_calibration", result.n_calibration)
            .with_config("achieved_id_accept_rate", result.achieved_id_accept_rate)
    };

    let mut reports = Vec::new();
    if m.kind.includes(MonitorChoice::Bam) {
        let params = KMeansParams {
            clusters,
            seed: cfg.seed,
            max_iter: m.max_iter,
            rel_tol: m.tol,
        };
        let model = kmeans_fit(&train, &params)?;
        info!("k-means: {clusters} clusters, inertia {}", model.inertia);
        let tight = fit_boxes(&train, &model)?.with_mode(m.enlargement);
        let bam_report = |monitor: &BamMonitor| -> Result<EvalReport> {
            Ok(evaluate(&Monitor::Bam(monitor.clone()), &test_refs)?
                .with_config("clusters", clusters)
                .with_config(
                    "enlargement",
                    format!("{:?}", monitor.mode()).to_lowercase(),
                ))
        };

        let mut fixed: Vec<f64> = m.fixed_deltas.clone();
        if let Some(d) = m.delta {
            if !fixed.contains(&d) {
                fixed.push(d);
            }
        }
        for &delta in &fixed {
            let report = bam_report(&tight.with_delta(delta)?)?;
            reports.push(common(report).with_label(format!("bam (delta={delta})")));
        }
        if m.delta.is_none() {
            let (monitor, result) = calibrate_bam(&tight, &calib, m.target_tpr)?;
            info!(
                "bam: delta {} accepts {:.4} of calibration",
                result.threshold, result.achieved_id_accept_rate
            );
            let report = bam_report(&monitor)?;
            reports.push(
                calibrated(report, &result).with_label(format!("bam (tpr={})", m.target_tpr)),
            );
        }
    }
    if m.kind.includes(MonitorChoice::Mahalanobis) {
        let fitted = fit_mahalanobis(&train, m.epsilon_scale)?;
        let (monitor, result) = calibrate_mahalanobis(&fitted, &calib, m.target_tpr)?;
        let epsilon = monitor.epsilon();
        let report = evaluate(&monitor.into(), &test_refs)?.with_config("epsilon", epsilon);
        reports.push(
            calibrated(report, &result).with_label(format!("mahalanobis (tpr={})", m.target_tpr)),
        );
    }
    if m.kind.includes(MonitorChoice::Cosine) {
        let fitted = fit_cosine(&train)?;
        let (monitor, result) = calibrate_cosine(&fitted, &calib, m.target_tpr)?;
        let report = evaluate(&monitor.into(), &test_refs)?;
        reports
            .push(calibrated(report, &result).with_label(format!("cosine (tpr={})", m.target_tpr)));
    }
    if reports.is_empty() {
        return Err(Error::EmptyReport);
    }

    Ok(EvalRun {
        reports,
        calibration_ids: calib.ids().into_iter().map(String::from).collect(),
        test_sets: tests
            .iter()
            .map(|(d, r)| {
                (
                    d.name().to_string(),
                    *r,
                    d.ids().into_iter().map(String::from).collect(),
                )
            })
            .collect(),
        clusters,
    })
}
