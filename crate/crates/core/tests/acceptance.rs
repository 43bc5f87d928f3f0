//! Acceptance suite. Each test checks one criterion and prints a single
//! `PASS`/`FAIL` line; run with `--nocapture` to see them.

mod common;

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{improving_move, kmeans_fixtures, random_monitor, random_point, sse};
use lora_bam::bam::{fit_boxes, fit_boxes_points, BamMonitor, ClusterBox, EnlargementMode};
use lora_bam::baselines::{fit_cosine, fit_mahalanobis, MahalanobisMonitor, DEFAULT_EPSILON_SCALE};
use lora_bam::calibration::{
    calibrate_bam, calibrate_cosine, calibrate_mahalanobis, required_accepts,
};
use lora_bam::clustering::{default_cluster_count, kmeans_fit, kmeans_fit_points, KMeansParams};
use lora_bam::eval::{generate_synthetic, SynthConfig};
use lora_bam::feature_store::{Dataset, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: &str, ok: bool, detail: String) {
    println!("{} {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{criterion}: {detail}");
}

fn clustered_points(rng: &mut impl Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let centers: Vec<Vec<f64>> = (0..rng.random_range(1..6))
        .map(|_| random_point(rng, d))
        .collect();
    (0..n)
        .map(|_| {
            let c = &centers[rng.random_range(0..centers.len())];
            c.iter().map(|v| v + rng.random_range(-1.5..1.5)).collect()
        })
        .collect()
}

#[test]
fn training_containment() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut datasets, mut rejected) = (0, 0usize);
    while datasets < 100 {
        let n = rng.random_range(1..=500);
        let d = rng.random_range(1..=16);
        let points = clustered_points(&mut rng, n, d);
        let ds = Dataset::from_points("t", Role::Train, "t", points).unwrap();
        let m = rng.random_range(1..=default_cluster_count(n).min(n));
        let model = kmeans_fit(&ds, &KMeansParams::new(m, rng.random())).unwrap();
        let monitor = fit_boxes(&ds, &model).unwrap();
        assert_eq!(monitor.delta(), 0.0);
        rejected += ds
            .points()
            .filter(|p| !monitor.contains(p).unwrap())
            .count();
        datasets += 1;
    }
    let elapsed = start.elapsed();
    report(
        "training containment",
        rejected == 0 && elapsed < Duration::from_secs(10),
        format!("{rejected} rejected over {datasets} datasets in {elapsed:.2?} (limit 10s)"),
    );
}

#[test]
fn score_containment_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut mismatches = 0;
    for i in 0..10_000 {
        let monitor = random_monitor(&mut rng, 6, 8);
        let x = random_point(&mut rng, monitor.dim());
        let score = monitor.margin_score(&x).unwrap();
        // Every fourth triple sits exactly on or next to the decision boundary.
        let delta = match (i % 4, score.is_finite()) {
            (0, true) => score,
            (1, true) if score > 0.0 => f64::from_bits(score.to_bits() - 1),
            (2, true) => f64::from_bits(score.to_bits() + 1),
            _ => rng.random_range(0.0..6.0),
        };
        let inside = monitor.with_delta(delta).unwrap().contains(&x).unwrap();
        if inside != (score <= delta) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        "score/containment equivalence",
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("{mismatches} mismatches in 10000 triples, {elapsed:.2?} (limit 5s)"),
    );
}

#[test]
fn delta_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut flips = 0;
    for _ in 0..5_000 {
        let monitor = random_monitor(&mut rng, 6, 8);
        let x = random_point(&mut rng, monitor.dim());
        let mut deltas: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..6.0)).collect();
        deltas.push(0.0);
        deltas.sort_by(f64::total_cmp);
        let verdicts: Vec<bool> = deltas
            .iter()
            .map(|&d| monitor.with_delta(d).unwrap().contains(&x).unwrap())
            .collect();
        flips += verdicts.windows(2).filter(|w| w[0] && !w[1]).count();
    }
    report(
        "delta monotonicity",
        flips == 0,
        format!("{flips} accept->reject flips over 5000 monitor/point pairs"),
    );
}

/// Accept counts at the calibrated threshold and at the next smaller
/// observed score, for a distance-style score.
fn coverage(scores: &[f64], threshold: f64) -> (usize, Option<usize>) {
    let at = scores.iter().filter(|&&s| s <= threshold).count();
    let below = scores
        .iter()
        .copied()
        .filter(|&s| s < threshold)
        .max_by(f64::total_cmp);
    (
        at,
        below.map(|b| scores.iter().filter(|&&s| s <= b).count()),
    )
}

#[test]
fn calibration_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let mut checked = 0;
    for trial in 0..30 {
        let d = rng.random_range(2..6);
        let train = Dataset::from_points("t", Role::Train, "t", clustered_points(&mut rng, 200, d))
            .unwrap();
        let n_cal = rng.random_range(20..150);
        let calib = Dataset::from_points(
            "c",
            Role::Calibration,
            "c",
            clustered_points(&mut rng, n_cal, d),
        )
        .unwrap();
        let k = required_accepts(0.95, n_cal);
        assert_eq!(k, (0.95 * n_cal as f64 - 1e-9).ceil() as usize);

        let model = kmeans_fit(&train, &KMeansParams::new(4, trial)).unwrap();
        let bam = fit_boxes(&train, &model).unwrap();
        match calibrate_bam(&bam, &calib, 0.95) {
            Ok((cal, result)) => {
                let accepted = calib.points().filter(|p| cal.contains(p).unwrap()).count();
                let scores: Vec<f64> = calib
                    .points()
                    .map(|p| bam.margin_score(p).unwrap())
                    .collect();
                let (at, below) = coverage(&scores, result.threshold);
                let below_ok = below.is_none_or(|b| {
                    // Re-check the next smaller observed Δ with contains() itself.
                    let next = scores
                        .iter()
                        .copied()
                        .filter(|&s| s < result.threshold)
                        .max_by(f64::total_cmp)
                        .unwrap();
                    let via_contains = calib
                        .points()
                        .filter(|p| bam.with_delta(next).unwrap().contains(p).unwrap())
                        .count();
                    b < k && via_contains < k
                });
                if accepted < k || at != accepted || !below_ok {
                    failures.push(format!("bam trial {trial}"));
                }
            }
            Err(e) => failures.push(format!("bam trial {trial}: {e}")),
        }
        checked += 1;

        let maha = fit_mahalanobis(&train, DEFAULT_EPSILON_SCALE).unwrap();
        let (cal, result) = calibrate_mahalanobis(&maha, &calib, 0.95).unwrap();
        let accepted = calib.points().filter(|p| cal.accepts(p).unwrap()).count();
        let scores: Vec<f64> = calib.points().map(|p| maha.score(p).unwrap()).collect();
        let (_, below) = coverage(&scores, result.threshold);
        if accepted < k || below.is_some_and(|b| b >= k) {
            failures.push(format!("mahalanobis trial {trial}"));
        }

        let cos = fit_cosine(&train).unwrap();
        let (cal, result) = calibrate_cosine(&cos, &calib, 0.95).unwrap();
        let accepted = calib.points().filter(|p| cal.accepts(p).unwrap()).count();
        // Similarity: negate so that "next smaller threshold" means stricter.
        let scores: Vec<f64> = calib.points().map(|p| -cos.score(p).unwrap()).collect();
        let (_, below) = coverage(&scores, -result.threshold);
        if accepted < k || below.is_some_and(|b| b >= k) {
            failures.push(format!("cosine trial {trial}"));
        }
        checked += 2;
    }
    report(
        "calibration coverage",
        failures.is_empty(),
        format!("{checked} calibrations checked, failures: {failures:?}"),
    );
}

#[test]
fn kmeans_oracle() {
    let fixtures = kmeans_fixtures();
    let mut failures = Vec::new();
    for (idx, (points, m)) in fixtures.iter().enumerate() {
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        for seed in 0..3 {
            let model = kmeans_fit_points(&refs, &KMeansParams::new(*m, seed)).unwrap();
            if let Some(mv) = improving_move(points, &model.assignments, *m) {
                failures.push(format!("fixture {idx} seed {seed}: {mv:?}"));
            }
        }
    }
    let line = [vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
    let refs: Vec<&[f64]> = line.iter().map(Vec::as_slice).collect();
    let model = kmeans_fit_points(&refs, &KMeansParams::new(2, 0)).unwrap();
    let mut centroids: Vec<f64> = model.centroids.iter().map(|c| c[0]).collect();
    centroids.sort_by(f64::total_cmp);
    let exact = centroids == [0.5, 10.5]
        && model.inertia == 1.0
        && sse(&line, &model.assignments, 2) == 1.0;
    report(
        "k-means oracle",
        failures.is_empty() && exact,
        format!(
            "{} fixtures, {} non-optimal; {{0,1,10,11}} centroids {centroids:?} inertia {}",
            fixtures.len(),
            failures.len(),
            model.inertia
        ),
    );
}

#[test]
fn mahalanobis_sanity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let train =
        Dataset::from_points("t", Role::Train, "t", clustered_points(&mut rng, 100, 4)).unwrap();
    let fitted = fit_mahalanobis(&train, DEFAULT_EPSILON_SCALE).unwrap();
    let at_mean = fitted.score(fitted.mean()).unwrap();
    let identity = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let unit = MahalanobisMonitor::from_parts(vec![0.0, 0.0], identity, 1e-9, None).unwrap();
    let five = unit.score(&[3.0, 4.0]).unwrap();
    report(
        "mahalanobis sanity",
        at_mean == 0.0 && (five - 5.0).abs() <= 1e-6,
        format!("distance(mean) = {at_mean}, distance((3,4)) = {five}"),
    );
}

#[test]
fn synthetic_midgap_reproduction() {
    let start = Instant::now();
    let cfg = SynthConfig::reference();
    let data = generate_synthetic(&cfg).unwrap();
    let rate = |rejected: usize| rejected as f64 / data.ood_midgap.len() as f64;

    let model = kmeans_fit(&data.id_train, &KMeansParams::new(2, cfg.seed)).unwrap();
    let boxes = fit_boxes(&data.id_train, &model).unwrap();
    let (bam, _) = calibrate_bam(&boxes, &data.id_calib, 0.95).unwrap();
    let bam_rate = rate(
        data.ood_midgap
            .points()
            .filter(|p| !bam.contains(p).unwrap())
            .count(),
    );

    let maha = fit_mahalanobis(&data.id_train, DEFAULT_EPSILON_SCALE).unwrap();
    let (maha, _) = calibrate_mahalanobis(&maha, &data.id_calib, 0.95).unwrap();
    let maha_rate = rate(
        data.ood_midgap
            .points()
            .filter(|p| !maha.accepts(p).unwrap())
            .count(),
    );

    let elapsed = start.elapsed();
    report(
        "synthetic midgap reproduction",
        bam_rate >= 0.90 && maha_rate <= 0.50 && bam_rate > maha_rate && elapsed < Duration::from_secs(30),
        format!(
            "box rejects {:.1}% (>= 90%), mahalanobis rejects {:.1}% (<= 50%), {elapsed:.2?} (limit 30s)",
            100.0 * bam_rate,
            100.0 * maha_rate
        ),
    );
}

#[test]
fn eval_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bam");
    let data = dir.path().join("data");
    let synth = Command::new(bin)
        .args(["synth", "--out-dir"])
        .arg(&data)
        .status()
        .unwrap();
    assert!(synth.success());
    let config = data.join("run.toml");
    let mut outputs = Vec::new();
    for run in 0..2 {
        let mut files = Vec::new();
        for ext in ["md", "csv", "json"] {
            let out = dir.path().join(format!("report{run}.{ext}"));
            let status = Command::new(bin)
                .args(["eval", "--config"])
                .arg(&config)
                .arg("--out")
                .arg(&out)
                .status()
                .unwrap();
            assert!(status.success());
            files.push(fs::read(&out).unwrap());
        }
        outputs.push(files);
    }
    report(
        "eval determinism",
        outputs[0] == outputs[1],
        format!(
            "markdown/csv/json reports from two runs identical: {}",
            outputs[0] == outputs[1]
        ),
    );
}

/// Best-of-several wall time for checking every query against the monitor.
fn containment_time(monitor: &BamMonitor, queries: &[Vec<f64>]) -> Duration {
    (0..7)
        .map(|_| {
            let start = Instant::now();
            let accepted = queries
                .iter()
                .filter(|q| monitor.contains(q).unwrap())
                .count();
            assert_eq!(std::hint::black_box(accepted), 0);
            start.elapsed()
        })
        .min()
        .unwrap()
}

/// `m` copies of the unit box in `d` dimensions, and queries that sit
/// inside every box except along the last axis, so no check can stop early.
fn worst_case(m: usize, d: usize, n_queries: usize) -> (BamMonitor, Vec<Vec<f64>>) {
    let unit = ClusterBox {
        lower: vec![0.0; d],
        upper: vec![1.0; d],
        sigma: vec![0.25; d],
    };
    let monitor = BamMonitor::new(vec![unit; m], 1.0, EnlargementMode::Sigma).unwrap();
    let queries = (0..n_queries)
        .map(|i| {
            let mut q = vec![0.5; d];
            q[d - 1] = 2.0 + (i % 7) as f64;
            q
        })
        .collect();
    (monitor, queries)
}

#[test]
fn containment_scaling() {
    let n = 2_000;
    let (base_m, base_q) = worst_case(8, 8, n);
    let (wide_m, wide_q) = worst_case(80, 8, n);
    let (deep_m, deep_q) = worst_case(8, 80, n);
    let base = containment_time(&base_m, &base_q);
    let by_m = containment_time(&wide_m, &wide_q).as_secs_f64() / base.as_secs_f64();
    let by_d = containment_time(&deep_m, &deep_q).as_secs_f64() / base.as_secs_f64();
    report(
        "containment O(m*d) scaling",
        by_m <= 20.0 && by_d <= 20.0,
        format!("10x m -> {by_m:.1}x time, 10x d -> {by_d:.1}x time (limit 20x), base {base:.2?}"),
    );
}

#[test]
fn fitted_boxes_match_coordinatewise_extremes() {
    // Oracle for box fitting: bounds are per-cluster min/max and sigma the
    // population standard deviation, computed independently here.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let points = clustered_points(&mut rng, 120, 3);
    let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    let model = kmeans_fit_points(&refs, &KMeansParams::new(3, 9)).unwrap();
    let monitor = fit_boxes_points(&refs, &model).unwrap();
    let mut worst: f64 = 0.0;
    for (c, b) in monitor.boxes().iter().enumerate() {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(&model.assignments)
            .filter(|(_, &a)| a == c)
            .map(|(p, _)| p)
            .collect();
        for j in 0..3 {
            let col: Vec<f64> = members.iter().map(|p| p[j]).collect();
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert_eq!((b.lower[j], b.upper[j]), (lo, hi));
            worst = worst.max((b.sigma[j] - var.sqrt()).abs() / var.sqrt());
        }
    }
    report(
        "box fitting oracle",
        worst <= 1e-12,
        format!("max relative sigma error {worst:e}"),
    );
}
