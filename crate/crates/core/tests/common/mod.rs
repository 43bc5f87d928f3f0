//! Oracles and fixture generators shared by the integration tests.
#![allow(dead_code)]

use lora_bam::bam::{BamMonitor, ClusterBox, EnlargementMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sum of squared distances to cluster means, recomputed from scratch.
pub fn sse(points: &[Vec<f64>], labels: &[usize], m: usize) -> f64 {
    let d = points[0].len();
    let mut sums = vec![vec![0.0; d]; m];
    let mut counts = vec![0usize; m];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for j in 0..d {
            sums[l][j] += p[j];
        }
    }
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| {
            (0..d)
                .map(|j| {
                    let diff = p[j] - sums[l][j] / counts[l] as f64;
                    diff * diff
                })
                .sum::<f64>()
        })
        .sum()
}

/// Best inertia over every partition of `points` into `m` non-empty clusters.
pub fn brute_force_optimum(points: &[Vec<f64>], m: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut seen = vec![false; m];
        labels.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            best = best.min(sse(points, &labels, m));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < m {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

/// A single-point move that strictly lowers the inertia, if one exists.
/// Moves that would empty a cluster are not considered.
pub fn improving_move(
    points: &[Vec<f64>],
    labels: &[usize],
    m: usize,
) -> Option<(usize, usize, f64, f64)> {
    let base = sse(points, labels, m);
    let mut sizes = vec![0usize; m];
    labels.iter().for_each(|&l| sizes[l] += 1);
    for i in 0..points.len() {
        if sizes[labels[i]] < 2 {
            continue;
        }
        for to in (0..m).filter(|&c| c != labels[i]) {
            let mut moved = labels.to_vec();
            moved[i] = to;
            let after = sse(points, &moved, m);
            if after < base - 1e-9 * base.max(1.0) {
                return Some((i, to, base, after));
            }
        }
    }
    None
}

/// The fixed k-means fixture set: small datasets of distinct points.
pub fn kmeans_fixtures() -> Vec<(Vec<Vec<f64>>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0C1A_55E5);
    let mut out = Vec::new();
    for n in 1..=8usize {
        for d in 1..=3usize {
            for m in 1..=3usize.min(n) {
                for variant in 0..4 {
                    let points = loop {
                        let pts: Vec<Vec<f64>> = (0..n)
                            .map(|_| {
                                (0..d)
                                    .map(|_| match variant {
                                        // Integer grid: plenty of equal distances.
                                        0 => rng.random_range(0..12) as f64,
                                        // Two well separated clumps.
                                        1 => {
                                            rng.random_range(-1.0..1.0)
                                                + if rng.random_bool(0.5) { 20.0 } else { 0.0 }
                                        }
                                        _ => rng.random_range(-10.0..10.0),
                                    })
                                    .collect()
                            })
                            .collect();
                        let mut sorted = pts.clone();
                        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        sorted.dedup();
                        if sorted.len() == n {
                            break pts;
                        }
                    };
                    out.push((points, m));
                }
            }
        }
    }
    out.push((vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]], 2));
    out
}

/// A random box monitor with up to `max_m` boxes in up to `max_d` dimensions.
pub fn random_monitor(rng: &mut impl Rng, max_m: usize, max_d: usize) -> BamMonitor {
    let d = rng.random_range(1..=max_d);
    let m = rng.random_range(1..=max_m);
    let boxes = (0..m)
        .map(|_| {
            let mut b = ClusterBox {
                lower: vec![],
                upper: vec![],
                sigma: vec![],
            };
            for _ in 0..d {
                let lo = rng.random_range(-10.0..10.0);
                let zero = rng.random_bool(0.15);
                b.lower.push(lo);
                b.upper.push(if zero {
                    lo
                } else {
                    lo + rng.random_range(0.0..5.0)
                });
                b.sigma.push(if zero {
                    0.0
                } else {
                    rng.random_range(0.01..2.0)
                });
            }
            b
        })
        .collect();
    let mode = if rng.random_bool(0.5) {
        EnlargementMode::Sigma
    } else {
        EnlargementMode::Ratio
    };
    BamMonitor::new(boxes, 0.0, mode).unwrap()
}

pub fn random_point(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-20.0..20.0)).collect()
}
