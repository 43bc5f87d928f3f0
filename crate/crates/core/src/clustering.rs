//! Seeded k-means over a feature dataset.
//!
//! Initialization is k-means++. Lloyd iterations run until the relative
//! inertia improvement drops below `rel_tol` or `max_iter` is reached. A
//! polishing phase then alternates Lloyd steps with single-point transfer
//! moves until neither changes the partition, so the result is a local
//! optimum: no single point can move to another cluster and lower the
//! within-cluster sum of squares.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::Dataset;
use crate::rng;

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_REL_TOL: f64 = 1e-6;

const MAX_POLISH_ROUNDS: usize = 10_000;

/// `round(sqrt(n))`, at least 1.
pub fn default_cluster_count(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams {
    pub clusters: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl KMeansParams {
    pub fn new(clusters: usize, seed: u64) -> Self {
        Self {
            clusters,
            seed,
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

/// Result of a k-means fit.
///
/// Invariants: every cluster is non-empty, `assignments[i]` names a nearest
/// centroid of point `i` (lowest index on ties), and `centroids` are the
/// cluster means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each Lloyd step and polishing round. Non-increasing.
    pub inertia_trace: Vec<f64>,
    pub lloyd_iterations: usize,
    /// False only if polishing hit its round cap.
    pub converged: bool,
}

impl ClusterModel {
    pub fn m(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Index of the nearest centroid, lowest index on ties.
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                line: None,
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(nearest(&self.centroids, x).0)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.m()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

pub fn kmeans_fit(data: &Dataset, params: &KMeansParams) -> Result<ClusterModel> {
    let points: Vec<&[f64]> = data.points().collect();
    kmeans_fit_points(&points, params)
}

/// k-means over raw points. All points must share one dimension.
pub fn kmeans_fit_points(points: &[&[f64]], params: &KMeansParams) -> Result<ClusterModel> {
    let n = points.len();
    let m = params.clusters;
    if n == 0 {
        return Err(Error::EmptyDataset(String::from("k-means input")));
    }
    if m == 0 {
        return Err(Error::invalid("cluster count must be at least 1"));
    }
    if m > n {
        return Err(Error::TooFewPoints {
            needed: m,
            found: n,
        });
    }
    if params.max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if params.rel_tol.is_nan() || params.rel_tol <= 0.0 {
        return Err(Error::invalid("rel_tol must be positive"));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            line: None,
            expected: dim,
            found: p.len(),
        });
    }
    let distinct = distinct_count(points);
    if distinct < m {
        // Nearest-centroid assignment cannot give m non-empty clusters
        // when fewer than m distinct locations exist.
        return Err(Error::invalid(format!(
            "{m} clusters requested but only {distinct} distinct points"
        )));
    }

    let mut state = Lloyd {
        points,
        centroids: init_plus_plus(points, m, params.seed),
        assignments: vec![usize::MAX; n],
        trace: Vec::new(),
    };

    let mut lloyd_iterations = 0;
    let mut prev = f64::INFINITY;
    for _ in 0..params.max_iter {
        lloyd_iterations += 1;
        let changed = state.step();
        let cur = *state.trace.last().expect("step records inertia");
        let stalled = prev.is_finite() && (prev <= 0.0 || (prev - cur) / prev < params.rel_tol);
        prev = cur;
        if !changed || stalled {
            break;
        }
    }

    let mut converged = false;
    for _ in 0..MAX_POLISH_ROUNDS {
        if state.step() {
            continue;
        }
        if !state.transfer_pass() {
            converged = true;
            break;
        }
    }

    let inertia = sse(points, &state.centroids, &state.assignments);
    Ok(ClusterModel {
        centroids: state.centroids,
        assignments: state.assignments,
        inertia,
        inertia_trace: state.trace,
        lloyd_iterations,
        converged,
    })
}

struct Lloyd<'a> {
    points: &'a [&'a [f64]],
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    trace: Vec<f64>,
}

impl Lloyd<'_> {
    /// One assignment + repair + mean-update step. Returns whether any
    /// assignment changed.
    fn step(&mut self) -> bool {
        let m = self.centroids.len();
        let mut changed = false;
        let mut dist = vec![0.0; self.points.len()];
        for (i, p) in self.points.iter().enumerate() {
            let (best, d) = nearest(&self.centroids, p);
            if self.assignments[i] != best {
                self.assignments[i] = best;
                changed = true;
            }
            dist[i] = d;
        }

        let mut sizes = vec![0usize; m];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        // Empty clusters take the point farthest from its centroid.
        while let Some(empty) = sizes.iter().position(|&s| s == 0) {
            let far = (0..self.points.len())
                .filter(|&i| sizes[self.assignments[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                })
                .expect("m <= n leaves a cluster with more than one point");
            sizes[self.assignments[far]] -= 1;
            sizes[empty] = 1;
            self.assignments[far] = empty;
            self.centroids[empty] = self.points[far].to_vec();
            dist[far] = 0.0;
            changed = true;
        }

        self.centroids = means(self.points, &self.assignments, m);
        self.trace
            .push(sse(self.points, &self.centroids, &self.assignments));
        changed
    }

    /// Moves single points between clusters whenever that strictly lowers
    /// the sum of squares, using the exact change
    /// `nb/(nb+1)·|x−μb|² − na/(na−1)·|x−μa|²`. Returns whether any moved.
    fn transfer_pass(&mut self) -> bool {
        let m = self.centroids.len();
        let mut sizes = vec![0usize; m];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        let mut moved = false;
        for (i, p) in self.points.iter().enumerate() {
            let a = self.assignments[i];
            let na = sizes[a] as f64;
            if sizes[a] < 2 {
                continue;
            }
            let remove_gain = na / (na - 1.0) * sq_dist(p, &self.centroids[a]);
            let mut best: Option<(usize, f64)> = None;
            for b in (0..m).filter(|&b| b != a) {
                let nb = sizes[b] as f64;
                let add_cost = nb / (nb + 1.0) * sq_dist(p, &self.centroids[b]);
                if best.is_none_or(|(_, c)| add_cost < c) {
                    best = Some((b, add_cost));
                }
            }
            let Some((b, add_cost)) = best else { continue };
            if add_cost < remove_gain * (1.0 - 1e-12) {
                let nb = sizes[b] as f64;
                for (j, &x) in p.iter().enumerate() {
                    self.centroids[a][j] = (self.centroids[a][j] * na - x) / (na - 1.0);
                    self.centroids[b][j] = (self.centroids[b][j] * nb + x) / (nb + 1.0);
                }
                sizes[a] -= 1;
                sizes[b] += 1;
                self.assignments[i] = b;
                moved = true;
            }
        }
        if moved {
            self.centroids = means(self.points, &self.assignments, m);
            self.trace
                .push(sse(self.points, &self.centroids, &self.assignments));
        }
        moved
    }
}

fn init_plus_plus(points: &[&[f64]], m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng::stream_rng(seed, rng::KMEANS_STREAM);
    let n = points.len();
    let mut centroids = Vec::with_capacity(m);
    centroids.push(points[rng.random_range(0..n)].to_vec());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < m {
        let total: f64 = d2.iter().sum();
        // distinct_count >= m guarantees some point sits away from all centroids.
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let c = points[pick.expect("positive total weight")].to_vec();
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn means(points: &[&[f64]], assignments: &[usize], m: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; m];
    let mut counts = vec![0usize; m];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= c as f64;
        }
    }
    sums
}

fn sse(points: &[&[f64]], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

fn distinct_count(points: &[&[f64]]) -> usize {
    let mut keys: Vec<Vec<u64>> = points
        .iter()
        // +0.0 folds -0.0 so equal coordinates compare equal bitwise.
        .map(|p| p.iter().map(|x| (x + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}
