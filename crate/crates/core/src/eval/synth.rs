//! Two isotropic Gaussian clusters with OoD samples drawn at their midpoint.
//! The midpoint sits inside the single ellipsoid a Gaussian fit produces,
//! but outside both per-cluster boxes.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::{split_dataset, Dataset, FeatureVector, Role};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dim: usize,
    pub cluster_centers: [Vec<f64>; 2],
    pub cluster_std: f64,
    pub n_per_cluster: usize,
    pub n_ood_midgap: usize,
    pub seed: u64,
    pub calib_fraction: f64,
}

impl SynthConfig {
    /// Centers at the origin and at `separation` along the first axis.
    pub fn two_clusters(
        dim: usize,
        separation: f64,
        std: f64,
        n_per_cluster: usize,
        n_midgap: usize,
        seed: u64,
    ) -> Self {
        let mut far = vec![0.0; dim];
        if let Some(first) = far.first_mut() {
            *first = separation;
        }
        Self {
            dim,
            cluster_centers: [vec![0.0; dim], far],
            cluster_std: std,
            n_per_cluster,
            n_ood_midgap: n_midgap,
            seed,
            calib_fraction: 0.2,
        }
    }

    /// d = 8, separation 10, std 0.3, 200 points per cluster, 200 midgap
    /// points, seed 42.
    pub fn reference() -> Self {
        Self::two_clusters(8, 10.0, 0.3, 200, 200, 42)
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("synthetic dim must be at least 1"));
        }
        for c in &self.cluster_centers {
            if c.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    line: None,
                    expected: self.dim,
                    found: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("cluster centers must be finite"));
            }
        }
        if self.cluster_centers[0] == self.cluster_centers[1] {
            return Err(Error::invalid("cluster centers must be distinct"));
        }
        if !(self.cluster_std > 0.0 && self.cluster_std.is_finite()) {
            return Err(Error::invalid("cluster std must be positive"));
        }
        if self.n_per_cluster == 0 || self.n_ood_midgap == 0 {
            return Err(Error::invalid("sample counts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub id_train: Dataset,
    pub id_calib: Dataset,
    pub ood_midgap: Dataset,
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = rng::stream_rng(cfg.seed, rng::SYNTH_STREAM);
    let noise = Normal::new(0.0, cfg.cluster_std).map_err(|e| Error::invalid(e.to_string()))?;
    let midpoint: Vec<f64> = cfg.cluster_centers[0]
        .iter()
        .zip(&cfg.cluster_centers[1])
        .map(|(a, b)| (a + b) / 2.0)
        .collect();

    let mut draw = |center: &[f64], tag: &str, n: usize| -> Vec<FeatureVector> {
        (0..n)
            .map(|i| {
                let v = center.iter().map(|c| c + noise.sample(&mut rng)).collect();
                FeatureVector::new(format!("{tag}-{i:05}"), v).with_meta("source", tag)
            })
            .collect()
    };
    let mut id = draw(&cfg.cluster_centers[0], "a", cfg.n_per_cluster);
    id.extend(draw(&cfg.cluster_centers[1], "b", cfg.n_per_cluster));
    let midgap = draw(&midpoint, "mid", cfg.n_ood_midgap);

    let id = Dataset::new("id", Role::Train, id)?;
    let (train, calib) = split_dataset(&id, cfg.calib_fraction, cfg.seed)?;
    Ok(SynthData {
        id_train: train.with_name("id_train"),
        id_calib: calib.with_name("id_calib"),
        ood_midgap: Dataset::new("ood_midgap", Role::Test, midgap)?,
    })
}
