//! Out-of-distribution monitors over feature vectors.
//!
//! The main monitor clusters in-distribution features with k-means, encloses
//! each cluster in an axis-aligned box and accepts a query iff it falls
//! inside at least one box widened by `delta` standard deviations. Two
//! score-based monitors serve as baselines: Mahalanobis distance to a
//! single fitted Gaussian and cosine similarity to the mean feature.
//!
//! Thresholds (`delta` for boxes, `τ` for the baselines) are calibrated on
//! ID-only data to a target ID accept rate, by default 95%.
//!
//! ```
//! use lora_bam::{bam, calibration, clustering, feature_store::{Dataset, Role}};
//!
//! let pts = vec![vec![0.0, 0.0], vec![0.2, 0.1], vec![10.0, 0.0], vec![10.1, 0.3]];
//! let train = Dataset::from_points("train", Role::Train, "q", pts).unwrap();
//! let model = clustering::kmeans_fit(&train, &clustering::KMeansParams::new(2, 7)).unwrap();
//! let monitor = bam::fit_boxes(&train, &model).unwrap();
//! let (monitor, _) = calibration::calibrate_bam(&monitor, &train, 0.95).unwrap();
//!
//! assert!(monitor.contains(&[0.1, 0.05]).unwrap());
//! assert!(!monitor.contains(&[5.0, 0.1]).unwrap());
//! ```

pub mod bam;
pub mod baselines;
pub mod calibration;
pub mod clustering;
pub mod error;
pub mod eval;
pub mod feature_store;
pub mod monitor;
pub mod rng;

pub use error::{Error, ErrorClass, Result};
