//! Null model of scientific-image features.
//!
//! The pipeline extracts oriented FAST / steered BRIEF features from a corpus
//! ([`orb`]), collapses each 256-bit descriptor into 16 popcounts
//! ([`reduce`]), clusters the result with k-means ([`cluster`]) and turns the
//! clustering into a mixture of independent categoricals ([`density`]).
//! The fitted model assigns a log probability to any feature, which
//! [`probmap`] evaluates across an image and [`stats`] compares between
//! groups of images.

// `!(x > y)` is deliberate in range checks: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod corpus;
pub mod density;
pub mod error;
pub mod gray;
pub mod orb;
pub mod pipeline;
pub mod probmap;
pub mod reduce;
pub mod stats;
pub mod synth;

pub use cluster::{assign, kmeans, kmeans_pp_seed, kmeans_restarts, lloyd, Centroid, Clustering};
pub use corpus::{
    extract_corpus, sample_features, scan_corpus, CorpusManifest, FeatureRecord, FeatureStore,
    ManifestEntry, ScanReport,
};
pub use density::{fit, load_model, log_sum_exp, save_model, DensityModel, FitOptions};
pub use error::{Error, Result};
pub use gray::{load_grayscale, GrayImage};
pub use orb::{BriefPattern, Descriptor256, Keypoint, OrbExtractor, OrbParams, Pyramid};
pub use probmap::{interpolate, mean_log_prob, render_heatmap, score_grid, ProbabilityMap};
pub use reduce::{correlation_experiment, hamming, reduce_descriptor, sq_euclidean, ReducedVec};
pub use stats::{pearson, welch_t_test, TestResult};
