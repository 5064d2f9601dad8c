//! End-to-end training and scoring, shared by the CLI and the tests.

use std::path::Path;

use log::info;

use crate::cluster::{self, distinct_count, Clustering};
use crate::corpus::{extract_corpus, sample_features, FeatureStore, ScanReport};
use crate::density::{fit, DensityModel, FitOptions};
use crate::error::{Error, Result};
use crate::gray::GrayImage;
use crate::orb::{BriefPattern, OrbExtractor, OrbParams, PATTERN_SEED};
use crate::probmap::{auto_mask, interpolate, mean_log_prob, score_grid, ProbabilityMap};

pub const DEFAULT_CLUSTERS: usize = 2000;
pub const DEFAULT_SEED: u64 = 20190601;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub clusters: usize,
    pub sample_fraction: f64,
    pub seed: u64,
    pub max_keypoints: usize,
    pub orb: OrbParams,
    /// Independent k-means++ runs; the lowest inertia wins.
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Timestamp recorded in the model header.
    pub created: i64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            clusters: DEFAULT_CLUSTERS,
            sample_fraction: 1.0,
            seed: DEFAULT_SEED,
            max_keypoints: crate::corpus::DEFAULT_MAX_KEYPOINTS,
            orb: OrbParams::default(),
            restarts: 1,
            max_iter: cluster::DEFAULT_MAX_ITER,
            tol: cluster::DEFAULT_TOL,
            created: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DensityModel,
    pub clustering: Clustering,
    pub scan: ScanReport,
    pub extracted: usize,
    pub sampled: usize,
}

/// Train from features already extracted and reduced.
pub fn train_from_store(
    store: &FeatureStore,
    extractor: OrbExtractor,
    cfg: &TrainConfig,
) -> Result<(DensityModel, Clustering, usize)> {
    let sampled = sample_features(store, cfg.sample_fraction, cfg.seed)?;
    let data = sampled.vectors();
    let distinct = distinct_count(&data);
    if cfg.clusters > distinct {
        return Err(Error::TooFewPoints {
            k: cfg.clusters,
            distinct,
        });
    }
    info!(
        "clustering {} vectors ({} distinct) into {} clusters",
        data.len(),
        distinct,
        cfg.clusters
    );
    let clustering = cluster::kmeans_restarts(
        &data,
        cfg.clusters,
        cfg.seed.wrapping_add(1),
        cfg.restarts,
        cfg.max_iter,
        cfg.tol,
    )?;
    info!(
        "k-means finished after {} iterations, inertia {}",
        clustering.iterations, clustering.inertia
    );
    let model = fit(
        &data,
        &clustering,
        extractor,
        FitOptions {
            tolerate_empty: false,
            created: cfg.created,
        },
    )?;
    Ok((model, clustering, data.len()))
}

/// Scan `corpus`, extract the top ORB features of every image, reduce,
/// subsample, cluster and fit the null model.
pub fn train(corpus: &Path, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let extractor = OrbExtractor::new(
        cfg.orb,
        BriefPattern::generate(PATTERN_SEED, cfg.orb.patch_radius),
    )?;
    let (scan, store) = extract_corpus(corpus, &extractor, cfg.max_keypoints)?;
    info!(
        "extracted {} features from {} images ({} skipped)",
        store.count(),
        scan.manifest.total_images,
        scan.skipped.len()
    );
    let extracted = store.count();
    let (model, clustering, sampled) = train_from_store(&store, extractor, cfg)?;
    Ok(TrainOutcome {
        model,
        clustering,
        scan,
        extracted,
        sampled,
    })
}

/// Grid-score an image, interpolate, and return the map with its mean
/// log probability.
pub fn score_image(
    model: &DensityModel,
    img: &GrayImage,
    stride: usize,
    use_auto_mask: bool,
) -> Result<(ProbabilityMap, f64)> {
    let mask = use_auto_mask.then(|| auto_mask(img));
    let map = score_grid(model, img, stride, mask)?;
    let mean = mean_log_prob(&map)?;
    Ok((interpolate(&map), mean))
}
