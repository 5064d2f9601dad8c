//! Run configuration: built-in defaults, optionally overlaid by a TOML file,
//! then by command-line flags.

use std::path::Path;

use clap::Args;
use featurenull::orb::{OrbParams, N_LEVELS, SCALE_FACTOR};
use featurenull::pipeline::{TrainConfig, DEFAULT_CLUSTERS, DEFAULT_SEED};
use featurenull::probmap::DEFAULT_STRIDE;
use serde::Deserialize;

use crate::exit::{CliResult, Failure};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub clusters: usize,
    pub sample_fraction: f64,
    pub seed: u64,
    pub restarts: usize,
    pub max_keypoints: usize,
    pub stride: usize,
    pub levels: usize,
    pub scale_factor: f64,
    pub fast_threshold: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            clusters: DEFAULT_CLUSTERS,
            sample_fraction: 1.0,
            seed: DEFAULT_SEED,
            restarts: 1,
            max_keypoints: featurenull::corpus::DEFAULT_MAX_KEYPOINTS,
            stride: DEFAULT_STRIDE,
            levels: N_LEVELS,
            scale_factor: SCALE_FACTOR,
            fast_threshold: featurenull::orb::fast::DEFAULT_THRESHOLD,
        }
    }
}

/// Every field optional, shared by the TOML file and the flags.
#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Number of k-means clusters [default: 2000]
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Fraction of extracted features kept for clustering [default: 1.0]
    #[arg(long)]
    pub sample_fraction: Option<f64>,
    /// Random seed for sampling and clustering [default: 20190601]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent k-means++ runs, keeping the lowest inertia [default: 1]
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Keypoints kept per image [default: 500]
    #[arg(long)]
    pub max_keypoints: Option<usize>,
    /// Grid spacing in pixels for scoring [default: 3]
    #[arg(long)]
    pub stride: Option<usize>,
    /// Pyramid levels [default: 8]
    #[arg(long)]
    pub levels: Option<usize>,
    /// Pyramid scale factor between levels [default: 1.2]
    #[arg(long)]
    pub scale_factor: Option<f64>,
    /// FAST intensity threshold [default: 20]
    #[arg(long)]
    pub fast_threshold: Option<u8>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = o.$f { self.$f = v; })* };
        }
        set!(
            clusters,
            sample_fraction,
            seed,
            restarts,
            max_keypoints,
            stride,
            levels,
            scale_factor,
            fast_threshold
        );
    }

    /// Defaults, then `file` if given, then `flags`.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> CliResult<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            let from_file: Overrides = toml::from_str(&text)
                .map_err(|e| Failure::usage(format!("bad config {}: {e}", path.display())))?;
            cfg.apply(&from_file);
        }
        cfg.apply(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult {
        if self.clusters == 0 {
            return Err(Failure::usage("--clusters must be at least 1"));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Failure::usage(format!(
                "--sample-fraction must be in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        if self.max_keypoints == 0 || self.stride == 0 || self.levels == 0 || self.restarts == 0 {
            return Err(Failure::usage(
                "--max-keypoints, --stride, --levels and --restarts must be at least 1",
            ));
        }
        if !(self.scale_factor > 1.0) {
            return Err(Failure::usage("--scale-factor must be greater than 1"));
        }
        if self.fast_threshold == 0 {
            return Err(Failure::usage("--fast-threshold must be in 1..=255"));
        }
        Ok(())
    }

    pub fn orb(&self) -> OrbParams {
        OrbParams {
            n_levels: self.levels,
            scale_factor: self.scale_factor,
            fast_threshold: self.fast_threshold,
            ..OrbParams::default()
        }
    }

    pub fn train_config(&self, created: i64) -> TrainConfig {
        TrainConfig {
            clusters: self.clusters,
            sample_fraction: self.sample_fraction,
            seed: self.seed,
            restarts: self.restarts,
            max_keypoints: self.max_keypoints,
            orb: self.orb(),
            created,
            ..TrainConfig::default()
        }
    }
}
