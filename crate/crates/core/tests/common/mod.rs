use featurenull::corpus::{FeatureRecord, FeatureStore};
use featurenull::orb::{BriefPattern, OrbParams, PATTERN_SEED};
use featurenull::pipeline::{train_from_store, TrainConfig};
use featurenull::synth::Kind;
use featurenull::{reduce_descriptor, DensityModel, OrbExtractor};

/// A small model trained on a few synthetic images of each kind.
pub fn small_model(n_levels: usize) -> DensityModel {
    let params = OrbParams {
        n_levels,
        ..OrbParams::default()
    };
    let ex = OrbExtractor::new(
        params,
        BriefPattern::generate(PATTERN_SEED, params.patch_radius),
    )
    .unwrap();
    let mut records = Vec::new();
    for (k, kind) in Kind::ALL.iter().enumerate() {
        for i in 0..4u64 {
            let img = kind.render(96, 96, 100 * k as u64 + i);
            for (_, d) in ex.top_keypoints(&img, 200) {
                records.push(FeatureRecord {
                    image_index: (4 * k as u64 + i) as u32,
                    reduced: reduce_descriptor(&d),
                });
            }
        }
    }
    let cfg = TrainConfig {
        clusters: 12,
        orb: params,
        ..TrainConfig::default()
    };
    train_from_store(&FeatureStore { records }, ex, &cfg)
        .unwrap()
        .0
}
