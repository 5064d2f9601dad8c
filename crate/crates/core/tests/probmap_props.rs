//! Probability-map consistency on real scores from a small model.

mod common;

use featurenull::probmap::{default_range, AUTO_MASK_MIN_REGION};
use featurenull::synth;
use featurenull::{interpolate, mean_log_prob, reduce_descriptor, render_heatmap, score_grid};
use featurenull::{Error, GrayImage, ProbabilityMap};

#[test]
fn dense_map_equals_grid_at_samples() {
    let model = common::small_model(8);
    let img = synth::blobs(80, 70, 4);
    let grid = score_grid(&model, &img, 3, None).unwrap();
    let dense = interpolate(&grid);
    for v in 0..grid.grid_height() {
        for u in 0..grid.grid_width() {
            let g = grid.grid_value(u, v);
            let d = dense.dense_value(3 * u, 3 * v).unwrap();
            assert!(
                g.to_bits() == d.to_bits() || (g.is_nan() && d.is_nan()),
                "({u},{v})"
            );
        }
    }
    assert!(dense.dense_values().unwrap().iter().any(|v| v.is_finite()));
}

#[test]
fn constant_image_gives_constant_map() {
    let model = common::small_model(8);
    let img = GrayImage::filled(64, 64, 77);
    let grid = score_grid(&model, &img, 3, None).unwrap();
    let finite: Vec<f64> = grid
        .grid_values()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    assert!(!finite.is_empty());
    assert!(finite.iter().all(|&v| v == finite[0]));
    // border pixels with no computable neighbour stay NaN
    let dense = interpolate(&grid);
    let values = dense.dense_values().unwrap();
    assert!(values.iter().all(|&v| v == finite[0] || v.is_nan()));
    assert_eq!(dense.dense_value(32, 32), Some(finite[0]));
    assert_eq!(mean_log_prob(&grid).unwrap(), finite[0]);
    // the midpoint of the default range renders white, NaN renders black
    let (lo, hi) = default_range(&dense).unwrap();
    let rgb = render_heatmap(&dense, lo, hi, None).unwrap();
    for (p, v) in rgb.pixels().zip(values) {
        assert_eq!(
            p.0,
            if v.is_nan() {
                [0, 0, 0]
            } else {
                [255, 255, 255]
            }
        );
    }
}

#[test]
fn coarse_stride_values_are_a_subset() {
    let model = common::small_model(8);
    let img = synth::text(90, 75, 2);
    let fine = score_grid(&model, &img, 3, None).unwrap();
    let coarse = score_grid(&model, &img, 6, None).unwrap();
    for v in 0..coarse.grid_height() {
        for u in 0..coarse.grid_width() {
            let (a, b) = (coarse.grid_value(u, v), fine.grid_value(2 * u, 2 * v));
            assert!(a.to_bits() == b.to_bits(), "({u},{v}): {a} vs {b}");
        }
    }
}

#[test]
fn stride_as_wide_as_image_matches_direct_scoring() {
    let model = common::small_model(8);
    let img = synth::noise_texture(70, 70, 9);
    // the only sample, (0, 0), has no room for a patch at any level
    assert!(matches!(
        score_grid(&model, &img, 70, None),
        Err(Error::NoValidPoints(_))
    ));
    let map = score_grid(&model, &img, 35, None).unwrap();
    let ex = model.extractor();
    let pyr = ex.pyramid(&img).unwrap();
    let (d, _) = ex.descriptor_at_point(&pyr, 35.0, 35.0).unwrap();
    let want = model.log_prob(&reduce_descriptor(&d).0).unwrap();
    assert_eq!(map.grid_value(1, 1), want);
}

#[test]
fn translation_by_whole_strides_on_periodic_texture() {
    // one pyramid level, so a shift of the image is a shift of every sample
    let model = common::small_model(1);
    let tile = synth::noise_texture(12, 12, 5);
    let periodic = |dx: usize| GrayImage::from_fn(96, 96, |x, y| tile.get((x + dx) % 12, y % 12));
    let a = score_grid(&model, &periodic(0), 3, None).unwrap();
    let b = score_grid(&model, &periodic(6), 3, None).unwrap();
    // samples whose patch and smoothing window stay clear of the border
    let interior = |u: usize| (6..=23).contains(&u);
    let mut vals_a = Vec::new();
    let mut vals_b = Vec::new();
    for v in 6..=23 {
        for u in 6..=21 {
            assert!(interior(u + 2));
            assert_eq!(b.grid_value(u, v), a.grid_value(u + 2, v));
            vals_a.push(a.grid_value(u, v));
            vals_b.push(b.grid_value(u, v));
        }
    }
    // the window spans exactly four periods of 4 grid steps
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(vals_a.iter().all(|v| v.is_finite()));
    assert!((mean(&vals_a) - mean(&vals_b)).abs() < 1e-9 * mean(&vals_a).abs());
}

#[test]
fn masked_points_are_nan_and_all_masked_is_an_error() {
    let model = common::small_model(8);
    let img = synth::blobs(64, 64, 1);
    let mut mask = vec![true; 64 * 64];
    mask[30 * 64 + 30] = false;
    let map = score_grid(&model, &img, 3, Some(mask)).unwrap();
    assert!(map.grid_value(10, 10).is_nan());
    assert!(map.grid_value(11, 10).is_finite());
    let map = score_grid(&model, &img, 3, Some(vec![false; 64 * 64])).unwrap();
    assert!(matches!(mean_log_prob(&map), Err(Error::NoValidPoints(_))));
}

#[test]
fn auto_mask_hides_black_regions_only() {
    let img = GrayImage::from_fn(64, 64, |x, y| {
        if x < 32 {
            0
        } else {
            ((x * 7 + y * 13) % 251) as u8
        }
    });
    let mask = featurenull::probmap::auto_mask(&img);
    assert!(!mask[10 * 64 + 10]);
    assert!(mask[10 * 64 + 40] || img.get(40, 10) == 0);
    const { assert!(32 * 64 >= AUTO_MASK_MIN_REGION) };
}

#[test]
fn too_small_image_has_no_valid_points() {
    let model = common::small_model(8);
    let img = GrayImage::filled(20, 40, 5);
    assert!(matches!(
        score_grid(&model, &img, 3, None),
        Err(Error::NoValidPoints(_))
    ));
}

#[test]
fn raw_export_round_trip() {
    let map =
        ProbabilityMap::from_grid(7, 4, 3, vec![-1.0, -2.5, f64::NAN, -4.0, -5.0, -6.0], None)
            .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.f64");
    map.write_raw(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 6 * 8);
    let back: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assert_eq!(back[1], -2.5);
    assert!(back[2].is_nan());
    let side: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("grid.f64.json")).unwrap()).unwrap();
    assert_eq!(side["grid_width"], 3);
    assert_eq!(side["stride"], 3);
    let mut csv = Vec::new();
    map.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("x,y,ln_p\n0,0,-1\n3,0,-2.5\n"));
}
