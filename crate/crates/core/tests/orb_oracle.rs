//! ORB checked against naive re-implementations: the segment test, the
//! BRIEF tests and the keypoint ranking.

use std::f64::consts::TAU;

use featurenull::orb::{
    brief_descriptor, detect_fast, harris_response, orientation, BriefPattern, N_TEMPLATES,
};
use featurenull::synth;
use featurenull::{hamming, Descriptor256, GrayImage, OrbExtractor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Radius-3 circle, generated from the angle instead of a table.
fn circle() -> Vec<(isize, isize)> {
    let mut pts: Vec<(isize, isize)> = Vec::new();
    for dy in -3isize..=3 {
        for dx in -3isize..=3 {
            let r2 = dx * dx + dy * dy;
            if (9..=10).contains(&r2) || (r2 == 8) {
                pts.push((dx, dy));
            }
        }
    }
    // clockwise from 12 o'clock with y pointing down
    pts.sort_by(|a, b| {
        let ang = |p: &(isize, isize)| (p.0 as f64).atan2(-(p.1 as f64)).rem_euclid(TAU);
        ang(a).total_cmp(&ang(b))
    });
    assert_eq!(pts.len(), 16);
    pts
}

fn passes(img: &GrayImage, x: usize, y: usize, t: i32, circ: &[(isize, isize)]) -> bool {
    let c = img.get(x, y) as i32;
    let v: Vec<i32> = circ
        .iter()
        .map(|&(dx, dy)| img.get((x as isize + dx) as usize, (y as isize + dy) as usize) as i32)
        .collect();
    (0..16)
        .any(|s| (0..9).all(|k| v[(s + k) % 16] > c + t) || (0..9).all(|k| v[(s + k) % 16] < c - t))
}

/// Segment test plus NMS, with the score found by scanning thresholds.
fn fast_oracle(img: &GrayImage, t: u8) -> Vec<(usize, usize)> {
    let circ = circle();
    let (w, h) = (img.width(), img.height());
    let mut score = vec![-1i32; w * h];
    for y in 3..h.saturating_sub(3) {
        for x in 3..w.saturating_sub(3) {
            if passes(img, x, y, t as i32, &circ) {
                score[y * w + x] = (0..=255)
                    .filter(|&s| passes(img, x, y, s, &circ))
                    .max()
                    .unwrap();
            }
        }
    }
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let s = score[y * w + x];
            if s < 0 {
                continue;
            }
            let mut keep = true;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if (nx, ny) == (x, y) {
                        continue;
                    }
                    if score[ny * w + nx] > s {
                        keep = false;
                    }
                }
            }
            if keep {
                out.push((x, y));
            }
        }
    }
    out
}

fn fixtures() -> Vec<(String, GrayImage)> {
    let mut v = Vec::new();
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        v.push((
            format!("noise{seed}"),
            GrayImage::from_fn(64, 64, |_, _| rng.random()),
        ));
    }
    v.push(("spots".into(), synth::noise_texture(64, 64, 7)));
    v.push(("blobs".into(), synth::blobs(64, 48, 7)));
    v.push(("text".into(), synth::text(64, 64, 7)));
    v.push((
        "checker".into(),
        GrayImage::from_fn(
            64,
            64,
            |x, y| if (x / 5 + y / 5) % 2 == 0 { 30 } else { 220 },
        ),
    ));
    v.push((
        "square".into(),
        GrayImage::from_fn(21, 21, |x, y| {
            if (8..13).contains(&x) && (8..13).contains(&y) {
                255
            } else {
                0
            }
        }),
    ));
    v.push(("flat".into(), GrayImage::filled(16, 16, 90)));
    v.push(("tiny".into(), GrayImage::filled(6, 6, 90)));
    v
}

#[test]
fn detect_fast_matches_brute_force() {
    for (name, img) in fixtures() {
        for t in [1u8, 10, 20, 50] {
            assert_eq!(detect_fast(&img, t), fast_oracle(&img, t), "{name} t={t}");
        }
    }
}

#[test]
fn square_corners_and_negative() {
    let img = GrayImage::from_fn(21, 21, |x, y| {
        if (8..13).contains(&x) && (8..13).contains(&y) {
            255
        } else {
            0
        }
    });
    let corners = detect_fast(&img, 20);
    for c in [(8, 8), (12, 8), (8, 12), (12, 12)] {
        assert!(corners.contains(&c), "{c:?} missing from {corners:?}");
    }
    // swapping light and dark turns bright arcs into dark ones
    assert_eq!(detect_fast(&img.inverted(), 20), corners);
}

#[test]
fn pattern_is_gaussian_around_centre() {
    let p = BriefPattern::default_pattern();
    let coords: Vec<f64> = p
        .pairs()
        .iter()
        .flat_map(|q| q.iter().map(|&v| v as f64))
        .collect();
    let mean = coords.iter().sum::<f64>() / coords.len() as f64;
    let sd = (coords.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / coords.len() as f64).sqrt();
    assert!(mean.abs() < 0.6, "mean {mean}");
    // 31/5 = 6.2 before truncation to the disc
    assert!((5.0..6.4).contains(&sd), "sd {sd}");
}

/// Box 5x5 mean with replicated borders, rounded half up.
fn smooth(img: &GrayImage) -> GrayImage {
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let mut s = 0u32;
        for dy in -2..=2 {
            for dx in -2..=2 {
                s += img.get_clamped(x as isize + dx, y as isize + dy) as u32;
            }
        }
        ((s + 12) / 25) as u8
    })
}

#[test]
fn descriptor_bits_match_direct_tests() {
    let ex = OrbExtractor::default();
    let pattern = ex.pattern();
    for seed in 0..3 {
        let img = synth::noise_texture(96, 96, seed);
        let pyr = ex.pyramid(&img).unwrap();
        assert_eq!(pyr.smoothed(0), &smooth(&img));
        let sm = smooth(&img);
        for (kp, d) in ex.top_keypoints(&img, 40) {
            if kp.level != 0 {
                continue;
            }
            let (cx, cy) = (kp.x as isize, kp.y as isize);
            let t = ((kp.angle / (TAU / N_TEMPLATES as f64)).round() as usize) % N_TEMPLATES;
            let a = TAU * t as f64 / N_TEMPLATES as f64;
            let rot = |x: i8, y: i8| {
                let (x, y) = (x as f64, y as f64);
                (
                    (x * a.cos() - y * a.sin()).round() as isize,
                    (x * a.sin() + y * a.cos()).round() as isize,
                )
            };
            for (i, q) in pattern.pairs().iter().enumerate() {
                let (x1, y1) = rot(q[0], q[1]);
                let (x2, y2) = rot(q[2], q[3]);
                let i1 = sm.get((cx + x1) as usize, (cy + y1) as usize);
                let i2 = sm.get((cx + x2) as usize, (cy + y2) as usize);
                assert_eq!(d.bit(i), i1 < i2, "seed {seed} bit {i} at {cx},{cy}");
            }
        }
    }
}

#[test]
fn top_keypoints_follow_harris_ranking() {
    let ex = OrbExtractor::default();
    let img = synth::blobs(120, 100, 3);
    let pyr = ex.pyramid(&img).unwrap();
    let mut cands = Vec::new();
    for l in 0..pyr.n_levels() {
        let lvl = pyr.level(l);
        for (x, y) in fast_oracle(lvl, 20) {
            if x < 15 || y < 15 || x + 15 >= lvl.width() || y + 15 >= lvl.height() {
                continue;
            }
            cands.push((harris_response(lvl, x, y).unwrap(), l, x, y));
        }
    }
    cands.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then((a.1, a.3, a.2).cmp(&(b.1, b.3, b.2)))
    });
    let n = 25.min(cands.len());
    let got = ex.top_keypoints(&img, n);
    assert_eq!(got.len(), n);
    for ((kp, _), c) in got.iter().zip(&cands) {
        assert_eq!(kp.level, c.1);
        assert_eq!(kp.response, c.0);
        let s = pyr.scale(c.1);
        assert_eq!((kp.x, kp.y), (c.2 as f64 * s, c.3 as f64 * s));
    }
}

#[test]
fn steered_descriptor_survives_quarter_turn() {
    let pattern = BriefPattern::default_pattern();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut same = Vec::new();
    let mut unrelated = Vec::new();
    for seed in 0..8 {
        let img = synth::blobs(101, 101, 100 + seed);
        let rot = img.rotated90();
        let describe = |im: &GrayImage, x: usize, y: usize| {
            let a = orientation(im, x, y, 15).unwrap();
            brief_descriptor(&smooth(im), x, y, a, &pattern).unwrap()
        };
        for _ in 0..8 {
            let (x, y) = (rng.random_range(16..85), rng.random_range(16..85));
            // out(x', y') = in(w - 1 - y', x'), so in(x, y) lands at (y, w - 1 - x)
            let d0 = describe(&img, x, y);
            let d1 = describe(&rot, y, 100 - x);
            same.push(hamming(&d0, &d1));
            unrelated.push(hamming(&d0, &Descriptor256(rng.random())));
        }
    }
    let median = |v: &mut Vec<u32>| {
        v.sort();
        v[v.len() / 2]
    };
    let m_same = median(&mut same);
    let m_other = median(&mut unrelated);
    assert!(m_same < 60, "rotated median {m_same}");
    assert!((112..=144).contains(&m_other), "unrelated median {m_other}");
}
