//! Steered BRIEF: a fixed set of 256 point-pair intensity tests, with 30
//! pre-rotated copies of the pattern so orientation compensation is a table
//! lookup.

use std::f64::consts::TAU;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gray::GrayImage;

pub const N_PAIRS: usize = 256;
pub const N_TEMPLATES: usize = 30;
pub const PATTERN_SEED: u64 = 20190601;

/// 256-bit binary descriptor. Bit `i` lives in byte `i / 8` at position
/// `i % 8` (least significant first).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Descriptor256(pub [u8; 32]);

impl Descriptor256 {
    pub const ZERO: Self = Self([0; 32]);
    pub const ONES: Self = Self([0xFF; 32]);

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        self.0[i / 8] >> (i % 8) & 1 == 1
    }

    #[inline]
    pub fn set_bit(&mut self, i: usize, v: bool) {
        if v {
            self.0[i / 8] |= 1 << (i % 8);
        } else {
            self.0[i / 8] &= !(1 << (i % 8));
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.0[i / 8] ^= 1 << (i % 8);
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|b| b.count_ones()).sum()
    }

    pub fn complement(&self) -> Self {
        let mut out = *self;
        out.0.iter_mut().for_each(|b| *b = !*b);
        out
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Descriptor256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Descriptor256({})", self.to_hex())
    }
}

/// One intensity test: offsets `(x1, y1)` and `(x2, y2)` from the keypoint.
pub type TestPair = [i8; 4];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BriefPattern {
    patch_radius: usize,
    pairs: Vec<TestPair>,
    templates: Vec<Vec<TestPair>>,
}

fn rotate_pair(p: TestPair, angle: f64) -> TestPair {
    let (s, c) = angle.sin_cos();
    let rot = |x: i8, y: i8| {
        let (x, y) = (x as f64, y as f64);
        ((x * c - y * s).round() as i8, (x * s + y * c).round() as i8)
    };
    let (a, b) = rot(p[0], p[1]);
    let (d, e) = rot(p[2], p[3]);
    [a, b, d, e]
}

impl BriefPattern {
    /// Draw a pattern from an isotropic Gaussian with sigma = patch_size / 5.
    ///
    /// Points are rounded to integer offsets and redrawn until they fall
    /// within `patch_radius - 1` of the centre, which keeps every rotated
    /// (and re-rounded) copy inside the patch disc.
    pub fn generate(seed: u64, patch_radius: usize) -> Self {
        assert!(
            (2..=100).contains(&patch_radius),
            "patch radius out of range"
        );
        let sigma = (2 * patch_radius + 1) as f64 / 5.0;
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limit = ((patch_radius - 1) * (patch_radius - 1)) as i32;
        let mut draw = || loop {
            let x = normal.sample(&mut rng).round() as i32;
            let y = normal.sample(&mut rng).round() as i32;
            if x * x + y * y <= limit {
                return (x as i8, y as i8);
            }
        };
        let pairs = (0..N_PAIRS)
            .map(|_| {
                let (x1, y1) = draw();
                let (x2, y2) = draw();
                [x1, y1, x2, y2]
            })
            .collect();
        Self::from_pairs(patch_radius, pairs).expect("generated pattern is valid")
    }

    pub fn default_pattern() -> Self {
        Self::generate(PATTERN_SEED, super::PATCH_RADIUS)
    }

    /// Build from stored pairs, recomputing the rotated templates.
    pub fn from_pairs(patch_radius: usize, pairs: Vec<TestPair>) -> Result<Self> {
        if pairs.len() != N_PAIRS {
            return Err(Error::Format(format!(
                "pattern has {} pairs, expected {N_PAIRS}",
                pairs.len()
            )));
        }
        let r2 = (patch_radius * patch_radius) as i32;
        let in_disc = |p: &TestPair| {
            let n = |x: i8, y: i8| x as i32 * x as i32 + y as i32 * y as i32;
            n(p[0], p[1]) <= r2 && n(p[2], p[3]) <= r2
        };
        let templates: Vec<Vec<TestPair>> = (0..N_TEMPLATES)
            .map(|t| {
                let angle = TAU * t as f64 / N_TEMPLATES as f64;
                pairs.iter().map(|&p| rotate_pair(p, angle)).collect()
            })
            .collect();
        if !templates.iter().flatten().all(in_disc) {
            return Err(Error::Format("pattern offsets leave the patch disc".into()));
        }
        Ok(Self {
            patch_radius,
            pairs,
            templates,
        })
    }

    pub fn patch_radius(&self) -> usize {
        self.patch_radius
    }

    pub fn pairs(&self) -> &[TestPair] {
        &self.pairs
    }

    pub fn template(&self, t: usize) -> &[TestPair] {
        &self.templates[t]
    }

    /// Index of the template nearest to `angle`.
    pub fn template_index(angle: f64) -> usize {
        let bin = TAU / N_TEMPLATES as f64;
        ((angle / bin).round() as i64).rem_euclid(N_TEMPLATES as i64) as usize
    }
}

/// Evaluate the steered tests around `(cx, cy)` on an already smoothed image.
/// Bit `i` is set iff I(z1) < I(z2); ties give 0.
pub fn brief_descriptor(
    smoothed: &GrayImage,
    cx: usize,
    cy: usize,
    angle: f64,
    pattern: &BriefPattern,
) -> Result<Descriptor256> {
    let r = pattern.patch_radius();
    if cx < r || cy < r || cx + r >= smoothed.width() || cy + r >= smoothed.height() {
        return Err(Error::OutOfBounds {
            x: cx as f64,
            y: cy as f64,
            size: 2 * r + 1,
        });
    }
    let tpl = pattern.template(BriefPattern::template_index(angle));
    let at = |dx: i8, dy: i8| {
        smoothed.get(
            (cx as isize + dx as isize) as usize,
            (cy as isize + dy as isize) as usize,
        )
    };
    let mut d = Descriptor256::ZERO;
    for (i, p) in tpl.iter().enumerate() {
        if at(p[0], p[1]) < at(p[2], p[3]) {
            d.0[i / 8] |= 1 << (i % 8);
        }
    }
    Ok(d)
}
