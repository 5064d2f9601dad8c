//! Oriented FAST keypoints with steered BRIEF descriptors.
//!
//! Detection runs FAST-9 on every pyramid level, ranks candidates by Harris
//! response, orients them by the intensity centroid of the raw patch, and
//! describes them with the steered test pattern on a smoothed copy of the
//! level. [`OrbExtractor::descriptor_at_point`] describes an arbitrary
//! location by picking the level with the strongest Harris response there.

mod brief;
pub mod fast;
mod harris;
mod pyramid;

use std::f64::consts::TAU;

pub use brief::{
    brief_descriptor, BriefPattern, Descriptor256, TestPair, N_PAIRS, N_TEMPLATES, PATTERN_SEED,
};
pub use fast::detect_fast;
pub use harris::{harris_response, structure_tensor, HARRIS_K};
pub use pyramid::{build_pyramid, Pyramid};

use crate::error::{Error, Result};
use crate::gray::GrayImage;

pub const PATCH_RADIUS: usize = 15;
pub const N_LEVELS: usize = 8;
pub const SCALE_FACTOR: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbParams {
    pub n_levels: usize,
    pub scale_factor: f64,
    pub patch_radius: usize,
    pub fast_threshold: u8,
}

impl Default for OrbParams {
    fn default() -> Self {
        Self {
            n_levels: N_LEVELS,
            scale_factor: SCALE_FACTOR,
            patch_radius: PATCH_RADIUS,
            fast_threshold: fast::DEFAULT_THRESHOLD,
        }
    }
}

/// Detected interest point. `x`/`y` are level-0 pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub angle: f64,
    pub response: f64,
    pub level: usize,
}

impl Keypoint {
    /// Integer position on the keypoint's own pyramid level.
    pub fn level_position(&self, scale_factor: f64) -> (usize, usize) {
        let s = scale_factor.powi(self.level as i32);
        ((self.x / s).round() as usize, (self.y / s).round() as usize)
    }
}

/// Intensity-centroid orientation over the disc of `radius` around `(x, y)`,
/// in [0, 2π) with y pointing down. A patch with zero first moments has
/// angle 0.
pub fn orientation(img: &GrayImage, x: usize, y: usize, radius: usize) -> Result<f64> {
    if x < radius || y < radius || x + radius >= img.width() || y + radius >= img.height() {
        return Err(Error::OutOfBounds {
            x: x as f64,
            y: y as f64,
            size: 2 * radius + 1,
        });
    }
    let r = radius as i64;
    let (mut m10, mut m01) = (0i64, 0i64);
    for dy in -r..=r {
        // half-width of the disc on this row
        let span = ((r * r - dy * dy) as f64).sqrt().floor() as i64;
        let row = img.row((y as i64 + dy) as usize);
        for dx in -span..=span {
            let v = row[(x as i64 + dx) as usize] as i64;
            m10 += dx * v;
            m01 += dy * v;
        }
    }
    Ok(normalize_angle((m01 as f64).atan2(m10 as f64)))
}

pub(crate) fn normalize_angle(a: f64) -> f64 {
    let a = a.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Detector/descriptor bundle: parameters plus the frozen test pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbExtractor {
    params: OrbParams,
    pattern: BriefPattern,
}

impl OrbExtractor {
    pub fn new(params: OrbParams, pattern: BriefPattern) -> Result<Self> {
        if pattern.patch_radius() != params.patch_radius {
            return Err(Error::InvalidArgument(format!(
                "pattern radius {} does not match patch radius {}",
                pattern.patch_radius(),
                params.patch_radius
            )));
        }
        if params.fast_threshold == 0 {
            return Err(Error::InvalidArgument(
                "FAST threshold must be in 1..=255".into(),
            ));
        }
        if params.n_levels == 0 || !(params.scale_factor > 1.0) {
            return Err(Error::InvalidArgument(
                "pyramid needs n_levels >= 1 and scale_factor > 1".into(),
            ));
        }
        Ok(Self { params, pattern })
    }

    pub fn params(&self) -> &OrbParams {
        &self.params
    }

    pub fn pattern(&self) -> &BriefPattern {
        &self.pattern
    }

    pub fn pyramid(&self, img: &GrayImage) -> Result<Pyramid> {
        build_pyramid(
            img,
            self.params.n_levels,
            self.params.scale_factor,
            self.params.patch_radius,
        )
    }

    fn fits(&self, img: &GrayImage, x: usize, y: usize) -> bool {
        let r = self.params.patch_radius;
        x >= r && y >= r && x + r < img.width() && y + r < img.height()
    }

    /// Steered descriptor for a keypoint on `pyr`.
    pub fn describe(&self, pyr: &Pyramid, kp: &Keypoint) -> Result<Descriptor256> {
        let (cx, cy) = kp.level_position(pyr.scale_factor());
        if kp.level >= pyr.n_levels() {
            return Err(Error::InvalidArgument(format!(
                "keypoint level {} not in pyramid of {} levels",
                kp.level,
                pyr.n_levels()
            )));
        }
        brief_descriptor(pyr.smoothed(kp.level), cx, cy, kp.angle, &self.pattern)
    }

    /// The `n` strongest keypoints across all levels with their descriptors,
    /// sorted by descending Harris response (ties by level, y, x).
    pub fn top_keypoints(&self, img: &GrayImage, n: usize) -> Vec<(Keypoint, Descriptor256)> {
        let Ok(pyr) = self.pyramid(img) else {
            return Vec::new();
        };
        self.top_keypoints_in(&pyr, n)
    }

    pub fn top_keypoints_in(&self, pyr: &Pyramid, n: usize) -> Vec<(Keypoint, Descriptor256)> {
        struct Candidate {
            response: f64,
            level: usize,
            x: usize,
            y: usize,
        }
        let mut cands = Vec::new();
        for (level, img) in pyr.levels().iter().enumerate() {
            for (x, y) in detect_fast(img, self.params.fast_threshold) {
                if !self.fits(img, x, y) {
                    continue;
                }
                let response = harris_response(img, x, y).expect("patch fits so block fits");
                cands.push(Candidate {
                    response,
                    level,
                    x,
                    y,
                });
            }
        }
        cands.sort_by(|a, b| {
            b.response
                .total_cmp(&a.response)
                .then(a.level.cmp(&b.level))
                .then(a.y.cmp(&b.y))
                .then(a.x.cmp(&b.x))
        });
        cands.truncate(n);
        cands
            .into_iter()
            .map(|c| {
                let img = pyr.level(c.level);
                let angle =
                    orientation(img, c.x, c.y, self.params.patch_radius).expect("patch fits");
                let s = pyr.scale(c.level);
                let kp = Keypoint {
                    x: c.x as f64 * s,
                    y: c.y as f64 * s,
                    angle,
                    response: c.response,
                    level: c.level,
                };
                let d = brief_descriptor(pyr.smoothed(c.level), c.x, c.y, angle, &self.pattern)
                    .expect("patch fits");
                (kp, d)
            })
            .collect()
    }

    /// Level chosen for an arbitrary point: the one with the highest Harris
    /// response among levels where the whole patch fits (lower level wins
    /// ties). Returns (level, x, y, response) in level coordinates.
    pub fn best_level(&self, pyr: &Pyramid, x: f64, y: f64) -> Result<(usize, usize, usize, f64)> {
        let mut best: Option<(usize, usize, usize, f64)> = None;
        for (level, img) in pyr.levels().iter().enumerate() {
            let s = pyr.scale(level);
            let (lx, ly) = ((x / s).round(), (y / s).round());
            if lx < 0.0 || ly < 0.0 {
                continue;
            }
            let (lx, ly) = (lx as usize, ly as usize);
            if !self.fits(img, lx, ly) {
                continue;
            }
            let r = harris_response(img, lx, ly)?;
            if best.is_none_or(|b| r > b.3) {
                best = Some((level, lx, ly, r));
            }
        }
        best.ok_or(Error::OutOfBounds {
            x,
            y,
            size: 2 * self.params.patch_radius + 1,
        })
    }

    /// Descriptor at an arbitrary level-0 location, computed on the level
    /// with the strongest Harris response there.
    pub fn descriptor_at_point(
        &self,
        pyr: &Pyramid,
        x: f64,
        y: f64,
    ) -> Result<(Descriptor256, usize)> {
        let (level, lx, ly, _) = self.best_level(pyr, x, y)?;
        let angle = orientation(pyr.level(level), lx, ly, self.params.patch_radius)?;
        let d = brief_descriptor(pyr.smoothed(level), lx, ly, angle, &self.pattern)?;
        Ok((d, level))
    }
}

impl Default for OrbExtractor {
    fn default() -> Self {
        Self::new(OrbParams::default(), BriefPattern::default_pattern())
            .expect("defaults are consistent")
    }
}
