//! Per-location log probability maps of an image under a [`DensityModel`].
//!
//! Descriptors are evaluated on a regular grid (every `stride` pixels), the
//! grid is bilinearly interpolated to full resolution, and the result can be
//! rendered as a blue-white-red heatmap.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::gray::GrayImage;
use crate::reduce::{reduce_descriptor, CATEGORIES, DIMS};

pub const DEFAULT_STRIDE: usize = 3;
pub const OVERLAY_OPACITY: f64 = 0.6;
/// Minimum size of a zero-intensity 8-connected region for auto-masking.
pub const AUTO_MASK_MIN_REGION: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    stride: usize,
    grid_width: usize,
    grid_height: usize,
    grid_values: Vec<f64>,
    dense_values: Option<Vec<f64>>,
    mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawGridHeader {
    pub width: usize,
    pub height: usize,
    pub stride: usize,
    pub grid_width: usize,
    pub grid_height: usize,
    pub dtype: String,
    pub byte_order: String,
}

impl ProbabilityMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn grid_width(&self) -> usize {
        self.grid_width
    }

    pub fn grid_height(&self) -> usize {
        self.grid_height
    }

    /// ln p at grid cell (u, v), i.e. pixel (stride·u, stride·v).
    pub fn grid_value(&self, u: usize, v: usize) -> f64 {
        self.grid_values[v * self.grid_width + u]
    }

    pub fn grid_values(&self) -> &[f64] {
        &self.grid_values
    }

    pub fn dense_values(&self) -> Option<&[f64]> {
        self.dense_values.as_deref()
    }

    pub fn dense_value(&self, x: usize, y: usize) -> Option<f64> {
        self.dense_values.as_ref().map(|d| d[y * self.width + x])
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    fn relevant(&self, x: usize, y: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[y * self.width + x])
    }

    /// Build a map directly from grid values (mainly for tests and tools).
    pub fn from_grid(
        width: usize,
        height: usize,
        stride: usize,
        grid_values: Vec<f64>,
        mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        if stride == 0 || width == 0 || height == 0 {
            return Err(Error::InvalidArgument("empty map or zero stride".into()));
        }
        let grid_width = (width - 1) / stride + 1;
        let grid_height = (height - 1) / stride + 1;
        if grid_values.len() != grid_width * grid_height {
            return Err(Error::InvalidArgument(format!(
                "expected {}x{} grid values, got {}",
                grid_width,
                grid_height,
                grid_values.len()
            )));
        }
        if mask.as_ref().is_some_and(|m| m.len() != width * height) {
            return Err(Error::InvalidArgument("mask size mismatch".into()));
        }
        Ok(Self {
            width,
            height,
            stride,
            grid_width,
            grid_height,
            grid_values,
            dense_values: None,
            mask,
        })
    }

    /// `x,y,ln_p` per grid sample; missing samples are written as `NaN`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x,y,ln_p")?;
        for v in 0..self.grid_height {
            for u in 0..self.grid_width {
                writeln!(
                    w,
                    "{},{},{}",
                    u * self.stride,
                    v * self.stride,
                    self.grid_value(u, v)
                )?;
            }
        }
        Ok(())
    }

    pub fn raw_header(&self) -> RawGridHeader {
        RawGridHeader {
            width: self.width,
            height: self.height,
            stride: self.stride,
            grid_width: self.grid_width,
            grid_height: self.grid_height,
            dtype: "float64".into(),
            byte_order: "little".into(),
        }
    }

    /// Write the grid as row-major little-endian f64 to `path` and a JSON
    /// header to `path` with `.json` appended.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self
            .grid_values
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        let header = serde_json::to_string_pretty(&self.raw_header())
            .map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&side, header).map_err(|e| Error::io(side, e))
    }
}

/// Score every grid point `(stride·u, stride·v)` of `img`. Points where no
/// pyramid level admits a full patch, and points masked out, are NaN.
pub fn score_grid(
    model: &DensityModel,
    img: &GrayImage,
    stride: usize,
    mask: Option<Vec<bool>>,
) -> Result<ProbabilityMap> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    if mask
        .as_ref()
        .is_some_and(|m| m.len() != img.width() * img.height())
    {
        return Err(Error::InvalidArgument(
            "mask size does not match image".into(),
        ));
    }
    if model.dims() != DIMS || model.categories() != CATEGORIES {
        return Err(Error::InvalidArgument(format!(
            "model scores {}-component vectors over {} categories, not reduced ORB features",
            model.dims(),
            model.categories()
        )));
    }
    let extractor = model.extractor();
    let pyr = extractor
        .pyramid(img)
        .map_err(|e| Error::NoValidPoints(e.to_string()))?;
    let mut map = ProbabilityMap::from_grid(
        img.width(),
        img.height(),
        stride,
        vec![f64::NAN; ((img.width() - 1) / stride + 1) * ((img.height() - 1) / stride + 1)],
        mask,
    )?;
    let gw = map.grid_width;
    let computed: Vec<Option<f64>> = (0..map.grid_values.len())
        .into_par_iter()
        .map(|idx| {
            let (x, y) = ((idx % gw) * stride, (idx / gw) * stride);
            let (d, _) = extractor
                .descriptor_at_point(&pyr, x as f64, y as f64)
                .ok()?;
            if !map.relevant(x, y) {
                return Some(f64::NAN);
            }
            let lp = model
                .log_prob(&reduce_descriptor(&d).0)
                .expect("reduced vectors always fit the model");
            Some(lp)
        })
        .collect();
    if computed.iter().all(Option::is_none) {
        return Err(Error::NoValidPoints(format!(
            "no grid point of the {}x{} image admits a {}-pixel patch",
            img.width(),
            img.height(),
            2 * extractor.params().patch_radius + 1
        )));
    }
    for (slot, v) in map.grid_values.iter_mut().zip(computed) {
        *slot = v.unwrap_or(f64::NAN);
    }
    Ok(map)
}

/// Bilinear interpolation of the grid onto every pixel. Pixels beyond the
/// last grid row/column take the nearest grid value; NaN samples are left
/// out and the remaining weights renormalised.
pub fn interpolate(map: &ProbabilityMap) -> ProbabilityMap {
    let s = map.stride;
    let (gw, gh) = (map.grid_width, map.grid_height);
    let axis = |p: usize, n: usize| -> (usize, usize, f64) {
        let u0 = (p / s).min(n - 1);
        if u0 == n - 1 {
            (u0, u0, 0.0)
        } else {
            (u0, u0 + 1, (p - u0 * s) as f64 / s as f64)
        }
    };
    let mut dense = vec![f64::NAN; map.width * map.height];
    dense
        .par_chunks_mut(map.width)
        .enumerate()
        .for_each(|(y, row)| {
            let (v0, v1, fy) = axis(y, gh);
            for (x, out) in row.iter_mut().enumerate() {
                if !map.relevant(x, y) {
                    continue;
                }
                let (u0, u1, fx) = axis(x, gw);
                let taps = [
                    (u0, v0, (1.0 - fx) * (1.0 - fy)),
                    (u1, v0, fx * (1.0 - fy)),
                    (u0, v1, (1.0 - fx) * fy),
                    (u1, v1, fx * fy),
                ];
                // offsets from the first usable tap, so equal taps reproduce
                // their value exactly even after renormalisation
                let mut base = None;
                let (mut acc, mut wsum) = (0.0, 0.0);
                for (u, v, w) in taps {
                    let g = map.grid_value(u, v);
                    if w > 0.0 && !g.is_nan() {
                        let b = *base.get_or_insert(g);
                        acc += w * (g - b);
                        wsum += w;
                    }
                }
                if let Some(b) = base {
                    *out = b + acc / wsum;
                }
            }
        });
    ProbabilityMap {
        dense_values: Some(dense),
        ..map.clone()
    }
}

/// Mean of the finite grid samples.
pub fn mean_log_prob(map: &ProbabilityMap) -> Result<f64> {
    let finite: Vec<f64> = map
        .grid_values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    if finite.is_empty() {
        return Err(Error::NoValidPoints(
            "every grid sample is masked or uncomputable".into(),
        ));
    }
    // summing offsets from the first sample keeps a constant map exact
    let base = finite[0];
    let offset: f64 = finite.iter().map(|v| v - base).sum();
    Ok(base + offset / finite.len() as f64)
}

/// Diverging colormap: 0 → blue, 0.5 → white, 1 → red.
pub fn diverging_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    if t <= 0.5 {
        let c = (255.0 * 2.0 * t).round() as u8;
        [c, c, 255]
    } else {
        let c = (255.0 * (1.0 - 2.0 * (t - 0.5))).round() as u8;
        [255, c, c]
    }
}

/// 5th and 95th percentiles (nearest rank) of the finite dense values,
/// widened to `[c - 1, c + 1]` if they coincide.
pub fn default_range(map: &ProbabilityMap) -> Option<(f64, f64)> {
    let src = map.dense_values.as_deref().unwrap_or(&map.grid_values);
    let mut vals: Vec<f64> = src.iter().copied().filter(|v| v.is_finite()).collect();
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let rank = |p: f64| vals[((p * vals.len() as f64).ceil() as usize).clamp(1, vals.len()) - 1];
    let (lo, hi) = (rank(0.05), rank(0.95));
    Some(if lo < hi {
        (lo, hi)
    } else {
        (lo - 1.0, lo + 1.0)
    })
}

/// Render the dense map (interpolating first if needed). NaN pixels are
/// black. With `overlay`, colours are blended over the source image at
/// [`OVERLAY_OPACITY`].
pub fn render_heatmap(
    map: &ProbabilityMap,
    lo: f64,
    hi: f64,
    overlay: Option<&GrayImage>,
) -> Result<image::RgbImage> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "colour range needs lo < hi, got {lo}:{hi}"
        )));
    }
    if let Some(src) = overlay {
        if (src.width(), src.height()) != (map.width, map.height) {
            return Err(Error::InvalidArgument(
                "overlay size does not match map".into(),
            ));
        }
    }
    let interpolated;
    let map = if map.dense_values.is_some() {
        map
    } else {
        interpolated = interpolate(map);
        &interpolated
    };
    let dense = map.dense_values.as_ref().expect("interpolated");
    let mut out = image::RgbImage::new(map.width as u32, map.height as u32);
    for (x, y, px) in out.enumerate_pixels_mut() {
        let (x, y) = (x as usize, y as usize);
        let v = dense[y * map.width + x];
        if v.is_nan() {
            continue;
        }
        let mut c = diverging_color((v - lo) / (hi - lo));
        if let Some(src) = overlay {
            let g = src.get(x, y) as f64;
            for ch in c.iter_mut() {
                *ch = (OVERLAY_OPACITY * *ch as f64 + (1.0 - OVERLAY_OPACITY) * g).round() as u8;
            }
        }
        px.0 = c;
    }
    Ok(out)
}

/// Relevance mask that drops pure-black 8-connected regions of at least
/// [`AUTO_MASK_MIN_REGION`] pixels (`true` = keep).
pub fn auto_mask(img: &GrayImage) -> Vec<bool> {
    let (w, h) = (img.width(), img.height());
    let mut keep = vec![true; w * h];
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    let mut region = Vec::new();
    for start in 0..w * h {
        if seen[start] || img.as_raw()[start] != 0 {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        region.clear();
        while let Some(i) = queue.pop_front() {
            region.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && img.as_raw()[j] == 0 {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if region.len() >= AUTO_MASK_MIN_REGION {
            for &i in &region {
                keep[i] = false;
            }
        }
    }
    keep
}
