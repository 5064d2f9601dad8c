use crate::error::{Error, Result};
use crate::gray::GrayImage;

/// Multi-scale image stack. Level `L` is the input resampled by
/// `scale_factor^-L`; each level also carries a 5x5 box-smoothed copy used
/// for the binary intensity tests.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<GrayImage>,
    smoothed: Vec<GrayImage>,
    scale_factor: f64,
}

impl Pyramid {
    pub fn levels(&self) -> &[GrayImage] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &GrayImage {
        &self.levels[l]
    }

    pub fn smoothed(&self, l: usize) -> &GrayImage {
        &self.smoothed[l]
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }

    /// Factor mapping level-`l` coordinates back to level 0.
    pub fn scale(&self, l: usize) -> f64 {
        self.scale_factor.powi(l as i32)
    }
}

/// Build the pyramid. Levels whose smaller side would drop below
/// `2 * patch_radius + 1` are not generated.
pub fn build_pyramid(
    img: &GrayImage,
    n_levels: usize,
    scale_factor: f64,
    patch_radius: usize,
) -> Result<Pyramid> {
    if n_levels == 0 {
        return Err(Error::InvalidArgument("n_levels must be >= 1".into()));
    }
    if !(scale_factor > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "scale_factor must be > 1, got {scale_factor}"
        )));
    }
    let min = 2 * patch_radius + 1;
    if img.width() < min || img.height() < min {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min,
        });
    }
    let mut levels = vec![img.clone()];
    for l in 1..n_levels {
        let s = scale_factor.powi(l as i32);
        let w = (img.width() as f64 / s).floor() as usize;
        let h = (img.height() as f64 / s).floor() as usize;
        if w < min || h < min {
            break;
        }
        levels.push(resample_bilinear(img, w, h, s));
    }
    let smoothed = levels.iter().map(GrayImage::box_blur5).collect();
    Ok(Pyramid {
        levels,
        smoothed,
        scale_factor,
    })
}

/// Output pixel (u, v) samples the source at (u * s, v * s).
fn resample_bilinear(src: &GrayImage, w: usize, h: usize, s: f64) -> GrayImage {
    let max_x = (src.width() - 1) as f64;
    let max_y = (src.height() - 1) as f64;
    GrayImage::from_fn(w, h, |u, v| {
        let sx = (u as f64 * s).min(max_x);
        let sy = (v as f64 * s).min(max_y);
        let x0 = sx.floor() as usize;
        let y0 = sy.floor() as usize;
        let x1 = (x0 + 1).min(src.width() - 1);
        let y1 = (y0 + 1).min(src.height() - 1);
        let fx = sx - x0 as f64;
        let fy = sy - y0 as f64;
        let top = src.get(x0, y0) as f64 * (1.0 - fx) + src.get(x1, y0) as f64 * fx;
        let bot = src.get(x0, y1) as f64 * (1.0 - fx) + src.get(x1, y1) as f64 * fx;
        (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_is_input() {
        let img = GrayImage::from_fn(40, 40, |x, y| (x ^ y) as u8);
        let p = build_pyramid(&img, 1, 1.2, 15).unwrap();
        assert_eq!(p.n_levels(), 1);
        assert_eq!(p.level(0), &img);
    }

    #[test]
    fn halving_dimensions() {
        // a radius-10 patch needs 21 pixels, so 25x25 survives
        let img = GrayImage::filled(100, 100, 9);
        let p = build_pyramid(&img, 3, 2.0, 10).unwrap();
        let dims: Vec<_> = p.levels().iter().map(|l| (l.width(), l.height())).collect();
        assert_eq!(dims, vec![(100, 100), (50, 50), (25, 25)]);
    }

    #[test]
    fn too_small_levels_are_dropped() {
        let img = GrayImage::filled(40, 40, 9);
        let p = build_pyramid(&img, 8, 2.0, 15).unwrap();
        assert_eq!(p.n_levels(), 1);
    }

    #[test]
    fn default_scale_dimensions() {
        let img = GrayImage::filled(200, 120, 0);
        let p = build_pyramid(&img, 8, 1.2, 15).unwrap();
        for (l, lvl) in p.levels().iter().enumerate() {
            let s = 1.2f64.powi(l as i32);
            assert_eq!(lvl.width(), (200.0 / s).floor() as usize);
            assert_eq!(lvl.height(), (120.0 / s).floor() as usize);
            assert!(lvl.height() >= 31);
        }
        // 120 / 1.2^7 = 33.5, so all eight levels survive
        assert_eq!(p.n_levels(), 8);
    }

    #[test]
    fn rejects_tiny_image() {
        let img = GrayImage::filled(30, 60, 0);
        assert!(matches!(
            build_pyramid(&img, 3, 1.2, 15),
            Err(Error::ImageTooSmall { min: 31, .. })
        ));
    }
}
