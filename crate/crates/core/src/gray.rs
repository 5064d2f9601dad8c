//! Single-channel 8-bit images and decoding from disk.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major 8-bit intensity image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "buffer of {} bytes does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel read with coordinates clamped into the image.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Photometric negative.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 255 - v).collect(),
        }
    }

    /// Rotate by 90 degrees: output pixel (x', y') = input (y', w - 1 - x').
    pub fn rotated90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        Self::from_fn(h, w, |x, y| self.get(w - 1 - y, x))
    }

    /// 5x5 box filter with replicated borders, rounded to nearest.
    pub fn box_blur5(&self) -> Self {
        let (w, h) = (self.width, self.height);
        // horizontal pass keeps exact integer sums
        let mut horiz = vec![0u16; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut s = 0u16;
                for dx in -2isize..=2 {
                    s += self.get_clamped(x as isize + dx, y as isize) as u16;
                }
                horiz[y * w + x] = s;
            }
        }
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let mut s = 0u32;
                for dy in -2isize..=2 {
                    let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    s += horiz[yy * w + x] as u32;
                }
                out.push(((s + 12) / 25) as u8);
            }
        }
        Self {
            width: w,
            height: h,
            data: out,
        }
    }

    pub fn to_image(&self) -> image::GrayImage {
        image::GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer size matches dimensions")
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
    }
}

/// BT.601 luma with half-up rounding, computed exactly in integers.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

/// Composite a channel value with coverage `a` over a white background.
#[inline]
fn over_white(c: u8, a: u8) -> u8 {
    let (c, a) = (c as u32, a as u32);
    ((c * a + 255 * (255 - a) + 127) / 255) as u8
}

/// Convert any decoded raster to grayscale. 8-bit and 16-bit gray inputs keep
/// their intensities (16-bit is scaled down); colour goes through [`luma`]
/// after compositing alpha over white.
pub fn to_gray(img: &image::DynamicImage) -> GrayImage {
    use image::DynamicImage as D;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        D::ImageLuma8(g) => g.as_raw().clone(),
        D::ImageLumaA8(g) => g.pixels().map(|p| over_white(p.0[0], p.0[1])).collect(),
        D::ImageLuma16(_) | D::ImageLumaA16(_) => {
            let la = img.to_luma_alpha8();
            la.pixels().map(|p| over_white(p.0[0], p.0[1])).collect()
        }
        _ => img
            .to_rgba8()
            .pixels()
            .map(|p| {
                let [r, g, b, a] = p.0;
                luma(over_white(r, a), over_white(g, a), over_white(b, a))
            })
            .collect(),
    };
    GrayImage {
        width: w,
        height: h,
        data,
    }
}

/// Decode a PNG/JPEG/TIFF file into a grayscale image.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let reader = image::ImageReader::open(path)
        .map_err(|e| decode_err(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    let img = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    Ok(to_gray(&img))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_endpoints() {
        assert_eq!(luma(255, 0, 0), 76);
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(0, 0, 0), 0);
        assert_eq!(luma(0, 255, 0), 150); // 149.685
        assert_eq!(luma(0, 0, 255), 29); // 29.07
    }

    #[test]
    fn luma_rounds_half_up() {
        // 299*70 + 114*5 = 21500 -> exactly 21.5
        assert_eq!(luma(70, 0, 5), 22);
        // 1.897
        assert_eq!(luma(4, 1, 1), 2);
        // 0.299
        assert_eq!(luma(1, 0, 0), 0);
    }

    #[test]
    fn alpha_composites_over_white() {
        assert_eq!(over_white(0, 0), 255);
        assert_eq!(over_white(0, 255), 0);
        assert_eq!(over_white(100, 255), 100);
    }

    #[test]
    fn rotate90_four_times_is_identity() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 10 + y) as u8);
        let r = img.rotated90();
        assert_eq!((r.width(), r.height()), (3, 5));
        assert_eq!(r.rotated90().rotated90().rotated90(), img);
    }

    #[test]
    fn box_blur_of_constant_is_constant() {
        let img = GrayImage::filled(9, 7, 77);
        assert_eq!(img.box_blur5(), img);
    }
}
