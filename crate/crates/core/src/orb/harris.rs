use crate::error::{Error, Result};
use crate::gray::GrayImage;

pub const HARRIS_K: f64 = 0.04;
pub const BLOCK: usize = 7;

// gradients normalised the same way on every pyramid level so responses
// are comparable across levels
const GRAD_SCALE: f64 = 1.0 / (4.0 * BLOCK as f64 * 255.0);

#[inline]
fn sobel(img: &GrayImage, x: isize, y: isize) -> (f64, f64) {
    let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy) as i32;
    let gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
    let gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
    (gx as f64 * GRAD_SCALE, gy as f64 * GRAD_SCALE)
}

/// Structure tensor (sum gx², sum gy², sum gx·gy) over the 7x7 block.
pub fn structure_tensor(img: &GrayImage, x: usize, y: usize) -> Result<(f64, f64, f64)> {
    let r = BLOCK / 2;
    if x < r || y < r || x + r >= img.width() || y + r >= img.height() {
        return Err(Error::OutOfBounds {
            x: x as f64,
            y: y as f64,
            size: BLOCK,
        });
    }
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for yy in y - r..=y + r {
        for xx in x - r..=x + r {
            let (gx, gy) = sobel(img, xx as isize, yy as isize);
            a += gx * gx;
            b += gy * gy;
            c += gx * gy;
        }
    }
    Ok((a, b, c))
}

/// Harris measure det(M) - k trace(M)^2 of the Sobel structure tensor.
/// Pixels outside the image are replicated from the border for the Sobel
/// taps; the 7x7 block itself must be inside.
pub fn harris_response(img: &GrayImage, x: usize, y: usize) -> Result<f64> {
    let (a, b, c) = structure_tensor(img, x, y)?;
    Ok(a * b - c * c - HARRIS_K * (a + b) * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_region_scores_zero() {
        let img = GrayImage::filled(20, 20, 90);
        assert_eq!(harris_response(&img, 10, 10).unwrap(), 0.0);
    }

    #[test]
    fn out_of_bounds_block() {
        let img = GrayImage::filled(20, 20, 90);
        assert!(harris_response(&img, 2, 10).is_err());
        assert!(harris_response(&img, 10, 17).is_err());
        assert!(harris_response(&img, 3, 16).is_ok());
    }

    #[test]
    fn quadrant_corner_is_positive() {
        // bright quadrant x >= 10, y >= 10
        let img = GrayImage::from_fn(21, 21, |x, y| if x >= 10 && y >= 10 { 200 } else { 0 });
        let (a, b, c) = structure_tensor(&img, 10, 10).unwrap();
        // a and b are equal by symmetry and the cross term is smaller than
        // either, so det > k trace^2 needs a^2 - c^2 > 4k a^2
        assert!((a - b).abs() < 1e-15);
        assert!(c.abs() < a);
        assert!(harris_response(&img, 10, 10).unwrap() > 0.0);
    }

    #[test]
    fn straight_edge_is_not_positive() {
        let img = GrayImage::from_fn(21, 21, |x, _| if x >= 10 { 200 } else { 0 });
        let (_, b, c) = structure_tensor(&img, 10, 10).unwrap();
        // only gx is non-zero, so M is rank one
        assert_eq!(b, 0.0);
        assert_eq!(c, 0.0);
        assert!(harris_response(&img, 10, 10).unwrap() <= 0.0);
    }
}
