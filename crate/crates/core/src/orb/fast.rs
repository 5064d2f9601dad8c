//! FAST-9 segment-test detector on the radius-3 Bresenham circle.

use crate::gray::GrayImage;

/// Circle offsets, clockwise from 12 o'clock.
pub const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

/// Minimum contiguous arc length.
pub const ARC: usize = 9;

pub const DEFAULT_THRESHOLD: u8 = 20;

#[inline]
fn has_arc(mask: u16) -> bool {
    // unroll the circle so arcs crossing position 0 are contiguous
    let mut m = (mask as u32) | ((mask as u32) << 16);
    for _ in 1..ARC {
        m &= m >> 1;
    }
    m != 0
}

#[inline]
fn circle_values(img: &GrayImage, x: usize, y: usize) -> [i16; 16] {
    let mut v = [0i16; 16];
    for (k, &(dx, dy)) in CIRCLE.iter().enumerate() {
        v[k] = img.get((x as isize + dx) as usize, (y as isize + dy) as usize) as i16;
    }
    v
}

/// Segment test at an interior pixel (3-pixel border required).
pub fn is_corner(img: &GrayImage, x: usize, y: usize, threshold: u8) -> bool {
    let c = img.get(x, y) as i16;
    let t = threshold as i16;
    let v = circle_values(img, x, y);
    // any 9-arc covers two adjacent compass points
    let b = |k: usize| v[k] > c + t;
    let d = |k: usize| v[k] < c - t;
    let bright_pair = (b(0) && b(4)) || (b(4) && b(8)) || (b(8) && b(12)) || (b(12) && b(0));
    let dark_pair = (d(0) && d(4)) || (d(4) && d(8)) || (d(8) && d(12)) || (d(12) && d(0));
    if !bright_pair && !dark_pair {
        return false;
    }
    let mut bright = 0u16;
    let mut dark = 0u16;
    for (k, &p) in v.iter().enumerate() {
        if p > c + t {
            bright |= 1 << k;
        } else if p < c - t {
            dark |= 1 << k;
        }
    }
    has_arc(bright) || has_arc(dark)
}

/// Corner strength: the largest threshold at which the pixel still passes
/// the segment test. Zero for pixels that are not corners at threshold 0.
pub fn score(img: &GrayImage, x: usize, y: usize) -> i16 {
    let c = img.get(x, y) as i16;
    let v = circle_values(img, x, y);
    let mut best = i16::MIN;
    for start in 0..16 {
        let mut lo_b = i16::MAX;
        let mut lo_d = i16::MAX;
        for k in 0..ARC {
            let p = v[(start + k) % 16];
            lo_b = lo_b.min(p - c);
            lo_d = lo_d.min(c - p);
        }
        best = best.max(lo_b).max(lo_d);
    }
    (best - 1).max(0)
}

/// Detect FAST corners with 3x3 non-maximum suppression on [`score`].
///
/// A corner survives if no neighbouring corner scores higher, so a plateau
/// of equal scores is kept whole. Output is in raster order.
pub fn detect_fast(img: &GrayImage, threshold: u8) -> Vec<(usize, usize)> {
    let (w, h) = (img.width(), img.height());
    if w < 7 || h < 7 {
        return Vec::new();
    }
    let mut scores = vec![-1i16; w * h];
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            if is_corner(img, x, y, threshold) {
                scores[y * w + x] = score(img, x, y);
            }
        }
    }
    let mut out = Vec::new();
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let s = scores[y * w + x];
            if s < 0 {
                continue;
            }
            let mut keep = true;
            'nbr: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let q = scores[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
                    if q > s {
                        keep = false;
                        break 'nbr;
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_detection() {
        assert!(has_arc(0b0000_0001_1111_1111));
        assert!(!has_arc(0b0000_0000_1111_1111));
        // wraps around position 0
        assert!(has_arc(0b1111_1000_0000_1111));
        assert!(!has_arc(0b1111_0000_0000_1111));
        assert!(has_arc(0xFFFF));
    }

    #[test]
    fn constant_image_has_no_corners() {
        let img = GrayImage::filled(32, 32, 128);
        assert!(detect_fast(&img, 20).is_empty());
    }

    #[test]
    fn isolated_bright_pixel_is_a_corner() {
        // every circle pixel is darker than the centre: full 16-arc
        let mut img = GrayImage::filled(15, 15, 0);
        img.set(7, 7, 255);
        assert_eq!(detect_fast(&img, 20), vec![(7, 7)]);
        assert_eq!(score(&img, 7, 7), 254);
    }

    #[test]
    fn tiny_image_is_empty() {
        let img = GrayImage::filled(6, 6, 0);
        assert!(detect_fast(&img, 20).is_empty());
    }
}
