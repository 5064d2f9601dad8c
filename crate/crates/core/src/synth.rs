//! Synthetic stand-ins for three kinds of figure content, used by tests,
//! benchmarks and the `synth` command: spot-noise textures (close to
//! microscopy), soft blobs (blot-like bands and spots) and rendered text.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gray::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Texture,
    Blob,
    Text,
}

impl Kind {
    pub const ALL: [Kind; 3] = [Kind::Texture, Kind::Blob, Kind::Text];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Texture => "texture",
            Kind::Blob => "blob",
            Kind::Text => "text",
        }
    }

    pub fn render(self, w: usize, h: usize, seed: u64) -> GrayImage {
        match self {
            Kind::Texture => noise_texture(w, h, seed),
            Kind::Blob => blobs(w, h, seed),
            Kind::Text => text(w, h, seed),
        }
    }
}

/// Spot noise: elliptical spots of random size, orientation and signed
/// amplitude scattered over a flat base, about 20 to 60 per 128x128 area.
/// Overlapping spots give structure at many scales without repetition.
pub fn noise_texture(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.random_range(40.0..120.0);
    let mut field = vec![base; w * h];
    let density = rng.random_range(20.0..60.0) / (128.0 * 128.0);
    let n_spots = ((w * h) as f64 * density).round().max(1.0) as usize;
    for _ in 0..n_spots {
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(0.0..h as f64);
        let r = rng.random_range(2.0..14.0);
        let ecc = rng.random_range(0.5..1.0);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let amp = rng.random_range(-80.0..120.0);
        let (c, s) = (theta.cos(), theta.sin());
        let x0 = (cx - r).floor().max(0.0) as usize;
        let y0 = (cy - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as usize).min(w - 1);
        let y1 = ((cy + r).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let a = (dx * c + dy * s) / r;
                let b = (dy * c - dx * s) / (r * ecc);
                let d2 = a * a + b * b;
                if d2 < 1.0 {
                    field[y * w + x] += amp * (1.0 - d2).sqrt();
                }
            }
        }
    }
    GrayImage::from_fn(w, h, |x, y| {
        field[y * w + x].round().clamp(0.0, 255.0) as u8
    })
}

/// Dark background with a handful of Gaussian spots and horizontal bands,
/// plus mild sensor noise.
pub fn blobs(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = vec![20.0f64; w * h];
    let n_spots = rng.random_range(4..=8);
    for _ in 0..n_spots {
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(0.0..h as f64);
        let sx = rng.random_range(3.0..10.0);
        let sy = sx * rng.random_range(0.4..1.0);
        let amp = rng.random_range(80.0..200.0);
        for y in 0..h {
            for x in 0..w {
                let dx = (x as f64 - cx) / sx;
                let dy = (y as f64 - cy) / sy;
                field[y * w + x] += amp * (-0.5 * (dx * dx + dy * dy)).exp();
            }
        }
    }
    GrayImage::from_fn(w, h, |x, y| {
        let noise = rng.random_range(-6.0..6.0);
        (field[y * w + x] + noise).round().clamp(0.0, 255.0) as u8
    })
}

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

#[rustfmt::skip]
const FONT: [[&str; GLYPH_H]; 16] = [
    ["01110", "10001", "10001", "11111", "10001", "10001", "10001"], // A
    ["11110", "10001", "11110", "10001", "10001", "10001", "11110"], // B
    ["01111", "10000", "10000", "10000", "10000", "10000", "01111"], // C
    ["11110", "10001", "10001", "10001", "10001", "10001", "11110"], // D
    ["11111", "10000", "11110", "10000", "10000", "10000", "11111"], // E
    ["10001", "10001", "11111", "10001", "10001", "10001", "10001"], // H
    ["01110", "00100", "00100", "00100", "00100", "00100", "01110"], // I
    ["10000", "10000", "10000", "10000", "10000", "10000", "11111"], // L
    ["10001", "11011", "10101", "10001", "10001", "10001", "10001"], // M
    ["10001", "11001", "10101", "10011", "10001", "10001", "10001"], // N
    ["01110", "10001", "10001", "10001", "10001", "10001", "01110"], // O
    ["11110", "10001", "10001", "11110", "10000", "10000", "10000"], // P
    ["11110", "10001", "10001", "11110", "10100", "10010", "10001"], // R
    ["01111", "10000", "01110", "00001", "00001", "10001", "01110"], // S
    ["11111", "00100", "00100", "00100", "00100", "00100", "00100"], // T
    ["10001", "10001", "10001", "10001", "10001", "10001", "01110"], // U
];

/// Black glyphs from a 5x7 bitmap font on a white page, set solid in lines
/// of random words, like the small labels and captions in figures.
pub fn text(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1;
    let (gw, gh) = (GLYPH_W * scale, GLYPH_H * scale);
    let advance = gw + scale;
    let line = gh + 2 * scale + rng.random_range(0..=scale);
    let mut img = GrayImage::filled(w, h, 255);
    let margin = 2 * scale;
    let mut y0 = margin;
    while y0 + gh + margin <= h {
        let mut x0 = margin + rng.random_range(0..=2 * advance);
        loop {
            let room = w.saturating_sub(x0 + margin) / advance;
            if room < 2 {
                break;
            }
            let word_len = rng.random_range(2..=7usize).min(room);
            for _ in 0..word_len {
                let glyph = &FONT[rng.random_range(0..FONT.len())];
                for (gy, row) in glyph.iter().enumerate() {
                    for (gx, bit) in row.bytes().enumerate() {
                        if bit != b'1' {
                            continue;
                        }
                        for sy in 0..scale {
                            for sx in 0..scale {
                                img.set(x0 + gx * scale + sx, y0 + gy * scale + sy, 0);
                            }
                        }
                    }
                }
                x0 += advance;
            }
            x0 += advance;
        }
        y0 += line;
    }
    img
}
