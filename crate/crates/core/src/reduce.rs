//! Popcount reduction of 256-bit descriptors to 16 small integers, and the
//! experiment checking that Hamming distance before the reduction tracks
//! squared Euclidean distance after it.

use std::io::Write;

use rand::seq::index;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::orb::Descriptor256;
use crate::stats;

pub const GROUP_BITS: usize = 16;
pub const DIMS: usize = 256 / GROUP_BITS;
/// Each component takes values 0..=16.
pub const CATEGORIES: usize = GROUP_BITS + 1;

/// Per-group popcounts of a descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ReducedVec(pub [u8; DIMS]);

impl ReducedVec {
    pub fn components(&self) -> &[u8; DIMS] {
        &self.0
    }

    pub fn sum(&self) -> u32 {
        self.0.iter().map(|&c| c as u32).sum()
    }
}

impl AsRef<[u8]> for ReducedVec {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

pub fn reduce_descriptor(d: &Descriptor256) -> ReducedVec {
    let mut out = [0u8; DIMS];
    for (g, c) in out.iter_mut().enumerate() {
        *c = (d.0[2 * g].count_ones() + d.0[2 * g + 1].count_ones()) as u8;
    }
    ReducedVec(out)
}

pub fn hamming(a: &Descriptor256, b: &Descriptor256) -> u32 {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| (x ^ y).count_ones())
        .sum()
}

pub fn sq_euclidean(u: &ReducedVec, v: &ReducedVec) -> u32 {
    u.0.iter()
        .zip(&v.0)
        .map(|(&a, &b)| {
            let d = a as i32 - b as i32;
            (d * d) as u32
        })
        .sum()
}

/// Summary of squared Euclidean distances for one Hamming distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub d: u32,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub rows: Vec<DistanceRow>,
}

impl CorrelationReport {
    /// `d,mean_sq_euclidean,variance` per Hamming distance.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "d,mean_sq_euclidean,variance")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.d, r.mean, r.variance)?;
        }
        Ok(())
    }
}

fn random_pair(rng: &mut ChaCha8Rng, d: usize) -> (Descriptor256, Descriptor256) {
    let mut a = Descriptor256::ZERO;
    rng.fill_bytes(&mut a.0);
    let mut b = a;
    for i in index::sample(rng, 256, d) {
        b.flip(i);
    }
    (a, b)
}

/// For each Hamming distance d in 1..=d_max, draw `pairs_per_distance`
/// uniform 256-bit vectors, flip d distinct random bits of each to form its
/// partner, and correlate d with the squared Euclidean distance of the
/// reduced pair. Distance d uses its own ChaCha8 stream seeded with
/// `seed + d`, so the result does not depend on the thread count.
pub fn correlation_experiment(
    pairs_per_distance: usize,
    d_max: u32,
    seed: u64,
) -> Result<CorrelationReport> {
    if pairs_per_distance < 100 {
        return Err(Error::InvalidArgument(format!(
            "pairs_per_distance must be at least 100, got {pairs_per_distance}"
        )));
    }
    if !(1..=256).contains(&d_max) {
        return Err(Error::InvalidArgument(format!(
            "d_max must be in 1..=256, got {d_max}"
        )));
    }
    let per_d: Vec<Vec<u32>> = (1..=d_max)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(d as u64));
            (0..pairs_per_distance)
                .map(|_| {
                    let (a, b) = random_pair(&mut rng, d as usize);
                    debug_assert_eq!(hamming(&a, &b), d);
                    sq_euclidean(&reduce_descriptor(&a), &reduce_descriptor(&b))
                })
                .collect()
        })
        .collect();

    let rows = per_d
        .iter()
        .zip(1..)
        .map(|(ys, d)| {
            let n = ys.len() as f64;
            let mean = ys.iter().map(|&y| y as f64).sum::<f64>() / n;
            let variance = ys.iter().map(|&y| (y as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
            DistanceRow { d, mean, variance }
        })
        .collect();

    let xs: Vec<f64> = per_d
        .iter()
        .zip(1..)
        .flat_map(|(ys, d)| std::iter::repeat_n(d as f64, ys.len()))
        .collect();
    let ys: Vec<f64> = per_d.iter().flatten().map(|&y| y as f64).collect();
    let (rho, p_value) = stats::pearson(&xs, &ys)?;
    Ok(CorrelationReport {
        rho,
        p_value,
        n: xs.len(),
        rows,
    })
}
