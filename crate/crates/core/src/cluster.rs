//! k-means over reduced feature vectors: k-means++ seeding followed by
//! Lloyd iterations.
//!
//! Inputs are small integers, so per-cluster coordinate sums are kept in
//! exact integer arithmetic. Each point's assignment is computed
//! independently, which makes results identical for any worker count.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::reduce::{ReducedVec, DIMS};

pub type Centroid = [f64; DIMS];

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Centroid>,
    pub assignments: Vec<u32>,
    pub sizes: Vec<u64>,
    pub inertia: f64,
    pub iterations: usize,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

#[cfg(test)]
fn sq_dist(x: &ReducedVec, c: &Centroid) -> f64 {
    x.0.iter()
        .zip(c)
        .map(|(&a, &b)| {
            let d = a as f64 - b;
            d * d
        })
        .sum()
}

#[inline]
fn sq_dist_int(a: &ReducedVec, b: &ReducedVec) -> u64 {
    a.0.iter()
        .zip(&b.0)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum()
}

fn to_centroid(x: &ReducedVec) -> Centroid {
    let mut c = [0.0; DIMS];
    for (o, &v) in c.iter_mut().zip(&x.0) {
        *o = v as f64;
    }
    c
}

/// Index of the nearest centroid and its squared distance; ties go to the
/// lowest index.
pub fn nearest(x: &ReducedVec, centroids: &[Centroid]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        // partial sums only grow, so stopping once they reach the best
        // distance cannot change the argmin
        let mut d = 0.0;
        for (&a, &b) in x.0.iter().zip(c) {
            let t = a as f64 - b;
            d += t * t;
            if d >= best.1 {
                break;
            }
        }
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub fn assign(x: &ReducedVec, centroids: &[Centroid]) -> usize {
    assert!(!centroids.is_empty(), "assign needs at least one centroid");
    nearest(x, centroids).0
}

pub fn distinct_count(data: &[ReducedVec]) -> usize {
    data.iter().collect::<HashSet<_>>().len()
}

/// k-means++ seeding. The first centre is uniform over the data; each later
/// one is drawn with probability proportional to its squared distance from
/// the nearest centre chosen so far. Distances are exact integers, so the
/// draw is exact as well.
pub fn kmeans_pp_seed(data: &[ReducedVec], k: usize, seed: u64) -> Result<Vec<Centroid>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let distinct = distinct_count(data);
    if k > distinct {
        return Err(Error::TooFewPoints { k, distinct });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..data.len());
    let mut chosen = vec![data[first]];
    let mut d2: Vec<u64> = data
        .par_iter()
        .map(|x| sq_dist_int(x, &data[first]))
        .collect();
    while chosen.len() < k {
        let total: u64 = d2.iter().sum();
        debug_assert!(total > 0, "distinct points remain");
        let target = rng.random_range(0..total);
        let mut acc = 0u64;
        let mut pick = data.len() - 1;
        for (i, &w) in d2.iter().enumerate() {
            acc += w;
            if acc > target {
                pick = i;
                break;
            }
        }
        let c = data[pick];
        chosen.push(c);
        d2.par_iter_mut()
            .zip(data.par_iter())
            .for_each(|(d, x)| *d = (*d).min(sq_dist_int(x, &c)));
    }
    Ok(chosen.iter().map(to_centroid).collect())
}

fn assign_all(data: &[ReducedVec], centroids: &[Centroid]) -> (Vec<u32>, Vec<f64>) {
    data.par_iter()
        .map(|x| {
            let (j, d) = nearest(x, centroids);
            (j as u32, d)
        })
        .unzip()
}

/// Sum a slice in index order.
fn ordered_sum(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |a, &b| a + b)
}

/// Lloyd iterations from the given initial centres.
///
/// Stops when no centre moves by `tol` or more, or after `max_iter` updates.
/// A cluster left empty by an assignment step is re-seeded at the point
/// farthest from its current centre. Panics if the inertia ever increases.
pub fn lloyd(data: &[ReducedVec], init: &[Centroid], max_iter: usize, tol: f64) -> Clustering {
    assert!(!init.is_empty(), "lloyd needs at least one centroid");
    assert!(max_iter >= 1, "max_iter must be at least 1");
    let k = init.len();
    let mut centroids = init.to_vec();
    let (mut assignments, mut dists) = assign_all(data, &centroids);
    let mut inertia = ordered_sum(&dists);
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        reseed_empty(data, k, &mut assignments, &mut dists);

        let mut sums = vec![[0u64; DIMS]; k];
        let mut counts = vec![0u64; k];
        for (x, &j) in data.iter().zip(&assignments) {
            let s = &mut sums[j as usize];
            for (acc, &v) in s.iter_mut().zip(&x.0) {
                *acc += v as u64;
            }
            counts[j as usize] += 1;
        }
        let mut movement: f64 = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                // only possible when there are fewer points than clusters
                continue;
            }
            let mut c = [0.0; DIMS];
            for (o, &s) in c.iter_mut().zip(&sums[j]) {
                *o = s as f64 / counts[j] as f64;
            }
            let shift: f64 = c
                .iter()
                .zip(&centroids[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            movement = movement.max(shift);
            centroids[j] = c;
        }

        let (a, d) = assign_all(data, &centroids);
        let next = ordered_sum(&d);
        assert!(
            next <= inertia + 1e-9 * inertia.abs().max(1.0),
            "k-means inertia increased from {inertia} to {next}"
        );
        assignments = a;
        dists = d;
        inertia = next;
        if movement < tol {
            break;
        }
    }

    let mut sizes = vec![0u64; k];
    for &j in &assignments {
        sizes[j as usize] += 1;
    }
    Clustering {
        centroids,
        assignments,
        sizes,
        inertia,
        iterations,
    }
}

/// Move the farthest points into empty clusters. Candidates come from
/// clusters with more than one member and are taken in order of decreasing
/// distance (lowest index first on ties), skipping coordinates already used.
fn reseed_empty(data: &[ReducedVec], k: usize, assignments: &mut [u32], dists: &mut [f64]) {
    let mut counts = vec![0u64; k];
    for &j in assignments.iter() {
        counts[j as usize] += 1;
    }
    let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    if empty.is_empty() {
        return;
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
    let mut used = HashSet::new();
    let mut candidates = order.into_iter();
    for j in empty {
        for i in candidates.by_ref() {
            let from = assignments[i] as usize;
            if counts[from] > 1 && dists[i] > 0.0 && used.insert(data[i]) {
                counts[from] -= 1;
                counts[j] += 1;
                assignments[i] = j as u32;
                dists[i] = 0.0;
                break;
            }
        }
    }
}

/// Seed with k-means++ and run Lloyd to convergence.
pub fn kmeans(
    data: &[ReducedVec],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<Clustering> {
    kmeans_restarts(data, k, seed, 1, max_iter, tol)
}

/// Seed for restart `r`; restart 0 uses `seed` itself.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Best of `restarts` independent k-means++ runs by inertia, ties to the
/// earliest run. A single run can settle in a local minimum where two
/// centroids share one group and one centroid spans two.
pub fn kmeans_restarts(
    data: &[ReducedVec],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
    tol: f64,
) -> Result<Clustering> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let mut best: Option<Clustering> = None;
    for r in 0..restarts {
        let init = kmeans_pp_seed(data, k, restart_seed(seed, r))?;
        let c = lloyd(data, &init, max_iter, tol);
        if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
            best = Some(c);
        }
    }
    Ok(best.expect("at least one run"))
}
