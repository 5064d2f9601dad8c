//! The null model: a mixture over k-means clusters in which each cluster
//! treats the vector components as independent categorical variables.
//!
//! With cluster sizes |C_j| out of N points and per-cluster category counts
//! c_{j,i,a}, the model is
//!
//! ```text
//! p(C_j)          = |C_j| / N
//! p(x_i = a | C_j) = (c_{j,i,a} + 1) / (|C_j| + L)      L = number of categories
//! ln p(x)          = logsumexp_j [ ln p(C_j) + sum_i ln p(x_i | C_j) ]
//! ```
//!
//! Models are persisted in a little-endian binary format (magic `FNDM`)
//! that also embeds the ORB parameters and test pattern used in training,
//! so scoring never depends on anything outside the model file.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::cluster::Clustering;
use crate::error::{Error, Result};
use crate::orb::{BriefPattern, OrbExtractor, OrbParams, TestPair, N_PAIRS};
use crate::reduce::{ReducedVec, CATEGORIES, DIMS};

pub const MAGIC: &[u8; 4] = b"FNDM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelMeta {
    /// Number of feature vectors the model was fitted on.
    pub n: u64,
    /// Creation time as Unix seconds (0 when unset, for reproducible files).
    pub created: i64,
    pub version: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitOptions {
    /// Keep empty clusters with weight zero (log weight -inf) and uniform
    /// tables instead of rejecting them.
    pub tolerate_empty: bool,
    pub created: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel {
    k: usize,
    dims: usize,
    categories: usize,
    log_weights: Vec<f64>,
    /// Flattened `[cluster][component][category]`.
    log_tables: Vec<f64>,
    /// Flattened `[cluster][component]`.
    centroids: Vec<f64>,
    extractor: OrbExtractor,
    meta: ModelMeta,
}

/// ln Σ exp(v), evaluated as m + ln Σ exp(v - m) with m = max v.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "log_sum_exp of an empty list".into(),
        ));
    }
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return Ok(m);
    }
    let s: f64 = values.iter().map(|&v| (v - m).exp()).sum();
    Ok(m + s.ln())
}

/// Fit a mixture of independent categoricals over arbitrary small-integer
/// vectors. `points[t][i]` must be below `categories`.
pub fn fit_categorical<P: AsRef<[u8]> + Sync>(
    points: &[P],
    dims: usize,
    categories: usize,
    assignments: &[u32],
    centroids: Vec<f64>,
    extractor: OrbExtractor,
    opts: FitOptions,
) -> Result<DensityModel> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cannot fit a model on zero points".into(),
        ));
    }
    if dims == 0 || categories < 2 {
        return Err(Error::InvalidArgument(format!(
            "need dims >= 1 and categories >= 2 (got {dims}, {categories})"
        )));
    }
    if assignments.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} assignments for {n} points",
            assignments.len()
        )));
    }
    if centroids.is_empty() || !centroids.len().is_multiple_of(dims) {
        return Err(Error::InvalidArgument(
            "centroid buffer is not a whole number of vectors".into(),
        ));
    }
    let k = centroids.len() / dims;
    let stride = dims * categories;

    for (p, &j) in points.iter().zip(assignments) {
        let p = p.as_ref();
        if p.len() != dims || p.iter().any(|&v| v as usize >= categories) {
            return Err(Error::InvalidArgument(format!(
                "point {p:?} does not fit {dims} components of {categories} categories"
            )));
        }
        if j as usize >= k {
            return Err(Error::InvalidArgument(format!(
                "assignment {j} out of range for {k} clusters"
            )));
        }
    }

    // integer counts merge exactly whatever the split between workers
    let (counts, sizes) = points
        .par_iter()
        .zip(assignments.par_iter())
        .fold(
            || (vec![0u64; k * stride], vec![0u64; k]),
            |(mut counts, mut sizes), (p, &j)| {
                let j = j as usize;
                sizes[j] += 1;
                for (i, &a) in p.as_ref().iter().enumerate() {
                    counts[j * stride + i * categories + a as usize] += 1;
                }
                (counts, sizes)
            },
        )
        .reduce(
            || (vec![0u64; k * stride], vec![0u64; k]),
            |(mut c1, mut s1), (c2, s2)| {
                c1.iter_mut().zip(&c2).for_each(|(a, b)| *a += b);
                s1.iter_mut().zip(&s2).for_each(|(a, b)| *a += b);
                (c1, s1)
            },
        );

    if !opts.tolerate_empty {
        if let Some(j) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyCluster(j));
        }
    }

    let log_weights = sizes.iter().map(|&s| (s as f64 / n as f64).ln()).collect();
    let log_tables = counts
        .iter()
        .enumerate()
        .map(|(idx, &c)| {
            let j = idx / stride;
            ((c + 1) as f64 / (sizes[j] + categories as u64) as f64).ln()
        })
        .collect();

    Ok(DensityModel {
        k,
        dims,
        categories,
        log_weights,
        log_tables,
        centroids,
        extractor,
        meta: ModelMeta {
            n: n as u64,
            created: opts.created,
            version: FORMAT_VERSION,
        },
    })
}

/// Fit the null model on reduced ORB features and their clustering.
pub fn fit(
    data: &[ReducedVec],
    clustering: &Clustering,
    extractor: OrbExtractor,
    opts: FitOptions,
) -> Result<DensityModel> {
    let centroids = clustering.centroids.iter().flatten().copied().collect();
    fit_categorical(
        data,
        DIMS,
        CATEGORIES,
        &clustering.assignments,
        centroids,
        extractor,
        opts,
    )
}

impl DensityModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// ln p(x_i = a | C_j) for a in 0..categories.
    pub fn log_table(&self, j: usize, i: usize) -> &[f64] {
        let start = (j * self.dims + i) * self.categories;
        &self.log_tables[start..start + self.categories]
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dims..(j + 1) * self.dims]
    }

    pub fn extractor(&self) -> &OrbExtractor {
        &self.extractor
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    /// h_j(x) = ln p(C_j) + Σ_i ln p(x_i | C_j).
    fn component_log_joint(&self, j: usize, x: &[u8]) -> f64 {
        let base = j * self.dims * self.categories;
        let mut h = self.log_weights[j];
        for (i, &a) in x.iter().enumerate() {
            h += self.log_tables[base + i * self.categories + a as usize];
        }
        h
    }

    /// ln p(x) under the mixture.
    pub fn log_prob(&self, x: &[u8]) -> Result<f64> {
        if x.len() != self.dims {
            return Err(Error::InvalidArgument(format!(
                "vector has {} components, model expects {}",
                x.len(),
                self.dims
            )));
        }
        if let Some(&bad) = x.iter().find(|&&v| v as usize >= self.categories) {
            return Err(Error::InvalidArgument(format!(
                "component value {bad} outside 0..{}",
                self.categories
            )));
        }
        let h: Vec<f64> = (0..self.k)
            .map(|j| self.component_log_joint(j, x))
            .collect();
        log_sum_exp(&h)
    }

    /// Largest deviation from 1 of the weight total and of every
    /// per-cluster, per-component categorical total.
    pub fn normalization_error(&self) -> f64 {
        let w: f64 = self.log_weights.iter().map(|v| v.exp()).sum();
        let mut worst = (w - 1.0).abs();
        for j in 0..self.k {
            for i in 0..self.dims {
                let t: f64 = self.log_table(j, i).iter().map(|v| v.exp()).sum();
                worst = worst.max((t - 1.0).abs());
            }
        }
        worst
    }

    /// `cluster,size,weight` rows for a weight histogram.
    pub fn write_weights_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "cluster,size,weight")?;
        for (j, lw) in self.log_weights.iter().enumerate() {
            let weight = lw.exp();
            let size = (weight * self.meta.n as f64).round() as u64;
            writeln!(w, "{j},{size},{weight}")?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = self.extractor.params();
        let pattern = self.extractor.pattern();
        let mut out = Vec::with_capacity(
            64 + 4 * N_PAIRS
                + 8 * (self.log_weights.len() + self.centroids.len() + self.log_tables.len()),
        );
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        out.extend_from_slice(&(self.categories as u32).to_le_bytes());
        out.extend_from_slice(&self.meta.n.to_le_bytes());
        out.extend_from_slice(&self.meta.created.to_le_bytes());
        out.extend_from_slice(&(p.n_levels as u32).to_le_bytes());
        out.extend_from_slice(&p.scale_factor.to_le_bytes());
        out.extend_from_slice(&(p.patch_radius as u32).to_le_bytes());
        out.extend_from_slice(&(p.fast_threshold as u32).to_le_bytes());
        out.extend_from_slice(&(pattern.pairs().len() as u32).to_le_bytes());
        for pair in pattern.pairs() {
            out.extend(pair.iter().map(|&v| v as u8));
        }
        for v in self
            .log_weights
            .iter()
            .chain(&self.centroids)
            .chain(&self.log_tables)
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {magic:02x?}, expected \"FNDM\""
            )));
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let k = r.u32("cluster count")? as usize;
        let dims = r.u32("dimension count")? as usize;
        let categories = r.u32("category count")? as usize;
        if k == 0 || dims == 0 || categories < 2 {
            return Err(Error::Format(format!(
                "invalid shape k={k} dims={dims} categories={categories}"
            )));
        }
        let n = r.u64("sample count")?;
        let created = r.u64("timestamp")? as i64;
        let n_levels = r.u32("pyramid levels")? as usize;
        let scale_factor = r.f64("scale factor")?;
        let patch_radius = r.u32("patch radius")? as usize;
        let fast_threshold = r.u32("FAST threshold")?;
        let n_pairs = r.u32("pair count")? as usize;
        if n_pairs != N_PAIRS {
            return Err(Error::Format(format!(
                "pattern has {n_pairs} pairs, expected {N_PAIRS}"
            )));
        }
        let raw = r.take(4 * n_pairs, "test pattern")?;
        let pairs: Vec<TestPair> = raw
            .chunks_exact(4)
            .map(|c| [c[0] as i8, c[1] as i8, c[2] as i8, c[3] as i8])
            .collect();
        if fast_threshold == 0 || fast_threshold > 255 || patch_radius == 0 || patch_radius > 100 {
            return Err(Error::Format("invalid detector parameters".into()));
        }
        let pattern = BriefPattern::from_pairs(patch_radius, pairs)?;
        let params = OrbParams {
            n_levels,
            scale_factor,
            patch_radius,
            fast_threshold: fast_threshold as u8,
        };
        let extractor = OrbExtractor::new(params, pattern)
            .map_err(|e| Error::Format(format!("invalid detector parameters: {e}")))?;

        let n_tables = k
            .checked_mul(dims)
            .and_then(|v| v.checked_mul(categories))
            .ok_or_else(|| Error::Format("model shape overflows".into()))?;
        let log_weights = r.f64s(k, "cluster weights")?;
        let centroids = r.f64s(k * dims, "centroids")?;
        let log_tables = r.f64s(n_tables, "probability tables")?;
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after model",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            k,
            dims,
            categories,
            log_weights,
            log_tables,
            centroids,
            extractor,
            meta: ModelMeta {
                n,
                created,
                version,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn save_model(model: &DensityModel, path: impl AsRef<Path>) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DensityModel> {
    DensityModel::load(path)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::Truncated(format!(
                    "reading {what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.buf.len()
                ))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::Format(format!("{what} size overflows")))?;
        Ok(self
            .take(bytes, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
