//! Corpus scanning, per-image feature extraction and the on-disk formats
//! for manifests (JSON Lines) and feature stores (`FNFS` binary).

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::gray::load_grayscale;
use crate::orb::OrbExtractor;
use crate::reduce::{reduce_descriptor, ReducedVec, DIMS};

pub const DEFAULT_MAX_KEYPOINTS: usize = 500;
pub const STORE_MAGIC: &[u8; 4] = b"FNFS";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub width: u32,
    pub height: u32,
    pub keypoint_count: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    pub total_images: usize,
}

impl CorpusManifest {
    /// One JSON object per line, in entry order.
    pub fn write_jsonl(&self, w: impl Write) -> Result<()> {
        let mut w = BufWriter::new(w);
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)
                .map_err(|e| Error::Format(format!("serializing manifest: {e}")))?;
            w.write_all(b"\n").map_err(|e| Error::io("<manifest>", e))?;
        }
        w.flush().map_err(|e| Error::io("<manifest>", e))
    }

    pub fn read_jsonl(r: impl Read) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line.map_err(|e| Error::io("<manifest>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: ManifestEntry = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("manifest line {}: {e}", lineno + 1)))?;
            entries.push(e);
        }
        let total_images = entries.len();
        Ok(Self {
            entries,
            total_images,
        })
    }
}

/// A file that could not be decoded during a scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub manifest: CorpusManifest,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureRecord {
    pub image_index: u32,
    pub reduced: ReducedVec,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureStore {
    pub records: Vec<FeatureRecord>,
}

impl FeatureStore {
    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn vectors(&self) -> Vec<ReducedVec> {
        self.records.iter().map(|r| r.reduced).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.records.len() * (4 + DIMS));
        out.extend_from_slice(STORE_MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&r.image_index.to_le_bytes());
            out.extend_from_slice(&r.reduced.0);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Truncated(format!(
                "feature store header needs 16 bytes, got {}",
                bytes.len()
            )));
        }
        if &bytes[..4] != STORE_MAGIC {
            return Err(Error::Format("bad feature store magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != STORE_VERSION {
            return Err(Error::Version {
                found: version,
                expected: STORE_VERSION,
            });
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let rec = 4 + DIMS;
        let body = &bytes[16..];
        let expected = (count as u128) * rec as u128;
        if (body.len() as u128) < expected {
            return Err(Error::Truncated(format!(
                "{count} records need {expected} bytes, found {}",
                body.len()
            )));
        }
        if (body.len() as u128) > expected {
            return Err(Error::Format("trailing bytes after feature records".into()));
        }
        let records = body
            .chunks_exact(rec)
            .map(|c| {
                let mut reduced = [0u8; DIMS];
                reduced.copy_from_slice(&c[4..]);
                FeatureRecord {
                    image_index: u32::from_le_bytes(c[..4].try_into().unwrap()),
                    reduced: ReducedVec(reduced),
                }
            })
            .collect::<Vec<_>>();
        if records.iter().any(|r| r.reduced.0.iter().any(|&v| v > 16)) {
            return Err(Error::Format("reduced component above 16".into()));
        }
        Ok(Self { records })
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

/// All regular files under `root`, recursively, in lexicographic path order.
pub fn list_files(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.is_dir() {
        return Err(Error::MissingRoot(root.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

struct Extracted {
    entry: ManifestEntry,
    features: Vec<ReducedVec>,
}

fn extract_one(path: &Path, extractor: &OrbExtractor, max_keypoints: usize) -> Result<Extracted> {
    let img = load_grayscale(path)?;
    let kps = extractor.top_keypoints(&img, max_keypoints);
    Ok(Extracted {
        entry: ManifestEntry {
            path: path.to_string_lossy().into_owned(),
            width: img.width() as u32,
            height: img.height() as u32,
            keypoint_count: kps.len() as u32,
        },
        features: kps.iter().map(|(_, d)| reduce_descriptor(d)).collect(),
    })
}

/// Decode every file under `root`, extract the top `max_keypoints` ORB
/// features of each image and reduce them. Undecodable files are logged and
/// skipped. Records are ordered by image, then by descending response.
pub fn extract_corpus(
    root: &Path,
    extractor: &OrbExtractor,
    max_keypoints: usize,
) -> Result<(ScanReport, FeatureStore)> {
    let files = list_files(root)?;
    let results: Vec<_> = files
        .par_iter()
        .map(|p| extract_one(p, extractor, max_keypoints))
        .collect();

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    let mut records = Vec::new();
    for (path, res) in files.into_iter().zip(results) {
        match res {
            Ok(ex) => {
                let image_index = entries.len() as u32;
                records.extend(ex.features.into_iter().map(|reduced| FeatureRecord {
                    image_index,
                    reduced,
                }));
                entries.push(ex.entry);
            }
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                skipped.push(Skipped {
                    path,
                    reason: e.to_string(),
                });
            }
        }
    }
    let total_images = entries.len();
    Ok((
        ScanReport {
            manifest: CorpusManifest {
                entries,
                total_images,
            },
            skipped,
        },
        FeatureStore { records },
    ))
}

pub fn scan_corpus(
    root: &Path,
    extractor: &OrbExtractor,
    max_keypoints: usize,
) -> Result<ScanReport> {
    extract_corpus(root, extractor, max_keypoints).map(|(report, _)| report)
}

/// Keep `round(fraction * count)` records chosen uniformly without
/// replacement by a ChaCha8 stream seeded with `seed`. Survivors keep their
/// relative order.
pub fn sample_features(store: &FeatureStore, fraction: f64, seed: u64) -> Result<FeatureStore> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sample fraction must be in (0, 1], got {fraction}"
        )));
    }
    let n = store.count();
    let keep = ((fraction * n as f64).round() as usize).min(n);
    if keep == n {
        return Ok(store.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, keep).into_vec();
    picked.sort_unstable();
    Ok(FeatureStore {
        records: picked.into_iter().map(|i| store.records[i]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store(n: usize) -> FeatureStore {
        FeatureStore {
            records: (0..n)
                .map(|i| {
                    let mut v = [0u8; DIMS];
                    v.iter_mut()
                        .enumerate()
                        .for_each(|(d, c)| *c = ((i + d) % 17) as u8);
                    FeatureRecord {
                        image_index: (i / 10) as u32,
                        reduced: ReducedVec(v),
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn full_fraction_is_identity() {
        let s = store(50);
        assert_eq!(sample_features(&s, 1.0, 3).unwrap(), s);
    }

    #[test]
    fn one_in_twenty_seven() {
        let s = store(27_000);
        let out = sample_features(&s, 1.0 / 27.0, 1).unwrap();
        assert_eq!(out.count(), 1000);
        assert_eq!(out, sample_features(&s, 1.0 / 27.0, 1).unwrap());
        assert_eq!(
            out.to_bytes(),
            sample_features(&s, 1.0 / 27.0, 1).unwrap().to_bytes()
        );
        assert_ne!(out, sample_features(&s, 1.0 / 27.0, 2).unwrap());
    }

    #[test]
    fn bad_fraction() {
        let s = store(5);
        for f in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(
                sample_features(&s, f, 0),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn store_roundtrip_and_errors() {
        let s = store(20);
        let b = s.to_bytes();
        assert_eq!(&b[..4], b"FNFS");
        assert_eq!(b.len(), 16 + 20 * 20);
        assert_eq!(FeatureStore::from_bytes(&b).unwrap(), s);
        assert!(matches!(
            FeatureStore::from_bytes(&b[..b.len() - 1]),
            Err(Error::Truncated(_))
        ));
        assert!(matches!(
            FeatureStore::from_bytes(&b[..8]),
            Err(Error::Truncated(_))
        ));
        let mut bad = b.clone();
        bad[1] = b'X';
        assert!(matches!(
            FeatureStore::from_bytes(&bad),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn manifest_jsonl_roundtrip() {
        let m = CorpusManifest {
            entries: vec![
                ManifestEntry {
                    path: "a/b.png".into(),
                    width: 10,
                    height: 20,
                    keypoint_count: 3,
                },
                ManifestEntry {
                    path: "a/c.png".into(),
                    width: 11,
                    height: 21,
                    keypoint_count: 0,
                },
            ],
            total_images: 2,
        };
        let mut buf = Vec::new();
        m.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"path":"a/b.png","width":10,"height":20,"keypoint_count":3}"#
        );
        assert_eq!(CorpusManifest::read_jsonl(&buf[..]).unwrap(), m);
    }

    proptest! {
        #[test]
        fn sample_is_ordered_subset(n in 1usize..400, frac in 0.001f64..=1.0, seed in any::<u64>()) {
            let s = store(n);
            let out = sample_features(&s, frac, seed).unwrap();
            prop_assert_eq!(out.count(), ((frac * n as f64).round() as usize).min(n));
            // indices into the input must be strictly increasing
            let mut pos = 0;
            for r in &out.records {
                let found = s.records[pos..].iter().position(|q| q == r);
                prop_assert!(found.is_some());
                pos += found.unwrap() + 1;
            }
        }
    }
}
