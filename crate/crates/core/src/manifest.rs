//! Dataset manifest: one CSV row per package, with paths relative to the
//! manifest's directory, plus the seeded 8:1:1 split.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provenance::VulnType;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("duplicate package `{0}` in manifest")]
    DuplicatePackage(String),
    #[error("splitting needs at least 3 packages, got {0}")]
    TooFewPackages(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validate,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validate" | "val" => Ok(Split::Validate),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub package: String,
    pub graph_path: String,
    pub source_path: String,
    pub vuln_type: VulnType,
    pub label: Option<bool>,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory that relative paths in the rows resolve against.
    pub base_dir: PathBuf,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn new(base_dir: impl Into<PathBuf>, rows: Vec<ManifestRow>) -> Result<Self, ManifestError> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(r.package.as_str()) {
                return Err(ManifestError::DuplicatePackage(r.package.clone()));
            }
        }
        Ok(Self { base_dir: base_dir.into(), rows })
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        let csv_err = |e: csv::Error| ManifestError::Csv { path: path.to_path_buf(), message: e.to_string() };
        let file = std::fs::File::open(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
        let mut reader = csv::Reader::from_reader(file);
        let rows = reader.deserialize().collect::<Result<Vec<ManifestRow>, _>>().map_err(csv_err)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(base, rows)
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        let csv_err = |e: csv::Error| ManifestError::Csv { path: path.to_path_buf(), message: e.to_string() };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        if self.rows.is_empty() {
            w.write_record(["package", "graph_path", "source_path", "vuln_type", "label", "split"]).map_err(csv_err)?;
        }
        for r in &self.rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush().map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }

    pub fn rows_in(&self, split: Split) -> Vec<&ManifestRow> {
        self.rows.iter().filter(|r| r.split == Some(split)).collect()
    }

    pub fn subset(&self, split: Split) -> Manifest {
        Manifest { base_dir: self.base_dir.clone(), rows: self.rows_in(split).into_iter().cloned().collect() }
    }
}

/// (train, validate, test) sizes for `n` packages: ⌊8n/10⌋ and ⌊n/10⌋ for
/// the first two, the remainder to test. 1,883 → 1,506/188/189.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = 8 * n / 10;
    let val = n / 10;
    (train, val, n - train - val)
}

/// Shuffles with `seed` and assigns the first [`split_sizes`] rows to
/// train, the next to validate, the rest to test. Existing split values are
/// overwritten.
pub fn split_dataset(manifest: &Manifest, seed: u64) -> Result<Manifest, ManifestError> {
    let n = manifest.rows.len();
    if n < 3 {
        return Err(ManifestError::TooFewPackages(n));
    }
    let (train, val, _) = split_sizes(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rows = manifest.rows.clone();
    for (rank, &i) in order.iter().enumerate() {
        rows[i].split = Some(if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Validate
        } else {
            Split::Test
        });
    }
    Ok(Manifest { base_dir: manifest.base_dir.clone(), rows })
}
