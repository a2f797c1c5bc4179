//! Labeled vector tables: binary and CSV interchange plus a synthetic generator.
//!
//! Binary layout (little endian):
//!
//! ```text
//! magic   8 bytes  "MCAMVEC1"
//! dim     u32
//! count   u32
//! rows    count x (dim x f32, label u32)
//! ```
//!
//! CSV layout: a header `label,x0,x1,...` followed by one row per vector.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"MCAMVEC1";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown vector format '{0}' (expected bin or csv)")]
    UnknownFormat(String),
    #[error("row {row} has dimension {found}, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("not a vector file: bad magic")]
    BadMagic,
    #[error("file truncated: expected {expected} rows, read {read}")]
    Truncated { expected: usize, read: usize },
    #[error("vector table is empty")]
    Empty,
    #[error(
        "need {needed} classes with at least {min_members} members each, found {eligible} of {total_classes} classes"
    )]
    InsufficientClasses {
        needed: usize,
        eligible: usize,
        total_classes: usize,
        min_members: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorFormat {
    Bin,
    Csv,
}

impl VectorFormat {
    /// Guess from the file extension.
    pub fn from_path(path: &Path) -> Result<Self, DataError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default();
        ext.parse()
    }
}

impl FromStr for VectorFormat {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bin" | "mcv" => Ok(VectorFormat::Bin),
            "csv" => Ok(VectorFormat::Csv),
            other => Err(DataError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub label: u32,
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorTable {
    dim: usize,
    rows: Vec<LabeledVector>,
}

impl VectorTable {
    pub fn new(rows: Vec<LabeledVector>) -> Result<Self, DataError> {
        let dim = rows.first().ok_or(DataError::Empty)?.values.len();
        for (row, r) in rows.iter().enumerate() {
            if r.values.len() != dim {
                return Err(DataError::Ragged {
                    row,
                    expected: dim,
                    found: r.values.len(),
                });
            }
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(DataError::Parse {
                    row,
                    message: "non-finite value".into(),
                });
            }
        }
        Ok(Self { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[LabeledVector] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_table(path: &Path, format: VectorFormat) -> Result<VectorTable, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    match format {
        VectorFormat::Bin => read_bin(BufReader::new(file), path),
        VectorFormat::Csv => read_csv(BufReader::new(file)),
    }
}

pub fn write_table(path: &Path, table: &VectorTable, format: VectorFormat) -> Result<(), DataError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    match format {
        VectorFormat::Bin => {
            w.write_all(MAGIC).map_err(io_err(path))?;
            w.write_all(&(table.dim as u32).to_le_bytes()).map_err(io_err(path))?;
            w.write_all(&(table.rows.len() as u32).to_le_bytes()).map_err(io_err(path))?;
            for r in &table.rows {
                for v in &r.values {
                    w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
                }
                w.write_all(&r.label.to_le_bytes()).map_err(io_err(path))?;
            }
        }
        VectorFormat::Csv => {
            let mut out = csv::Writer::from_writer(&mut w);
            let header: Vec<String> = std::iter::once("label".to_string())
                .chain((0..table.dim).map(|i| format!("x{i}")))
                .collect();
            let csv_err = |e: csv::Error| DataError::Parse {
                row: 0,
                message: e.to_string(),
            };
            out.write_record(&header).map_err(csv_err)?;
            for r in &table.rows {
                // `{}` on f32 prints the shortest string that reads back identically
                let rec: Vec<String> = std::iter::once(r.label.to_string())
                    .chain(r.values.iter().map(|v| v.to_string()))
                    .collect();
                out.write_record(&rec).map_err(csv_err)?;
            }
            out.flush().map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

fn read_bin<R: Read>(mut r: R, path: &Path) -> Result<VectorTable, DataError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| DataError::BadMagic)?;
    if &magic != MAGIC {
        return Err(DataError::BadMagic);
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(io_err(path))?;
    let dim = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word).map_err(io_err(path))?;
    let count = u32::from_le_bytes(word) as usize;
    let mut rows = Vec::with_capacity(count.min(1 << 20));
    let mut buf = vec![0u8; 4 * (dim + 1)];
    for read in 0..count {
        if r.read_exact(&mut buf).is_err() {
            return Err(DataError::Truncated { expected: count, read });
        }
        let values = buf[..4 * dim]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let label = u32::from_le_bytes(buf[4 * dim..].try_into().expect("4 bytes"));
        rows.push(LabeledVector { label, values });
    }
    VectorTable::new(rows)
}

fn read_csv<R: Read>(r: R) -> Result<VectorTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows = Vec::new();
    let mut dim = None;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| DataError::Parse {
            row,
            message: e.to_string(),
        })?;
        let found = rec.len().saturating_sub(1);
        let expected = *dim.get_or_insert(found);
        if found != expected {
            return Err(DataError::Ragged { row, expected, found });
        }
        let parse_err = |message: String| DataError::Parse { row, message };
        let label = rec[0]
            .parse::<u32>()
            .map_err(|e| parse_err(format!("label '{}': {e}", &rec[0])))?;
        let values = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f32>().map_err(|e| parse_err(format!("value '{f}': {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(LabeledVector { label, values });
    }
    VectorTable::new(rows)
}

/// Gaussian class clusters with non-negative features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Class centers are uniform in `[0, separation]` per dimension.
    pub separation: f64,
    /// Within-class standard deviation.
    pub spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 50,
            per_class: 20,
            dim: 48,
            separation: 4.0,
            spread: 1.0,
            seed: 0,
        }
    }
}

/// Points are `max(0, center + N(0, spread))`, labels `0..classes`.
pub fn synthetic_clusters(cfg: &SynthConfig) -> Result<VectorTable, DataError> {
    if cfg.classes == 0 || cfg.per_class == 0 || cfg.dim == 0 {
        return Err(DataError::Empty);
    }
    let bad = |message: String| DataError::Parse { row: 0, message };
    let centers_dist = Uniform::new_inclusive(0.0, cfg.separation).map_err(|e| bad(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.spread).map_err(|e| bad(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.classes * cfg.per_class);
    for label in 0..cfg.classes {
        let center: Vec<f64> = (0..cfg.dim).map(|_| centers_dist.sample(&mut rng)).collect();
        for _ in 0..cfg.per_class {
            let values = center
                .iter()
                .map(|c| (c + noise.sample(&mut rng)).max(0.0) as f32)
                .collect();
            rows.push(LabeledVector {
                label: label as u32,
                values,
            });
        }
    }
    VectorTable::new(rows)
}
