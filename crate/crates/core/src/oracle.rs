//! Exact software references: L1 distances, nearest-neighbor classification
//! and exhaustive mismatch statistics over value pairs.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{cell_mismatch, encode, EncodedVector, QuantizedVector, Scheme};
use crate::error::{EncodingError, OracleError};

pub fn l1_distance(q: &QuantizedVector, s: &QuantizedVector) -> Result<u64, OracleError> {
    if q.dim() != s.dim() {
        return Err(OracleError::DimensionMismatch(q.dim(), s.dim()));
    }
    Ok(q.values()
        .iter()
        .zip(s.values())
        .map(|(&a, &b)| u64::from(a.abs_diff(b)))
        .sum())
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Plain L1 on the quantized codes.
    #[default]
    L1,
    /// L1 after mapping both vectors onto a common grid: a query on `Lq` levels
    /// and a support on `Ls` levels compare as `|q * (Ls-1) - s * (Lq-1)|`,
    /// divided by `gcd(Lq-1, Ls-1)`. For a 4-level query and an MTMC support
    /// with `3*cl + 1` levels this is `|cl * q - s|`.
    CrossLevel,
}

pub fn distance(metric: Metric, q: &QuantizedVector, s: &QuantizedVector) -> Result<u64, OracleError> {
    match metric {
        Metric::L1 => l1_distance(q, s),
        Metric::CrossLevel => {
            if q.dim() != s.dim() {
                return Err(OracleError::DimensionMismatch(q.dim(), s.dim()));
            }
            let (qs, ss) = (u64::from(q.levels() - 1), u64::from(s.levels() - 1));
            let g = gcd(qs, ss);
            let (a, b) = (ss / g, qs / g);
            Ok(q.values()
                .iter()
                .zip(s.values())
                .map(|(&x, &y)| (u64::from(x) * a).abs_diff(u64::from(y) * b))
                .sum())
        }
    }
}

/// Label of the nearest support.
///
/// When several supports share the minimum distance, the label held by most
/// of them wins, and remaining ties go to the lowest label. This is the same
/// decision a top-current sense followed by class voting makes.
pub fn nn_classify(
    query: &QuantizedVector,
    supports: &[QuantizedVector],
    labels: &[u32],
    metric: Metric,
) -> Result<u32, OracleError> {
    if supports.is_empty() {
        return Err(OracleError::EmptySupports);
    }
    if labels.len() != supports.len() {
        return Err(OracleError::LabelCount {
            labels: labels.len(),
            supports: supports.len(),
        });
    }
    let dists = supports
        .iter()
        .map(|s| distance(metric, query, s))
        .collect::<Result<Vec<_>, _>>()?;
    let best = *dists.iter().min().expect("non-empty");
    let mut tally: BTreeMap<u32, usize> = BTreeMap::new();
    for (&d, &l) in dists.iter().zip(labels) {
        if d == best {
            *tally.entry(l).or_default() += 1;
        }
    }
    let top = *tally.values().max().expect("non-empty");
    Ok(*tally.iter().find(|(_, &c)| c == top).expect("non-empty").0)
}

/// Largest per-position mismatch between two encodings of one dimension.
pub fn max_mismatch(a: &[crate::encoding::CodeWord], b: &[crate::encoding::CodeWord]) -> u8 {
    a.iter().zip(b).map(|(&x, &y)| cell_mismatch(x, y)).max().unwrap_or(0)
}

/// Occurrence of each max-mismatch class over all ordered value pairs,
/// binned by distance `|a - b|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchStats {
    pub scheme: Scheme,
    pub cl: usize,
    pub levels: u32,
    /// `counts[distance][class]`.
    pub counts: Vec<[u64; 4]>,
}

impl MismatchStats {
    /// Class fractions at one distance; zeros if no pair has that distance.
    pub fn fractions(&self, distance: usize) -> [f64; 4] {
        normalize(self.counts[distance])
    }

    /// Class fractions over all pairs.
    pub fn overall(&self) -> [f64; 4] {
        let mut total = [0u64; 4];
        for c in &self.counts {
            for k in 0..4 {
                total[k] += c[k];
            }
        }
        normalize(total)
    }

    /// Writes `scheme,cl,distance,class,fraction` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["scheme", "cl", "distance", "class", "fraction"])?;
        for distance in 0..self.counts.len() {
            let f = self.fractions(distance);
            for (class, frac) in f.iter().enumerate() {
                out.write_record([
                    self.scheme.to_string(),
                    self.cl.to_string(),
                    distance.to_string(),
                    class.to_string(),
                    format!("{frac}"),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn normalize(c: [u64; 4]) -> [f64; 4] {
    let n: u64 = c.iter().sum();
    if n == 0 {
        return [0.0; 4];
    }
    c.map(|x| x as f64 / n as f64)
}

/// Exhaustive scan over all `levels * levels` ordered value pairs.
pub fn mismatch_distribution(scheme: Scheme, cl: usize, levels: u32) -> Result<MismatchStats, OracleError> {
    if levels < 2 {
        return Err(EncodingError::InvalidConfig(format!("levels must be at least 2, got {levels}")).into());
    }
    let all = QuantizedVector::with_levels((0..levels).collect(), levels)?;
    let table: EncodedVector = encode(&all, scheme, cl)?;
    let counts = (0..levels as usize)
        .into_par_iter()
        .map(|a| {
            let mut local = vec![[0u64; 4]; levels as usize];
            let wa = table.dimension(a);
            for b in 0..levels as usize {
                let class = max_mismatch(wa, table.dimension(b));
                local[a.abs_diff(b)][usize::from(class)] += 1;
            }
            local
        })
        .reduce(
            || vec![[0u64; 4]; levels as usize],
            |mut acc, local| {
                for (x, y) in acc.iter_mut().zip(local) {
                    for k in 0..4 {
                        x[k] += y[k];
                    }
                }
                acc
            },
        );
    Ok(MismatchStats {
        scheme,
        cl,
        levels,
        counts,
    })
}

/// Per-cell mismatch-level fractions between encoded queries and supports, split
/// into same-class (target) and different-class (non-target) pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMismatchHistogram {
    pub target: [f64; 4],
    pub non_target: [f64; 4],
}

pub fn pair_mismatch_histogram(
    queries: &[EncodedVector],
    query_labels: &[u32],
    supports: &[EncodedVector],
    support_labels: &[u32],
) -> Result<PairMismatchHistogram, OracleError> {
    if queries.len() != query_labels.len() {
        return Err(OracleError::LabelCount {
            labels: query_labels.len(),
            supports: queries.len(),
        });
    }
    if supports.len() != support_labels.len() {
        return Err(OracleError::LabelCount {
            labels: support_labels.len(),
            supports: supports.len(),
        });
    }
    let mut target = [0u64; 4];
    let mut non_target = [0u64; 4];
    for (q, ql) in queries.iter().zip(query_labels) {
        for (s, sl) in supports.iter().zip(support_labels) {
            if q.words().len() != s.words().len() {
                return Err(OracleError::DimensionMismatch(q.words().len(), s.words().len()));
            }
            let bucket = if ql == sl { &mut target } else { &mut non_target };
            for (&a, &b) in q.words().iter().zip(s.words()) {
                bucket[usize::from(cell_mismatch(a, b))] += 1;
            }
        }
    }
    Ok(PairMismatchHistogram {
        target: normalize(target),
        non_target: normalize(non_target),
    })
}
