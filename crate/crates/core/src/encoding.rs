//! Quantization and the four code-word encodings stored in MCAM unit cells.
//!
//! Every encoder maps one quantized dimension onto `cl` code words of four
//! levels each. Code words of a vector are kept in dimension-major order:
//! all words of dimension 0, then all words of dimension 1, and so on.
//!
//! | scheme | words for value `m`                               | capacity      |
//! |--------|---------------------------------------------------|---------------|
//! | SRE    | `m` repeated `cl` times                           | 4             |
//! | B4E    | base-4 digits, most significant first             | `4^cl`        |
//! | B4WE   | B4E digit of weight `4^i` repeated `4^i` times    | `4^base_len`  |
//! | MTMC   | `cl - n` words of `x`, then `n` words of `x + 1`  | `3 * cl + 1`  |
//!
//! with `x = m / cl` and `n = m % cl` for MTMC.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::EncodingError;

/// Number of distinct levels one unit cell can hold.
pub const CELL_LEVELS: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantConfig {
    pub levels: u32,
    /// Clip range multiplier `c`: the range is `[0, c*std]` or `[mean - c*std, mean + c*std]`.
    pub clip_sigma: f64,
    pub signed: bool,
}

impl Default for QuantConfig {
    fn default() -> Self {
        Self {
            levels: CELL_LEVELS,
            clip_sigma: 3.0,
            signed: false,
        }
    }
}

impl QuantConfig {
    pub fn new(levels: u32, clip_sigma: f64) -> Result<Self, EncodingError> {
        let cfg = Self {
            levels,
            clip_sigma,
            signed: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_levels(self, levels: u32) -> Self {
        Self { levels, ..self }
    }

    pub fn validate(&self) -> Result<(), EncodingError> {
        if self.levels < 2 {
            return Err(EncodingError::InvalidConfig(format!(
                "levels must be at least 2, got {}",
                self.levels
            )));
        }
        if !(self.clip_sigma.is_finite() && self.clip_sigma > 0.0) {
            return Err(EncodingError::InvalidConfig(format!(
                "clip_sigma must be positive, got {}",
                self.clip_sigma
            )));
        }
        Ok(())
    }

    /// Clip interval `[lo, hi]` for the given feature statistics.
    pub fn clip_range(&self, mean: f64, std: f64) -> (f64, f64) {
        let half = self.clip_sigma * std;
        if self.signed {
            (mean - half, mean + half)
        } else {
            (0.0, half)
        }
    }
}

/// Clip `x` to `[lo, hi]` and map it uniformly onto `0..levels`.
///
/// The range is divided into `levels - 1` equal steps and `x` goes to the
/// nearest grid point, with halves rounded up. Endpoints map to `0` and
/// `levels - 1`.
pub fn quantize_scalar(x: f64, lo: f64, hi: f64, levels: u32) -> u32 {
    let top = f64::from(levels - 1);
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    let code = (t * top + 0.5).floor();
    (code as u32).min(levels - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedVector {
    values: Vec<u32>,
    config: QuantConfig,
}

impl QuantizedVector {
    pub fn new(values: Vec<u32>, config: QuantConfig) -> Result<Self, EncodingError> {
        config.validate()?;
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| v >= config.levels)
        {
            return Err(EncodingError::ValueOutOfRange {
                index,
                value,
                levels: config.levels,
            });
        }
        Ok(Self { values, config })
    }

    /// Shorthand for a vector on `levels` levels with the default clip rule.
    pub fn with_levels(values: Vec<u32>, levels: u32) -> Result<Self, EncodingError> {
        Self::new(values, QuantConfig::default().with_levels(levels))
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn config(&self) -> &QuantConfig {
        &self.config
    }

    pub fn levels(&self) -> u32 {
        self.config.levels
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Clip then bucket every component of `vec`.
pub fn quantize(
    vec: &[f64],
    cfg: &QuantConfig,
    mean: f64,
    std: f64,
) -> Result<QuantizedVector, EncodingError> {
    cfg.validate()?;
    if !(std.is_finite() && std > 0.0) {
        return Err(EncodingError::InvalidStd(std));
    }
    if !mean.is_finite() {
        return Err(EncodingError::InvalidConfig(format!("mean must be finite, got {mean}")));
    }
    let (lo, hi) = cfg.clip_range(mean, std);
    let values = vec
        .iter()
        .enumerate()
        .map(|(index, &x)| {
            if x.is_finite() {
                Ok(quantize_scalar(x, lo, hi, cfg.levels))
            } else {
                Err(EncodingError::NonFinite { index })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(QuantizedVector {
        values,
        config: *cfg,
    })
}

/// One 4-level word stored in (or applied to) a unit cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct CodeWord(u8);

impl CodeWord {
    pub const MAX: u8 = 3;

    pub fn new(level: u8) -> Result<Self, EncodingError> {
        if level > Self::MAX {
            Err(EncodingError::InvalidCodeWord(level))
        } else {
            Ok(Self(level))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    // Callers guarantee `level <= 3`.
    fn from_digit(level: u32) -> Self {
        debug_assert!(level <= 3);
        Self(level as u8)
    }
}

impl TryFrom<u8> for CodeWord {
    type Error = EncodingError;

    fn try_from(level: u8) -> Result<Self, Self::Error> {
        Self::new(level)
    }
}

impl From<CodeWord> for u8 {
    fn from(w: CodeWord) -> u8 {
        w.0
    }
}

/// Mismatch level between an applied and a stored code word.
#[inline]
pub fn cell_mismatch(query: CodeWord, stored: CodeWord) -> u8 {
    query.0.abs_diff(stored.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sre,
    B4e,
    B4we,
    Mtmc,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Sre, Scheme::B4e, Scheme::B4we, Scheme::Mtmc];

    /// Largest number of quantization levels encodable in `cl` words.
    pub fn capacity(self, cl: usize) -> Result<u64, EncodingError> {
        if cl == 0 {
            return Err(EncodingError::ZeroLength);
        }
        match self {
            Scheme::Sre => Ok(u64::from(CELL_LEVELS)),
            Scheme::B4e => Ok(pow4(cl)),
            Scheme::B4we => b4we_base_len(cl)
                .map(pow4)
                .ok_or(EncodingError::UnsupportedLength { scheme: self, cl }),
            Scheme::Mtmc => Ok(3 * cl as u64 + 1),
        }
    }

    /// Levels used for a support vector of this scheme when none are requested,
    /// saturated to `u32`.
    pub fn default_levels(self, cl: usize) -> Result<u32, EncodingError> {
        Ok(self.capacity(cl)?.min(u64::from(u32::MAX)) as u32)
    }

    /// Whether code word positions carry base-4 significance.
    pub fn is_positional(self) -> bool {
        matches!(self, Scheme::B4e)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Sre => "sre",
            Scheme::B4e => "b4e",
            Scheme::B4we => "b4we",
            Scheme::Mtmc => "mtmc",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sre" => Ok(Scheme::Sre),
            "b4e" => Ok(Scheme::B4e),
            "b4we" => Ok(Scheme::B4we),
            "mtmc" => Ok(Scheme::Mtmc),
            other => Err(format!("unknown encoding scheme '{other}'")),
        }
    }
}

fn pow4(n: usize) -> u64 {
    if n >= 32 {
        u64::MAX
    } else {
        1u64 << (2 * n)
    }
}

/// Code word length of B4WE with `base_len` base-4 digits: `1 + 4 + ... + 4^(base_len-1)`.
pub fn b4we_cl(base_len: usize) -> usize {
    (0..base_len).map(|i| 1usize << (2 * i)).sum()
}

/// Inverse of [`b4we_cl`], if `cl` is a valid B4WE length.
pub fn b4we_base_len(cl: usize) -> Option<usize> {
    (1..=16).find(|&b| b4we_cl(b) == cl)
}

/// Word `j` (0-based) of the MTMC code for value `m`.
#[inline]
pub fn mtmc_word(m: u32, cl: usize, j: usize) -> u8 {
    let cl = cl as u32;
    let (x, n) = (m / cl, m % cl);
    if (j as u32) < cl - n {
        x as u8
    } else {
        (x + 1) as u8
    }
}

/// Base-4 digit of `m` at position `j` (0-based, most significant first) in a `cl`-digit code.
#[inline]
pub fn b4e_digit(m: u64, cl: usize, j: usize) -> u8 {
    let shift = 2 * (cl - 1 - j);
    if shift >= 64 {
        0
    } else {
        ((m >> shift) & 3) as u8
    }
}

/// A vector encoded as `dim * cl` code words in dimension-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedVector {
    scheme: Scheme,
    cl: usize,
    words: Vec<CodeWord>,
    source: QuantConfig,
}

impl EncodedVector {
    /// Wrap raw words, checking them against the scheme's rules.
    pub fn from_words(
        scheme: Scheme,
        cl: usize,
        words: Vec<CodeWord>,
        source: QuantConfig,
    ) -> Result<Self, EncodingError> {
        let capacity = scheme.capacity(cl)?;
        if u64::from(source.levels) > capacity {
            return Err(EncodingError::LevelsExceedCapacity {
                scheme,
                cl,
                levels: u64::from(source.levels),
                capacity,
            });
        }
        if !words.len().is_multiple_of(cl) {
            return Err(EncodingError::RaggedWords {
                words: words.len(),
                cl,
            });
        }
        let e = Self {
            scheme,
            cl,
            words,
            source,
        };
        // Validation doubles as the scheme-invariant check.
        decode(&e)?;
        Ok(e)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn cl(&self) -> usize {
        self.cl
    }

    pub fn dim(&self) -> usize {
        self.words.len() / self.cl
    }

    pub fn words(&self) -> &[CodeWord] {
        &self.words
    }

    /// Words of dimension `i`.
    pub fn dimension(&self, i: usize) -> &[CodeWord] {
        &self.words[i * self.cl..(i + 1) * self.cl]
    }

    /// Quantization config of the vector this was encoded from.
    pub fn source(&self) -> &QuantConfig {
        &self.source
    }
}

fn check_capacity(v: &QuantizedVector, scheme: Scheme, cl: usize) -> Result<(), EncodingError> {
    let capacity = scheme.capacity(cl)?;
    if u64::from(v.levels()) > capacity {
        return Err(EncodingError::LevelsExceedCapacity {
            scheme,
            cl,
            levels: u64::from(v.levels()),
            capacity,
        });
    }
    Ok(())
}

fn build(
    v: &QuantizedVector,
    scheme: Scheme,
    cl: usize,
    word: impl Fn(u32, usize) -> u8,
) -> Result<EncodedVector, EncodingError> {
    check_capacity(v, scheme, cl)?;
    let mut words = Vec::with_capacity(v.dim() * cl);
    for &m in v.values() {
        words.extend((0..cl).map(|j| CodeWord::from_digit(u32::from(word(m, j)))));
    }
    Ok(EncodedVector {
        scheme,
        cl,
        words,
        source: *v.config(),
    })
}

pub fn encode_mtmc(v: &QuantizedVector, cl: usize) -> Result<EncodedVector, EncodingError> {
    build(v, Scheme::Mtmc, cl, |m, j| mtmc_word(m, cl, j))
}

pub fn encode_b4e(v: &QuantizedVector, cl: usize) -> Result<EncodedVector, EncodingError> {
    build(v, Scheme::B4e, cl, |m, j| b4e_digit(u64::from(m), cl, j))
}

/// B4E digits where the digit of weight `4^i` is repeated `4^i` times,
/// most significant block first.
pub fn encode_b4we(v: &QuantizedVector, base_len: usize) -> Result<EncodedVector, EncodingError> {
    if base_len == 0 {
        return Err(EncodingError::ZeroLength);
    }
    let cl = b4we_cl(base_len);
    // position -> digit index (0 = most significant)
    let digit_of: Vec<usize> = (0..base_len)
        .flat_map(|d| std::iter::repeat_n(d, 1usize << (2 * (base_len - 1 - d))))
        .collect();
    build(v, Scheme::B4we, cl, |m, j| {
        b4e_digit(u64::from(m), base_len, digit_of[j])
    })
}

pub fn encode_sre(v: &QuantizedVector, cl: usize) -> Result<EncodedVector, EncodingError> {
    build(v, Scheme::Sre, cl, |m, _| m as u8)
}

/// Encode under any scheme; for B4WE `cl` must be a valid B4WE length (1, 5, 21, ...).
pub fn encode(v: &QuantizedVector, scheme: Scheme, cl: usize) -> Result<EncodedVector, EncodingError> {
    match scheme {
        Scheme::Sre => encode_sre(v, cl),
        Scheme::B4e => encode_b4e(v, cl),
        Scheme::B4we => {
            let base_len =
                b4we_base_len(cl).ok_or(EncodingError::UnsupportedLength { scheme, cl })?;
            encode_b4we(v, base_len)
        }
        Scheme::Mtmc => encode_mtmc(v, cl),
    }
}

fn decode_dimension(scheme: Scheme, words: &[CodeWord], dim: usize) -> Result<u64, EncodingError> {
    let malformed = |reason| EncodingError::Malformed { scheme, dim, reason };
    let levels = words.iter().map(|w| w.level());
    match scheme {
        Scheme::Sre => {
            let first = words[0].level();
            if words.iter().any(|w| w.level() != first) {
                return Err(malformed("repeated words differ"));
            }
            Ok(u64::from(first))
        }
        Scheme::B4e => Ok(levels.fold(0u64, |acc, d| acc.saturating_mul(4) + u64::from(d))),
        Scheme::B4we => {
            let base_len = b4we_base_len(words.len())
                .ok_or(malformed("length is not a B4WE length"))?;
            let mut value = 0u64;
            let mut pos = 0;
            for d in 0..base_len {
                let block = &words[pos..pos + (1usize << (2 * (base_len - 1 - d)))];
                let digit = block[0].level();
                if block.iter().any(|w| w.level() != digit) {
                    return Err(malformed("digit block is not uniform"));
                }
                value = value * 4 + u64::from(digit);
                pos += block.len();
            }
            Ok(value)
        }
        Scheme::Mtmc => {
            let lo = words[0].level();
            let hi = words[words.len() - 1].level();
            if words.windows(2).any(|p| p[0] > p[1]) {
                return Err(malformed("words are not non-decreasing"));
            }
            if hi - lo > 1 {
                return Err(malformed("word spread exceeds one level"));
            }
            Ok(levels.map(u64::from).sum())
        }
    }
}

/// Exact inverse of the encoders.
pub fn decode(e: &EncodedVector) -> Result<QuantizedVector, EncodingError> {
    let values = (0..e.dim())
        .map(|i| {
            let m = decode_dimension(e.scheme, e.dimension(i), i)?;
            if m >= u64::from(e.source.levels) {
                return Err(EncodingError::ValueOutOfRange {
                    index: i,
                    value: m.min(u64::from(u32::MAX)) as u32,
                    levels: e.source.levels,
                });
            }
            Ok(m as u32)
        })
        .collect::<Result<Vec<_>, _>>()?;
    QuantizedVector::new(values, e.source)
}
