//! Behavioral model of a NAND-flash MCAM block.
//!
//! A block holds `strings_per_block` NAND strings of `cells_per_string` unit
//! cells. Applying a query word to a stored word gives a cell mismatch level
//! in `0..=3`; a string's current depends on the sum of its cell mismatches
//! and, through the bottleneck effect, on the largest one:
//!
//! ```text
//! I = i0 * g[max_mismatch] * exp(-alpha * total_mismatch) * exp(sigma * z)
//! ```
//!
//! where `z ~ N(0, 1)` is drawn from a counter-based stream keyed by
//! `(seed, string index, iteration)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::encoding::{cell_mismatch, CodeWord, EncodedVector, Scheme};
use crate::error::McamError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct McamGeometry {
    pub cells_per_string: usize,
    pub strings_per_block: u64,
}

impl Default for McamGeometry {
    fn default() -> Self {
        Self {
            cells_per_string: 24,
            strings_per_block: 131_072,
        }
    }
}

impl McamGeometry {
    pub fn validate(&self) -> Result<(), McamError> {
        if self.cells_per_string == 0 || self.strings_per_block == 0 {
            return Err(McamError::InvalidModel(
                "geometry dimensions must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Strings occupied by one vector of `dim * cl` code words.
    pub fn strings_per_vector(&self, dim: usize, cl: usize) -> usize {
        (dim * cl).div_ceil(self.cells_per_string)
    }

    /// Strings needed for `count` such vectors, checked against the block size.
    pub fn check_capacity(&self, dim: usize, cl: usize, count: usize) -> Result<u64, McamError> {
        let required = self.strings_per_vector(dim, cl) as u64 * count as u64;
        if required > self.strings_per_block {
            return Err(McamError::Capacity {
                required,
                available: self.strings_per_block,
            });
        }
        Ok(required)
    }
}

/// Parameters of the string-current model.
///
/// The defaults are fitted, not measured: `alpha / noise_sigma = 2` puts the
/// overlap coefficient of the current distributions at adjacent total
/// mismatch levels at `2 * Phi(-1) ~= 0.32` (see [`Self::adjacent_overlap`]),
/// which reproduces the partially overlapping bands of measured MCAM strings,
/// and the bottleneck gains keep a mismatch-3 string at a fifth of the current
/// of a mismatch-1 string with the same total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurrentModelParams {
    pub i0: f64,
    pub alpha: f64,
    /// Gain per max-mismatch class 0..=3.
    pub bottleneck_gain: [f64; 4],
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for CurrentModelParams {
    fn default() -> Self {
        Self {
            i0: 1.0,
            alpha: 0.12,
            bottleneck_gain: [1.0, 0.8, 0.5, 0.2],
            noise_sigma: 0.06,
            seed: 0,
        }
    }
}

impl CurrentModelParams {
    /// Defaults with noise disabled.
    pub fn noiseless() -> Self {
        Self {
            noise_sigma: 0.0,
            ..Self::default()
        }
    }

    /// A model where one mismatch-3 cell nearly pinches off the string.
    pub fn bottleneck_heavy() -> Self {
        Self {
            bottleneck_gain: [1.0, 0.7, 0.25, 0.05],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), McamError> {
        let bad = |msg: String| Err(McamError::InvalidModel(msg));
        if !(self.i0.is_finite() && self.i0 > 0.0) {
            return bad(format!("i0 must be positive, got {}", self.i0));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        let g = self.bottleneck_gain;
        if g[0] != 1.0 || !(g[0] > g[1] && g[1] > g[2] && g[2] > g[3] && g[3] > 0.0) {
            return bad(format!(
                "bottleneck gains must satisfy 1 = g0 > g1 > g2 > g3 > 0, got {g:?}"
            ));
        }
        Ok(())
    }

    /// Overlap coefficient between the current distributions of two strings whose
    /// total mismatch differs by one (same max-mismatch class).
    ///
    /// Both are lognormal with equal spread, so the overlap is `2 * Phi(-alpha / (2 sigma))`.
    pub fn adjacent_overlap(&self) -> f64 {
        if self.noise_sigma == 0.0 {
            return 0.0;
        }
        let std_normal = Normal::standard();
        2.0 * std_normal.cdf(-self.alpha / (2.0 * self.noise_sigma))
    }
}

/// Mismatch summary of one string under one applied query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StringReading {
    pub total: u32,
    pub max: u8,
}

impl StringReading {
    pub fn merge(self, other: StringReading) -> StringReading {
        StringReading {
            total: self.total + other.total,
            max: self.max.max(other.max),
        }
    }
}

pub fn read_string(cells: &[CodeWord], applied: &[CodeWord]) -> Result<StringReading, McamError> {
    if cells.len() != applied.len() {
        return Err(McamError::LengthMismatch {
            stored: cells.len(),
            applied: applied.len(),
        });
    }
    Ok(cells
        .iter()
        .zip(applied)
        .fold(StringReading::default(), |acc, (&s, &q)| {
            let m = cell_mismatch(q, s);
            StringReading {
                total: acc.total + u32::from(m),
                max: acc.max.max(m),
            }
        }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseDraw {
    Off,
    At { string: u64, iteration: u64 },
}

/// Immutable device model: geometry plus current parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceModel {
    geometry: McamGeometry,
    params: CurrentModelParams,
}

impl DeviceModel {
    pub fn new(geometry: McamGeometry, params: CurrentModelParams) -> Result<Self, McamError> {
        geometry.validate()?;
        params.validate()?;
        Ok(Self { geometry, params })
    }

    pub fn geometry(&self) -> &McamGeometry {
        &self.geometry
    }

    pub fn params(&self) -> &CurrentModelParams {
        &self.params
    }

    pub fn noiseless_current(&self, reading: StringReading) -> f64 {
        let p = &self.params;
        p.i0 * p.bottleneck_gain[usize::from(reading.max)] * (-p.alpha * f64::from(reading.total)).exp()
    }

    /// Multiplicative lognormal factor for a string at a given iteration.
    pub fn noise_factor(&self, string: u64, iteration: u64) -> f64 {
        if self.params.noise_sigma == 0.0 {
            return 1.0;
        }
        let key = self
            .params
            .seed
            .wrapping_add(iteration.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(string);
        let z: f64 = StandardNormal.sample(&mut rng);
        (self.params.noise_sigma * z).exp()
    }

    pub fn current(&self, reading: StringReading, noise: NoiseDraw) -> f64 {
        let base = self.noiseless_current(reading);
        match noise {
            NoiseDraw::Off => base,
            NoiseDraw::At { string, iteration } => base * self.noise_factor(string, iteration),
        }
    }

    pub fn string_current(
        &self,
        cells: &[CodeWord],
        applied: &[CodeWord],
        noise: NoiseDraw,
    ) -> Result<f64, McamError> {
        Ok(self.current(read_string(cells, applied)?, noise))
    }
}

/// Sense-amplifier decision policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SenseConfig {
    /// Every string carrying the largest current votes.
    #[default]
    IdealTopCurrent,
    FixedThreshold { threshold: f64 },
    /// The top `fraction` of strings by current vote.
    Percentile { fraction: f64 },
}

impl SenseConfig {
    pub fn validate(&self) -> Result<(), McamError> {
        match *self {
            SenseConfig::IdealTopCurrent => Ok(()),
            SenseConfig::FixedThreshold { threshold } if threshold.is_finite() => Ok(()),
            SenseConfig::Percentile { fraction } if fraction > 0.0 && fraction < 1.0 => Ok(()),
            other => Err(McamError::InvalidSense(format!("{other:?}"))),
        }
    }
}

pub fn sense(currents: &[f64], cfg: &SenseConfig) -> Result<Vec<bool>, McamError> {
    if currents.is_empty() {
        return Err(McamError::EmptySense);
    }
    cfg.validate()?;
    Ok(match *cfg {
        SenseConfig::IdealTopCurrent => {
            let top = currents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            currents.iter().map(|&c| c == top).collect()
        }
        SenseConfig::FixedThreshold { threshold } => {
            currents.iter().map(|&c| c > threshold).collect()
        }
        SenseConfig::Percentile { fraction } => {
            let n = currents.len();
            let count = ((fraction * n as f64).round() as usize).clamp(1, n);
            let mut order: Vec<usize> = (0..n).collect();
            // stable: equal currents keep index order
            order.sort_by(|&a, &b| currents[b].total_cmp(&currents[a]));
            let mut votes = vec![false; n];
            for &i in &order[..count] {
                votes[i] = true;
            }
            votes
        }
    })
}

/// One NAND string and the slice of a support vector it stores.
#[derive(Clone, Debug, PartialEq)]
pub struct StringState {
    pub cells: Vec<CodeWord>,
    pub support: usize,
    pub segment: usize,
}

/// Supports mapped onto adjacent strings of a block.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchPlanLayout {
    geometry: McamGeometry,
    scheme: Scheme,
    cl: usize,
    dim: usize,
    strings_per_support: usize,
    strings: Vec<StringState>,
}

impl SearchPlanLayout {
    pub fn geometry(&self) -> &McamGeometry {
        &self.geometry
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn cl(&self) -> usize {
        self.cl
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `k = ceil(dim * cl / cells_per_string)`.
    pub fn strings_per_support(&self) -> usize {
        self.strings_per_support
    }

    pub fn support_count(&self) -> usize {
        self.strings.len() / self.strings_per_support
    }

    pub fn total_strings(&self) -> usize {
        self.strings.len()
    }

    pub fn strings(&self) -> &[StringState] {
        &self.strings
    }

    /// The `k` adjacent strings of support `n`.
    pub fn support_strings(&self, n: usize) -> &[StringState] {
        let k = self.strings_per_support;
        &self.strings[n * k..(n + 1) * k]
    }

    /// Global index of segment `segment` of support `n`.
    pub fn string_index(&self, n: usize, segment: usize) -> usize {
        n * self.strings_per_support + segment
    }
}

/// Lay supports out on adjacent strings, `k` per support, in support order.
pub fn layout_supports(
    supports: &[EncodedVector],
    geom: &McamGeometry,
) -> Result<SearchPlanLayout, McamError> {
    geom.validate()?;
    let first = supports.first().ok_or(McamError::NoSupports)?;
    let (scheme, cl, dim) = (first.scheme(), first.cl(), first.dim());
    for (index, s) in supports.iter().enumerate() {
        if s.scheme() != scheme {
            return Err(McamError::Heterogeneous { index, reason: "scheme" });
        }
        if s.cl() != cl {
            return Err(McamError::Heterogeneous { index, reason: "code word length" });
        }
        if s.dim() != dim {
            return Err(McamError::Heterogeneous { index, reason: "dimension" });
        }
    }
    geom.check_capacity(dim, cl, supports.len())?;
    let k = geom.strings_per_vector(dim, cl);
    let mut strings = Vec::with_capacity(k * supports.len());
    for (support, s) in supports.iter().enumerate() {
        for (segment, chunk) in s.words().chunks(geom.cells_per_string).enumerate() {
            strings.push(StringState {
                cells: chunk.to_vec(),
                support,
                segment,
            });
        }
    }
    Ok(SearchPlanLayout {
        geometry: *geom,
        scheme,
        cl,
        dim,
        strings_per_support: k,
        strings,
    })
}
