//! Experiment configuration and harness-level errors.
//!
//! A config is a TOML document; every key is optional and falls back to the
//! defaults below.
//!
//! ```toml
//! dataset = "features.bin"   # omit to use [synthetic]
//! n_way = 5
//! k_shot = 1
//! query_per_class = 5
//! schemes = ["mtmc", "sre"]
//! cls = [1, 2, 4, 8]
//! mode = "avss"              # or "svss"
//! accumulation = "vote"      # "analog", "exact_mismatch"
//! aggregation = "votes"      # "scores"
//! episodes = 30
//! seed = 0
//! unit_cost = 1.0
//! output = "out/sweep"       # writes out/sweep.csv and out/sweep.json
//!
//! [quant]
//! clip_sigma = 3.0
//! signed = false
//!
//! [device]
//! i0 = 1.0
//! alpha = 0.12
//! bottleneck_gain = [1.0, 0.8, 0.5, 0.2]
//! noise_sigma = 0.06
//! seed = 0
//!
//! [sense]
//! mode = "ideal_top_current"  # or { mode = "fixed_threshold", threshold = .. }
//!
//! [geometry]
//! cells_per_string = 24
//! strings_per_block = 131072
//!
//! [synthetic]
//! classes = 50
//! per_class = 20
//! dim = 48
//! separation = 4.0
//! spread = 1.0
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{DataError, SynthConfig, VectorFormat};
use crate::encoding::{QuantConfig, Scheme};
use crate::error::{EncodingError, McamError, SearchError};
use crate::mcam::{CurrentModelParams, McamGeometry, SenseConfig};
use crate::search::{Accumulation, ClassAggregation, SearchMode};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("scheme {scheme} cl={cl}: {source}")]
    Capacity {
        scheme: Scheme,
        cl: usize,
        #[source]
        source: McamError,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("encoding failed: {0}")]
    Encoding(#[from] EncodingError),
    #[error("scheme {scheme} cl={cl} episode {episode}: {source}")]
    Episode {
        scheme: Scheme,
        cl: usize,
        episode: usize,
        #[source]
        source: SearchError,
    },
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl HarnessError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Capacity { .. } => 3,
            HarnessError::Episode {
                source: SearchError::Mcam(McamError::Capacity { .. }),
                ..
            } => 3,
            HarnessError::Data(_) | HarnessError::Encoding(_) | HarnessError::Episode { .. } => 4,
            HarnessError::Output { .. } => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    /// Guessed from the dataset extension when absent.
    pub format: Option<VectorFormat>,
    pub synthetic: SynthConfig,
    pub n_way: usize,
    pub k_shot: usize,
    pub query_per_class: usize,
    pub schemes: Vec<Scheme>,
    /// Code word lengths; combined with every scheme. Lengths a scheme cannot
    /// use (B4WE outside 1, 5, 21, ...) are left out of the sweep.
    pub cls: Vec<usize>,
    pub mode: SearchMode,
    pub accumulation: Accumulation,
    pub aggregation: ClassAggregation,
    /// Support quantization levels; defaults to the scheme capacity.
    pub support_levels: Option<u32>,
    /// Clip settings; `levels` is ignored here.
    pub quant: QuantConfig,
    pub geometry: McamGeometry,
    pub device: CurrentModelParams,
    pub sense: SenseConfig,
    pub episodes: usize,
    pub seed: u64,
    pub unit_cost: f64,
    /// Output path prefix for `.csv` and `.json`.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            format: None,
            synthetic: SynthConfig::default(),
            n_way: 5,
            k_shot: 1,
            query_per_class: 5,
            schemes: vec![Scheme::Mtmc],
            cls: vec![1, 2, 4, 8],
            mode: SearchMode::Avss,
            accumulation: Accumulation::Vote,
            aggregation: ClassAggregation::Votes,
            support_levels: None,
            quant: QuantConfig::default(),
            geometry: McamGeometry::default(),
            device: CurrentModelParams::default(),
            sense: SenseConfig::default(),
            episodes: 30,
            seed: 0,
            unit_cost: 1.0,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// (scheme, cl) points in sweep order.
    pub fn points(&self) -> Vec<(Scheme, usize)> {
        let mut out = Vec::new();
        for &scheme in &self.schemes {
            for &cl in &self.cls {
                if scheme.capacity(cl).is_ok() {
                    out.push((scheme, cl));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n_way == 0 || self.k_shot == 0 || self.query_per_class == 0 {
            return bad("n_way, k_shot and query_per_class must be positive".into());
        }
        if self.episodes == 0 {
            return bad("episodes must be positive".into());
        }
        if self.cls.contains(&0) {
            return bad("code word lengths must be positive".into());
        }
        if self.points().is_empty() {
            return bad("no valid (scheme, cl) point to sweep".into());
        }
        if !(self.unit_cost.is_finite() && self.unit_cost >= 0.0) {
            return bad(format!("unit_cost must be finite and non-negative, got {}", self.unit_cost));
        }
        if self.support_levels.is_some_and(|l| l < 2) {
            return bad("support_levels must be at least 2".into());
        }
        self.quant
            .with_levels(4)
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let model = |e: McamError| HarnessError::Config(e.to_string());
        self.geometry.validate().map_err(model)?;
        self.device.validate().map_err(model)?;
        self.sense.validate().map_err(model)?;
        if let Some(path) = &self.dataset {
            if !path.exists() {
                return bad(format!("dataset {} does not exist", path.display()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn parses_nested_tables() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            schemes = ["mtmc", "b4we"]
            cls = [1, 2, 5]
            mode = "svss"
            [sense]
            mode = "fixed_threshold"
            threshold = 0.4
            [device]
            noise_sigma = 0.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mode, SearchMode::Svss);
        assert_eq!(cfg.sense, SenseConfig::FixedThreshold { threshold: 0.4 });
        assert_eq!(cfg.device.noise_sigma, 0.0);
        assert_eq!(cfg.device.alpha, CurrentModelParams::default().alpha);
        assert_eq!(
            cfg.points(),
            vec![
                (Scheme::Mtmc, 1),
                (Scheme::Mtmc, 2),
                (Scheme::Mtmc, 5),
                (Scheme::B4we, 1),
                (Scheme::B4we, 5)
            ]
        );
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str("n_ways = 3").is_err());
        for cfg in [
            ExperimentConfig { n_way: 0, ..Default::default() },
            ExperimentConfig { episodes: 0, ..Default::default() },
            ExperimentConfig { cls: vec![0], ..Default::default() },
            ExperimentConfig { dataset: Some("/nonexistent/x.bin".into()), ..Default::default() },
        ] {
            let e = cfg.validate().unwrap_err();
            assert_eq!(e.exit_code(), 2, "{e}");
        }
    }
}
