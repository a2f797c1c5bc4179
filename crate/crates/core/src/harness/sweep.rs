//! Episode execution and (scheme, cl) sweeps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::{ExperimentConfig, HarnessError};
use super::dataset::{read_table, synthetic_clusters, LabeledVector, VectorFormat, VectorTable};
use super::episode::{sample_episode, Episode};
use crate::encoding::{encode, quantize, EncodedVector, QuantConfig, QuantizedVector, Scheme, CELL_LEVELS};
use crate::error::SearchError;
use crate::mcam::{CurrentModelParams, DeviceModel};
use crate::oracle::{nn_classify, Metric};
use crate::search::{plan_search, predict_class, search, Counters, SearchMode, SearchOptions};

/// Load the configured dataset, or generate the synthetic one.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<VectorTable, HarnessError> {
    match &cfg.dataset {
        Some(path) => {
            let format = match cfg.format {
                Some(f) => f,
                None => VectorFormat::from_path(path)?,
            };
            Ok(read_table(path, format)?)
        }
        None => Ok(synthetic_clusters(&cfg.synthetic)?),
    }
}

/// Mean and population standard deviation over every component.
pub fn feature_stats(rows: &[LabeledVector]) -> (f64, f64) {
    let n = rows.iter().map(|r| r.values.len()).sum::<usize>().max(1) as f64;
    let mean = rows.iter().flat_map(|r| &r.values).map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = rows
        .iter()
        .flat_map(|r| &r.values)
        .map(|&v| (f64::from(v) - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

/// Support quantization levels for one point.
pub fn support_levels(cfg: &ExperimentConfig, scheme: Scheme, cl: usize) -> Result<u32, HarnessError> {
    let cap = scheme.capacity(cl)?;
    match cfg.support_levels {
        Some(l) if u64::from(l) > cap => Err(HarnessError::Config(format!(
            "{scheme} with cl={cl} holds {cap} levels, {l} requested"
        ))),
        Some(l) => Ok(l),
        None => Ok(scheme.default_levels(cl)?),
    }
}

/// Per-query record of a simulated episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryTrace {
    pub label: u32,
    pub predicted: u32,
    pub oracle: u32,
    pub class_totals: BTreeMap<u32, f64>,
    /// Number of supports voting at each iteration.
    pub winners_per_iteration: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub episode: usize,
    pub queries: usize,
    pub correct: usize,
    pub oracle_correct: usize,
    /// Queries where simulator and oracle chose the same class.
    pub agreement: usize,
    /// Counters of a single query search.
    pub counters: Counters,
    pub strings: usize,
    pub traces: Vec<QueryTrace>,
}

impl EpisodeOutcome {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.queries as f64
    }

    pub fn oracle_accuracy(&self) -> f64 {
        self.oracle_correct as f64 / self.queries as f64
    }
}

/// Seed for episode `e`.
pub fn episode_seed(base: u64, e: usize) -> u64 {
    base.wrapping_add(e as u64)
}

/// Device model with the noise seed of episode `e`.
pub fn episode_device(cfg: &ExperimentConfig, e: usize) -> Result<DeviceModel, HarnessError> {
    let params = CurrentModelParams {
        seed: cfg.device.seed.wrapping_add(e as u64),
        ..cfg.device
    };
    DeviceModel::new(cfg.geometry, params).map_err(|e| HarnessError::Config(e.to_string()))
}

/// Quantize and search one sampled episode at one point.
pub fn run_episode(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    cl: usize,
    e: usize,
    episode: &Episode,
    keep_traces: bool,
) -> Result<EpisodeOutcome, HarnessError> {
    let fail = |source: SearchError| HarnessError::Episode {
        scheme,
        cl,
        episode: e,
        source,
    };
    let levels = support_levels(cfg, scheme, cl)?;
    let (mean, std) = feature_stats(&episode.supports);
    let s_cfg = QuantConfig { levels, ..cfg.quant };
    let q_cfg = match cfg.mode {
        SearchMode::Avss => QuantConfig { levels: CELL_LEVELS, ..cfg.quant },
        SearchMode::Svss => s_cfg,
    };
    let quant = |rows: &[LabeledVector], qc: &QuantConfig| -> Result<Vec<QuantizedVector>, HarnessError> {
        rows.iter()
            .map(|r| quantize(&to_f64(&r.values), qc, mean, std).map_err(|err| fail(err.into())))
            .collect()
    };
    let sq = quant(&episode.supports, &s_cfg)?;
    let qq = quant(&episode.queries, &q_cfg)?;
    let encoded = sq
        .iter()
        .map(|v| encode(v, scheme, cl).map_err(|err| fail(err.into())))
        .collect::<Result<Vec<EncodedVector>, _>>()?;
    let labels = episode.support_labels();
    let plan = plan_search(cfg.mode, &encoded, &cfg.geometry, q_cfg.levels).map_err(fail)?;
    let device = episode_device(cfg, e)?;
    let opts = SearchOptions {
        accumulation: cfg.accumulation,
        unit_cost: cfg.unit_cost,
    };

    let mut out = EpisodeOutcome {
        episode: e,
        queries: qq.len(),
        correct: 0,
        oracle_correct: 0,
        agreement: 0,
        counters: Counters::default(),
        strings: plan.layout().total_strings(),
        traces: Vec::new(),
    };
    for (q, row) in qq.iter().zip(&episode.queries) {
        let result = search(q, &plan, &device, &cfg.sense, &opts).map_err(fail)?;
        let votes = predict_class(&result, &labels, cfg.aggregation).map_err(fail)?;
        let oracle = nn_classify(q, &sq, &labels, Metric::CrossLevel)
            .map_err(|err| fail(SearchError::QueryMismatch(err.to_string())))?;
        out.correct += usize::from(votes.predicted == row.label);
        out.oracle_correct += usize::from(oracle == row.label);
        out.agreement += usize::from(votes.predicted == oracle);
        out.counters = result.counters;
        if keep_traces {
            out.traces.push(QueryTrace {
                label: row.label,
                predicted: votes.predicted,
                oracle,
                class_totals: votes.totals,
                winners_per_iteration: result.iteration_winners.iter().map(Vec::len).collect(),
            });
        }
    }
    Ok(out)
}

/// Check every point against the block capacity.
pub fn check_capacity(cfg: &ExperimentConfig, dim: usize) -> Result<(), HarnessError> {
    let count = cfg.n_way * cfg.k_shot;
    for (scheme, cl) in cfg.points() {
        cfg.geometry
            .check_capacity(dim, cl, count)
            .map_err(|source| HarnessError::Capacity { scheme, cl, source })?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub cl: usize,
    pub mode: SearchMode,
    pub iterations: usize,
    pub strings: usize,
    /// Per query search.
    pub energy_proxy: f64,
    pub accuracy_mean: f64,
    /// Half-width of the 95% normal-approximation interval.
    pub accuracy_ci95: f64,
    pub oracle_accuracy_mean: f64,
    pub oracle_agreement: f64,
    pub episodes: usize,
    pub episode_accuracies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub dim: usize,
    pub rows: Vec<SweepRow>,
}

/// Mean and 95% half-width (normal approximation, sample deviation).
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let z = Normal::standard().inverse_cdf(0.975);
    (mean, z * (var / n).sqrt())
}

/// Run every configured point over `cfg.episodes` episodes.
///
/// Episode `e` draws the same supports and queries at every point, so rows
/// can be compared pairwise.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, HarnessError> {
    cfg.validate()?;
    let table = load_dataset(cfg)?;
    run_sweep_on(cfg, &table)
}

pub fn run_sweep_on(cfg: &ExperimentConfig, table: &VectorTable) -> Result<SweepReport, HarnessError> {
    cfg.validate()?;
    check_capacity(cfg, table.dim())?;
    let episodes = (0..cfg.episodes)
        .into_par_iter()
        .map(|e| {
            sample_episode(
                table,
                cfg.n_way,
                cfg.k_shot,
                cfg.query_per_class,
                episode_seed(cfg.seed, e),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for (scheme, cl) in cfg.points() {
        let outcomes = episodes
            .par_iter()
            .enumerate()
            .map(|(e, ep)| run_episode(cfg, scheme, cl, e, ep, false))
            .collect::<Result<Vec<_>, _>>()?;
        let accs: Vec<f64> = outcomes.iter().map(EpisodeOutcome::accuracy).collect();
        let (accuracy_mean, accuracy_ci95) = mean_ci95(&accs);
        let n = outcomes.len() as f64;
        let first = &outcomes[0];
        rows.push(SweepRow {
            scheme,
            cl,
            mode: cfg.mode,
            iterations: first.counters.iterations,
            strings: first.strings,
            energy_proxy: first.counters.energy_proxy,
            accuracy_mean,
            accuracy_ci95,
            oracle_accuracy_mean: outcomes.iter().map(EpisodeOutcome::oracle_accuracy).sum::<f64>() / n,
            oracle_agreement: outcomes.iter().map(|o| o.agreement as f64 / o.queries as f64).sum::<f64>()
                / n,
            episodes: outcomes.len(),
            episode_accuracies: accs,
        });
    }
    Ok(SweepReport {
        config: cfg.clone(),
        dim: table.dim(),
        rows,
    })
}

/// Run a single episode with per-query traces.
pub fn simulate(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    cl: usize,
    e: usize,
) -> Result<EpisodeOutcome, HarnessError> {
    cfg.validate()?;
    let table = load_dataset(cfg)?;
    cfg.geometry
        .check_capacity(table.dim(), cl, cfg.n_way * cfg.k_shot)
        .map_err(|source| HarnessError::Capacity { scheme, cl, source })?;
    let episode = sample_episode(
        &table,
        cfg.n_way,
        cfg.k_shot,
        cfg.query_per_class,
        episode_seed(cfg.seed, e),
    )?;
    run_episode(cfg, scheme, cl, e, &episode, true)
}

impl SweepReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "scheme",
            "cl",
            "mode",
            "iterations",
            "strings",
            "energy_proxy",
            "accuracy_mean",
            "accuracy_ci95",
            "oracle_accuracy_mean",
            "oracle_agreement",
            "episodes",
        ])?;
        for r in &self.rows {
            out.write_record([
                r.scheme.to_string(),
                r.cl.to_string(),
                r.mode.to_string(),
                r.iterations.to_string(),
                r.strings.to_string(),
                r.energy_proxy.to_string(),
                r.accuracy_mean.to_string(),
                r.accuracy_ci95.to_string(),
                r.oracle_accuracy_mean.to_string(),
                r.oracle_agreement.to_string(),
                r.episodes.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Write `<prefix>.csv` and `<prefix>.json`; returns both paths.
    pub fn write_files(&self, prefix: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
        let with_ext = |ext: &str| {
            let mut name = prefix.as_os_str().to_owned();
            name.push(ext);
            PathBuf::from(name)
        };
        let csv_path = with_ext(".csv");
        let json_path = with_ext(".json");
        let out_err = |path: &Path, message: String| HarnessError::Output {
            path: path.to_path_buf(),
            message,
        };
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| out_err(dir, e.to_string()))?;
        }
        let file = std::fs::File::create(&csv_path).map_err(|e| out_err(&csv_path, e.to_string()))?;
        self.write_csv(file).map_err(|e| out_err(&csv_path, e.to_string()))?;
        std::fs::write(&json_path, self.to_json()).map_err(|e| out_err(&json_path, e.to_string()))?;
        Ok((csv_path, json_path))
    }
}

/// Quantize a whole table with its own statistics and encode every row.
pub fn encode_table(
    table: &VectorTable,
    scheme: Scheme,
    cl: usize,
    levels: u32,
    quant: &QuantConfig,
) -> Result<Vec<(u32, EncodedVector)>, HarnessError> {
    let (mean, std) = feature_stats(table.rows());
    let qc = QuantConfig { levels, ..*quant };
    table
        .rows()
        .iter()
        .map(|r| {
            let q = quantize(&to_f64(&r.values), &qc, mean, std)?;
            Ok((r.label, encode(&q, scheme, cl)?))
        })
        .collect()
}
