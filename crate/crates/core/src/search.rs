//! Symmetric (SVSS) and asymmetric (AVSS) search over a laid-out block.
//!
//! SVSS applies the query encoded exactly like the supports, one string-sized
//! sub-vector per iteration, so a search takes `ceil(d * cl / C)` iterations
//! for strings of `C` cells. AVSS applies a single 4-level word per query
//! dimension on a shared word line. Iteration `t` covers dimensions
//! `[t*C, (t+1)*C)`; column `j` of that group is the string formed by word `j`
//! of each of those dimensions, so `cl` columns are sensed together and a
//! search takes `ceil(d / C)` iterations. Column currents of one support are
//! summed before the sense amplifier.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{cell_mismatch, CodeWord, EncodedVector, QuantizedVector, CELL_LEVELS};
use crate::error::SearchError;
use crate::mcam::{
    layout_supports, sense, DeviceModel, McamGeometry, NoiseDraw, SearchPlanLayout, SenseConfig,
    StringReading,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Svss,
    Avss,
}

impl std::str::FromStr for SearchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svss" => Ok(SearchMode::Svss),
            "avss" => Ok(SearchMode::Avss),
            other => Err(format!("unknown search mode '{other}'")),
        }
    }
}

impl std::fmt::Display for SearchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SearchMode::Svss => "svss",
            SearchMode::Avss => "avss",
        })
    }
}

/// What each iteration contributes to a support's score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    /// Sense-amplifier outcome (0 or 1) per iteration.
    #[default]
    Vote,
    /// Modeled current per iteration; the final decision takes the top score.
    Analog,
    /// Negated weighted cell-mismatch count, read without the current model.
    ExactMismatch,
}

/// How support votes turn into a class decision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassAggregation {
    #[default]
    Votes,
    Scores,
}

pub fn svss_iterations(dim: usize, cl: usize, cells_per_string: usize) -> usize {
    (dim * cl).div_ceil(cells_per_string)
}

pub fn avss_iterations(dim: usize, cells_per_string: usize) -> usize {
    dim.div_ceil(cells_per_string)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchPlan {
    mode: SearchMode,
    layout: SearchPlanLayout,
    weights: Vec<f64>,
    word_weights: Vec<f64>,
    iterations: usize,
}

impl SearchPlan {
    pub fn mode(&self) -> SearchMode {
        self.mode
    }

    pub fn layout(&self) -> &SearchPlanLayout {
        &self.layout
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Per-iteration accumulation weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Significance of each code word position within a dimension: `4^(cl-1-j)`
    /// for B4E under SVSS (most significant word first), 1 otherwise.
    pub fn word_weights(&self) -> &[f64] {
        &self.word_weights
    }
}

/// Lay out the supports and derive the iteration schedule.
///
/// `query_levels` is the number of levels of the query that will be applied;
/// AVSS needs it to fit a single cell.
pub fn plan_search(
    mode: SearchMode,
    supports: &[EncodedVector],
    geom: &McamGeometry,
    query_levels: u32,
) -> Result<SearchPlan, SearchError> {
    if mode == SearchMode::Avss && query_levels > CELL_LEVELS {
        return Err(SearchError::QueryLevels(query_levels));
    }
    if supports.is_empty() {
        return Err(SearchError::EmptySupports);
    }
    let layout = layout_supports(supports, geom)?;
    let (dim, cl, cells) = (layout.dim(), layout.cl(), geom.cells_per_string);
    let iterations = match mode {
        SearchMode::Svss => svss_iterations(dim, cl, cells),
        SearchMode::Avss => avss_iterations(dim, cells),
    };
    let word_weights = if mode == SearchMode::Svss && layout.scheme().is_positional() {
        (0..cl).map(|j| 4f64.powi((cl - 1 - j) as i32)).collect()
    } else {
        vec![1.0; cl]
    };
    Ok(SearchPlan {
        mode,
        layout,
        weights: vec![1.0; iterations],
        word_weights,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub accumulation: Accumulation,
    /// Cost of one sense operation in the energy proxy.
    pub unit_cost: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            accumulation: Accumulation::Vote,
            unit_cost: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub iterations: usize,
    /// Sense-amplifier readings per iteration (one per support).
    pub sense_ops: usize,
    /// Strings whose current was evaluated over the whole search.
    pub strings_activated: usize,
    /// `iterations * sense_ops * unit_cost`.
    pub energy_proxy: f64,
}

impl Counters {
    fn new(iterations: usize, supports: usize, strings: usize, unit_cost: f64) -> Self {
        Self {
            iterations,
            sense_ops: supports,
            strings_activated: strings,
            energy_proxy: iterations as f64 * supports as f64 * unit_cost,
        }
    }
}

/// Outcome of searching one query against every support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    /// Accumulated score per support (higher is more similar).
    pub scores: Vec<f64>,
    /// Votes per support: accumulated SA votes in vote mode, otherwise 1 for
    /// the top-scoring support(s).
    pub votes: Vec<f64>,
    /// Supports that voted at each iteration (vote mode only).
    pub iteration_winners: Vec<Vec<usize>>,
    pub counters: Counters,
}

#[derive(Clone, Copy, Default)]
struct Sample {
    current: f64,
    mismatch: f64,
}

fn top_votes(scores: &[f64]) -> Vec<f64> {
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().map(|&s| if s == top { 1.0 } else { 0.0 }).collect()
}

fn accumulate(
    plan: &SearchPlan,
    samples: Vec<Vec<Sample>>,
    sense_cfg: &SenseConfig,
    opts: &SearchOptions,
) -> Result<EpisodeResult, SearchError> {
    let n = samples.len();
    let layout = &plan.layout;
    let counters = Counters::new(plan.iterations, n, layout.total_strings(), opts.unit_cost);
    let mut scores = vec![0.0; n];
    let mut iteration_winners = Vec::new();
    match opts.accumulation {
        Accumulation::Vote => {
            for (i, &w) in plan.weights.iter().enumerate() {
                let currents: Vec<f64> = samples.iter().map(|s| s[i].current).collect();
                let votes = sense(&currents, sense_cfg)?;
                let mut winners = Vec::new();
                for (idx, v) in votes.into_iter().enumerate() {
                    if v {
                        scores[idx] += w;
                        winners.push(idx);
                    }
                }
                iteration_winners.push(winners);
            }
            let votes = scores.clone();
            return Ok(EpisodeResult {
                scores,
                votes,
                iteration_winners,
                counters,
            });
        }
        Accumulation::Analog => {
            for (score, s) in scores.iter_mut().zip(&samples) {
                *score = s.iter().zip(&plan.weights).map(|(x, w)| x.current * w).sum();
            }
        }
        Accumulation::ExactMismatch => {
            for (score, s) in scores.iter_mut().zip(&samples) {
                *score = -s.iter().zip(&plan.weights).map(|(x, w)| x.mismatch * w).sum::<f64>();
            }
        }
    }
    let votes = top_votes(&scores);
    Ok(EpisodeResult {
        scores,
        votes,
        iteration_winners,
        counters,
    })
}

/// Symmetric search: the query is encoded exactly like the supports.
pub fn run_svss(
    query: &EncodedVector,
    plan: &SearchPlan,
    device: &DeviceModel,
    sense_cfg: &SenseConfig,
    opts: &SearchOptions,
) -> Result<EpisodeResult, SearchError> {
    let layout = &plan.layout;
    if plan.mode != SearchMode::Svss {
        return Err(SearchError::QueryMismatch("plan is not a symmetric plan".into()));
    }
    if query.scheme() != layout.scheme() || query.cl() != layout.cl() || query.dim() != layout.dim() {
        return Err(SearchError::QueryMismatch(format!(
            "query {}/cl={}/d={} vs supports {}/cl={}/d={}",
            query.scheme(),
            query.cl(),
            query.dim(),
            layout.scheme(),
            layout.cl(),
            layout.dim()
        )));
    }
    let cells = layout.geometry().cells_per_string;
    let cl = layout.cl();
    let qwords = query.words();
    let need_current = opts.accumulation != Accumulation::ExactMismatch;
    let samples = (0..layout.support_count())
        .into_par_iter()
        .map(|n| {
            layout
                .support_strings(n)
                .iter()
                .enumerate()
                .map(|(seg, st)| {
                    let base = seg * cells;
                    let applied = &qwords[base..base + st.cells.len()];
                    let mut reading = StringReading::default();
                    let mut mismatch = 0.0;
                    for (c, (&s, &q)) in st.cells.iter().zip(applied).enumerate() {
                        let m = cell_mismatch(q, s);
                        reading.total += u32::from(m);
                        reading.max = reading.max.max(m);
                        mismatch += f64::from(m) * plan.word_weights[(base + c) % cl];
                    }
                    let current = if need_current {
                        device.current(
                            reading,
                            NoiseDraw::At {
                                string: layout.string_index(n, seg) as u64,
                                iteration: seg as u64,
                            },
                        )
                    } else {
                        0.0
                    };
                    Sample { current, mismatch }
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    accumulate(plan, samples, sense_cfg, opts)
}

/// Asymmetric search: one 4-level word per query dimension.
pub fn run_avss(
    query: &QuantizedVector,
    plan: &SearchPlan,
    device: &DeviceModel,
    sense_cfg: &SenseConfig,
    opts: &SearchOptions,
) -> Result<EpisodeResult, SearchError> {
    let layout = &plan.layout;
    if plan.mode != SearchMode::Avss {
        return Err(SearchError::QueryMismatch("plan is not an asymmetric plan".into()));
    }
    if query.levels() > CELL_LEVELS {
        return Err(SearchError::QueryLevels(query.levels()));
    }
    if query.dim() != layout.dim() {
        return Err(SearchError::QueryMismatch(format!(
            "query dimension {} vs supports {}",
            query.dim(),
            layout.dim()
        )));
    }
    let cells = layout.geometry().cells_per_string;
    let (cl, dim) = (layout.cl(), layout.dim());
    let applied: Vec<CodeWord> = query
        .values()
        .iter()
        .map(|&q| CodeWord::new(q as u8))
        .collect::<Result<_, _>>()?;
    let need_current = opts.accumulation != Accumulation::ExactMismatch;
    let iterations = plan.iterations;
    let samples = (0..layout.support_count())
        .into_par_iter()
        .map(|n| {
            let words: Vec<CodeWord> = layout
                .support_strings(n)
                .iter()
                .flat_map(|st| st.cells.iter().copied())
                .collect();
            let mut out = vec![Sample::default(); iterations];
            for (t, sample) in out.iter_mut().enumerate() {
                let dims = t * cells..((t + 1) * cells).min(dim);
                for j in 0..cl {
                    // word j of every dimension in the group shares the applied word lines
                    let reading = dims.clone().fold(StringReading::default(), |acc, i| {
                        let m = cell_mismatch(applied[i], words[i * cl + j]);
                        StringReading {
                            total: acc.total + u32::from(m),
                            max: acc.max.max(m),
                        }
                    });
                    sample.mismatch += f64::from(reading.total);
                    if need_current {
                        sample.current += device.current(
                            reading,
                            NoiseDraw::At {
                                string: ((n * iterations + t) * cl + j) as u64,
                                iteration: t as u64,
                            },
                        );
                    }
                }
            }
            out
        })
        .collect::<Vec<_>>();
    accumulate(plan, samples, sense_cfg, opts)
}

/// Class decision for a search result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassVotes {
    pub totals: BTreeMap<u32, f64>,
    pub predicted: u32,
}

/// Sum votes (or scores) per class and take the largest; ties go to the lowest label.
pub fn predict_class(
    result: &EpisodeResult,
    labels: &[u32],
    aggregation: ClassAggregation,
) -> Result<ClassVotes, SearchError> {
    if labels.is_empty() || result.scores.is_empty() {
        return Err(SearchError::EmptySupports);
    }
    if labels.len() != result.scores.len() {
        return Err(SearchError::LabelCount {
            labels: labels.len(),
            supports: result.scores.len(),
        });
    }
    let per_support = match aggregation {
        ClassAggregation::Votes => &result.votes,
        ClassAggregation::Scores => &result.scores,
    };
    let mut totals = BTreeMap::new();
    for (&label, &v) in labels.iter().zip(per_support) {
        *totals.entry(label).or_insert(0.0) += v;
    }
    Ok(ClassVotes {
        predicted: argmax_lowest(&totals),
        totals,
    })
}

pub(crate) fn argmax_lowest(totals: &BTreeMap<u32, f64>) -> u32 {
    let mut best: Option<(u32, f64)> = None;
    for (&label, &v) in totals {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((label, v));
        }
    }
    best.map(|(l, _)| l).expect("non-empty totals")
}

/// Scheme-level helper: plan and run a search for one query in either mode.
///
/// Under AVSS `query` must be the 4-level quantized query; under SVSS it is
/// encoded with the support scheme and code word length first.
pub fn search(
    query: &QuantizedVector,
    plan: &SearchPlan,
    device: &DeviceModel,
    sense_cfg: &SenseConfig,
    opts: &SearchOptions,
) -> Result<EpisodeResult, SearchError> {
    match plan.mode {
        SearchMode::Avss => run_avss(query, plan, device, sense_cfg, opts),
        SearchMode::Svss => {
            let layout = &plan.layout;
            let q = crate::encoding::encode(query, layout.scheme(), layout.cl())?;
            run_svss(&q, plan, device, sense_cfg, opts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode, encode_b4e, encode_mtmc, QuantizedVector, Scheme};
    use crate::mcam::CurrentModelParams;

    fn noiseless() -> DeviceModel {
        DeviceModel::new(McamGeometry::default(), CurrentModelParams::noiseless()).unwrap()
    }

    fn qv(values: Vec<u32>, levels: u32) -> QuantizedVector {
        QuantizedVector::with_levels(values, levels).unwrap()
    }

    fn exact() -> SearchOptions {
        SearchOptions {
            accumulation: Accumulation::ExactMismatch,
            unit_cost: 1.0,
        }
    }

    #[test]
    fn iteration_counts() {
        let mk = |d: usize, cl: usize| {
            encode_mtmc(&qv(vec![0; d], 3 * cl as u32 + 1), cl).unwrap()
        };
        let g = McamGeometry::default();
        let s = [mk(48, 32)];
        assert_eq!(plan_search(SearchMode::Svss, &s, &g, 97).unwrap().iterations(), 64);
        assert_eq!(plan_search(SearchMode::Avss, &s, &g, 4).unwrap().iterations(), 2);
        let s = [mk(480, 25)];
        assert_eq!(plan_search(SearchMode::Svss, &s, &g, 76).unwrap().iterations(), 500);
        assert_eq!(plan_search(SearchMode::Avss, &s, &g, 4).unwrap().iterations(), 20);
        assert_eq!(
            plan_search(SearchMode::Avss, &s, &g, 5),
            Err(SearchError::QueryLevels(5))
        );
        assert_eq!(
            plan_search(SearchMode::Svss, &[], &g, 4),
            Err(SearchError::EmptySupports)
        );
    }

    #[test]
    fn b4e_word_weights_follow_significance() {
        let s = [encode_b4e(&qv(vec![5, 9], 64), 3).unwrap()];
        let plan = plan_search(SearchMode::Svss, &s, &McamGeometry::default(), 64).unwrap();
        assert_eq!(plan.word_weights(), &[16.0, 4.0, 1.0]);
        assert_eq!(plan.weights(), &[1.0]);
        let plan = plan_search(SearchMode::Avss, &s, &McamGeometry::default(), 4).unwrap();
        assert_eq!(plan.word_weights(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn identical_support_wins_every_iteration() {
        let levels = 16;
        let vals: Vec<u32> = (0..48).map(|i| (i * 5 % 16) as u32).collect();
        let other: Vec<u32> = vals.iter().map(|v| 15 - v).collect();
        let sup = [
            encode_mtmc(&qv(other, levels), 5).unwrap(),
            encode_mtmc(&qv(vals.clone(), levels), 5).unwrap(),
        ];
        let plan = plan_search(SearchMode::Svss, &sup, &McamGeometry::default(), levels).unwrap();
        let q = encode_mtmc(&qv(vals, levels), 5).unwrap();
        let r = run_svss(&q, &plan, &noiseless(), &SenseConfig::IdealTopCurrent, &SearchOptions::default())
            .unwrap();
        assert_eq!(r.votes, vec![0.0, plan.iterations() as f64]);
        assert!(r.iteration_winners.iter().all(|w| w == &[1]));
        assert_eq!(predict_class(&r, &[7, 3], ClassAggregation::Votes).unwrap().predicted, 3);
    }

    #[test]
    fn fixed_threshold_votes_match_hand_trace() {
        // d = 24 SRE cl = 1: one string per support, one iteration.
        // query all 1s; supports differ in one or more cells.
        let q = qv(vec![1; 24], 4);
        let mut s0 = vec![1; 24];
        s0[0] = 2; // total 1, max 1: 0.8 * e^-0.12 = 0.7095
        let mut s1 = vec![1; 24];
        s1[0] = 3;
        s1[1] = 3; // total 4, max 2: 0.5 * e^-0.48 = 0.3094
        let s2 = vec![1; 24]; // exact: 1.0
        let sup: Vec<_> = [s0, s1, s2]
            .into_iter()
            .map(|v| encode(&qv(v, 4), Scheme::Sre, 1).unwrap())
            .collect();
        let plan = plan_search(SearchMode::Svss, &sup, &McamGeometry::default(), 4).unwrap();
        let eq = encode(&q, Scheme::Sre, 1).unwrap();
        let r = run_svss(
            &eq,
            &plan,
            &noiseless(),
            &SenseConfig::FixedThreshold { threshold: 0.5 },
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(r.votes, vec![1.0, 0.0, 1.0]);
        let r = run_svss(
            &eq,
            &plan,
            &noiseless(),
            &SenseConfig::FixedThreshold { threshold: 0.3 },
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(r.votes, vec![1.0, 1.0, 1.0]);
        let r = run_svss(&eq, &plan, &noiseless(), &SenseConfig::IdealTopCurrent, &SearchOptions {
            accumulation: Accumulation::Analog,
            unit_cost: 1.0,
        })
        .unwrap();
        assert!((r.scores[0] - 0.8 * (-0.12f64).exp()).abs() < 1e-12);
        assert!((r.scores[1] - 0.5 * (-0.48f64).exp()).abs() < 1e-12);
        assert_eq!(r.scores[2], 1.0);
    }

    #[test]
    fn b4e_weighted_mismatch_bounds_l1() {
        // Weighted absolute digit mismatch is never below |a - b| and equals it
        // exactly when all digit differences share a sign.
        let g = McamGeometry::default();
        for a in 0..64u32 {
            let sup: Vec<_> = (0..64u32)
                .map(|b| encode_b4e(&qv(vec![b], 64), 3).unwrap())
                .collect();
            let plan = plan_search(SearchMode::Svss, &sup, &g, 64).unwrap();
            let q = encode_b4e(&qv(vec![a], 64), 3).unwrap();
            let r = run_svss(&q, &plan, &noiseless(), &SenseConfig::IdealTopCurrent, &exact()).unwrap();
            for b in 0..64u32 {
                let weighted = -r.scores[b as usize];
                let l1 = f64::from(a.abs_diff(b));
                let diffs: Vec<i32> = (0..3)
                    .map(|j| ((a >> (4 - 2 * j)) & 3) as i32 - ((b >> (4 - 2 * j)) & 3) as i32)
                    .collect();
                let same_sign = diffs.iter().all(|&d| d >= 0) || diffs.iter().all(|&d| d <= 0);
                assert!(weighted >= l1);
                assert_eq!(weighted == l1, same_sign, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn avss_mismatch_is_scaled_l1() {
        let cl = 5;
        let levels = 3 * cl as u32 + 1;
        let supports: Vec<u32> = (0..levels).collect();
        let sup: Vec<_> = supports
            .iter()
            .map(|&m| encode_mtmc(&qv(vec![m; 30], levels), cl).unwrap())
            .collect();
        let plan = plan_search(SearchMode::Avss, &sup, &McamGeometry::default(), 4).unwrap();
        assert_eq!(plan.iterations(), 2);
        for q in 0..4u32 {
            let r = run_avss(&qv(vec![q; 30], 4), &plan, &noiseless(), &SenseConfig::IdealTopCurrent, &exact())
                .unwrap();
            for &m in &supports {
                assert_eq!(-r.scores[m as usize], 30.0 * f64::from((cl as u32 * q).abs_diff(m)));
            }
            // the downscaled support (m = cl * q) wins
            assert_eq!(r.votes[(cl as u32 * q) as usize], 1.0);
            assert_eq!(r.votes.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn avss_counters_vs_svss() {
        let cl = 32;
        let levels = 97;
        let sup: Vec<_> = (0..3)
            .map(|i| encode_mtmc(&qv(vec![i * 10; 48], levels), cl).unwrap())
            .collect();
        let g = McamGeometry::default();
        let a = plan_search(SearchMode::Avss, &sup, &g, 4).unwrap();
        let s = plan_search(SearchMode::Svss, &sup, &g, levels).unwrap();
        let d = noiseless();
        let ra = run_avss(&qv(vec![1; 48], 4), &a, &d, &SenseConfig::IdealTopCurrent, &SearchOptions::default())
            .unwrap();
        let rs = search(&qv(vec![30; 48], levels), &s, &d, &SenseConfig::IdealTopCurrent, &SearchOptions::default())
            .unwrap();
        assert_eq!(ra.counters.iterations, 2);
        assert_eq!(rs.counters.iterations, 64);
        assert_eq!(ra.counters.strings_activated, 3 * 64);
        assert_eq!(rs.counters.energy_proxy / ra.counters.energy_proxy, 32.0);
    }

    #[test]
    fn query_shape_errors() {
        let g = McamGeometry::default();
        let sup = [encode_mtmc(&qv(vec![3; 24], 16), 5).unwrap()];
        let plan = plan_search(SearchMode::Avss, &sup, &g, 4).unwrap();
        let d = noiseless();
        let cfg = SenseConfig::IdealTopCurrent;
        let opts = SearchOptions::default();
        assert!(matches!(
            run_avss(&qv(vec![1; 23], 4), &plan, &d, &cfg, &opts),
            Err(SearchError::QueryMismatch(_))
        ));
        assert_eq!(
            run_avss(&qv(vec![1; 24], 5), &plan, &d, &cfg, &opts),
            Err(SearchError::QueryLevels(5))
        );
        let splan = plan_search(SearchMode::Svss, &sup, &g, 16).unwrap();
        let wrong = encode_b4e(&qv(vec![3; 24], 16), 2).unwrap();
        assert!(matches!(
            run_svss(&wrong, &splan, &d, &cfg, &opts),
            Err(SearchError::QueryMismatch(_))
        ));
    }

    #[test]
    fn class_votes_tie_to_lowest_label() {
        let r = EpisodeResult {
            scores: vec![1.0, 1.0, 1.0, 1.0],
            votes: vec![1.0, 1.0, 1.0, 0.0],
            iteration_winners: vec![],
            counters: Counters::default(),
        };
        // A = 2 has 2 votes, B = 1 has 1 vote
        assert_eq!(predict_class(&r, &[2, 2, 1, 1], ClassAggregation::Votes).unwrap().predicted, 2);
        let r = EpisodeResult {
            votes: vec![1.0, 1.0, 1.0, 1.0],
            ..r
        };
        assert_eq!(predict_class(&r, &[5, 5, 4, 4], ClassAggregation::Votes).unwrap().predicted, 4);
        assert!(predict_class(&r, &[], ClassAggregation::Votes).is_err());
        assert!(predict_class(&r, &[1, 2], ClassAggregation::Votes).is_err());
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let scores = [0.3, 0.9, 0.9, 0.1];
        let scaled: Vec<f64> = scores.iter().map(|s| s * 7.5).collect();
        assert_eq!(
            sense(&scores, &SenseConfig::IdealTopCurrent).unwrap(),
            sense(&scaled, &SenseConfig::IdealTopCurrent).unwrap()
        );
    }
}
