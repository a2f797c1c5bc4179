//! Differentiable surrogates of the MCAM search block for hardware-aware training.
//!
//! Forward passes are the hardware behavior (piecewise-constant MTMC words, a
//! step-function sense amplifier). Backward passes replace them with a linear
//! straight-through slope of `1/cl` for each MTMC word and the derivative of
//! `sigmoid(sharpness * (x - threshold))` for the sense amplifier.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encoding::{quantize, EncodedVector, QuantConfig, QuantizedVector, Scheme, CELL_LEVELS};
use crate::error::HatError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub cl: usize,
    pub ste_slope: f64,
    pub sa_sharpness: f64,
    pub sa_threshold: f64,
    pub noise_sigma_train: f64,
    pub seed: u64,
}

impl SurrogateConfig {
    /// Slope `1/cl`, sharpness `10 / i0` for unit `i0`, threshold 0, no noise.
    pub fn new(cl: usize) -> Self {
        Self {
            cl,
            ste_slope: 1.0 / cl.max(1) as f64,
            sa_sharpness: 10.0,
            sa_threshold: 0.0,
            noise_sigma_train: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HatError> {
        let bad = |m: String| Err(HatError::InvalidConfig(m));
        if self.cl == 0 {
            return bad("cl must be positive".into());
        }
        if !(self.ste_slope.is_finite() && self.ste_slope > 0.0) {
            return bad(format!("ste_slope must be positive, got {}", self.ste_slope));
        }
        if !(self.sa_sharpness.is_finite() && self.sa_sharpness > 0.0) {
            return bad(format!("sa_sharpness must be positive, got {}", self.sa_sharpness));
        }
        if !self.sa_threshold.is_finite() {
            return bad("sa_threshold must be finite".into());
        }
        if !(self.noise_sigma_train.is_finite() && self.noise_sigma_train >= 0.0) {
            return bad(format!("noise_sigma_train must be non-negative, got {}", self.noise_sigma_train));
        }
        Ok(())
    }
}

/// A forward value with the local derivative used on the backward pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualValue {
    pub value: f64,
    pub grad: f64,
}

/// Quantize query and support with the same clip range but different level counts.
pub fn asym_quantize_pair(
    query_raw: &[f64],
    support_raw: &[f64],
    query_levels: u32,
    support_levels: u32,
    clip: &QuantConfig,
    mean: f64,
    std: f64,
) -> Result<(QuantizedVector, QuantizedVector), HatError> {
    let q = quantize(query_raw, &clip.with_levels(query_levels), mean, std)?;
    let s = quantize(support_raw, &clip.with_levels(support_levels), mean, std)?;
    Ok((q, s))
}

/// Word `word` (1-based) of the MTMC code of a fixed-point value, with the
/// straight-through slope `1/cl` as its gradient.
///
/// For real `v` the forward is `floor((v + word - 1) / cl)` clamped to `0..=3`,
/// which agrees with the integer encoder on integers.
pub fn mtmc_word_forward_backward(v: f64, word: usize, cl: usize) -> Result<DualValue, HatError> {
    if cl == 0 || word == 0 || word > cl {
        return Err(HatError::Shape(format!("word {word} outside 1..={cl}")));
    }
    let level = ((v + (word - 1) as f64) / cl as f64).floor().clamp(0.0, 3.0);
    Ok(DualValue {
        value: level,
        grad: 1.0 / cl as f64,
    })
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Step forward (1 at or above threshold), sigmoid-derivative backward.
pub fn sa_forward_backward(current: f64, cfg: &SurrogateConfig) -> DualValue {
    let x = current - cfg.sa_threshold;
    // k * s * (1 - s) written to stay positive in the tails
    let e = (-cfg.sa_sharpness * x.abs()).exp();
    DualValue {
        value: if x >= 0.0 { 1.0 } else { 0.0 },
        grad: cfg.sa_sharpness * e / ((1.0 + e) * (1.0 + e)),
    }
}

/// Noiseless asymmetric match score: minus the summed cell mismatch between each
/// query value and every stored word of its dimension.
pub fn match_score(query: &[f64], support: &EncodedVector) -> f64 {
    -query
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            support
                .dimension(i)
                .iter()
                .map(|w| (q - f64::from(w.level())).abs())
                .sum::<f64>()
        })
        .sum::<f64>()
}

/// Output of the simulated MCAM for one support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchOutput {
    /// Match score including training noise.
    pub score: f64,
    /// Sense-amplifier vote on the score.
    pub vote: DualValue,
    /// `d vote / d query_i` through the sigmoid surrogate.
    pub grad_query: Vec<f64>,
    /// `d vote / d support_i` through the sigmoid and the straight-through words.
    pub grad_support: Vec<f64>,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Simulated AVSS match of a real-valued 4-level query against MTMC supports.
///
/// Gaussian noise with deviation `noise_sigma_train` is added to each score,
/// drawn in support order from a stream seeded by `cfg.seed`.
pub fn simulated_match(
    query: &[f64],
    supports: &[EncodedVector],
    cfg: &SurrogateConfig,
) -> Result<Vec<MatchOutput>, HatError> {
    cfg.validate()?;
    if query.iter().any(|q| !q.is_finite()) {
        return Err(HatError::Shape("query has non-finite components".into()));
    }
    let noise = Normal::new(0.0, cfg.noise_sigma_train)
        .map_err(|e| HatError::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    supports
        .iter()
        .enumerate()
        .map(|(n, s)| {
            if s.scheme() != Scheme::Mtmc || s.cl() != cfg.cl {
                return Err(HatError::Shape(format!(
                    "support {n} is {} cl={}, expected mtmc cl={}",
                    s.scheme(),
                    s.cl(),
                    cfg.cl
                )));
            }
            if s.dim() != query.len() {
                return Err(HatError::Shape(format!(
                    "support {n} has dimension {}, query {}",
                    s.dim(),
                    query.len()
                )));
            }
            let eps = if cfg.noise_sigma_train > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            let score = match_score(query, s) + eps;
            let vote = sa_forward_backward(score, cfg);
            let mut grad_query = Vec::with_capacity(query.len());
            let mut grad_support = Vec::with_capacity(query.len());
            for (i, &q) in query.iter().enumerate() {
                let (mut dq, mut dw) = (0.0, 0.0);
                for w in s.dimension(i) {
                    let diff = q - f64::from(w.level());
                    dq -= sign(diff);
                    dw += sign(diff);
                }
                grad_query.push(vote.grad * dq);
                grad_support.push(vote.grad * dw * cfg.ste_slope);
            }
            Ok(MatchOutput {
                score,
                vote,
                grad_query,
                grad_support,
            })
        })
        .collect()
}

/// Finite-difference validation of the surrogates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub sa_points: usize,
    pub sa_max_rel_error: f64,
    pub ste_violations: usize,
    pub ste_pairs_checked: usize,
    pub match_components: usize,
    pub match_max_abs_error: f64,
}

impl GradcheckReport {
    pub fn passed(&self, sa_tol: f64, match_tol: f64) -> bool {
        self.sa_max_rel_error <= sa_tol && self.ste_violations == 0 && self.match_max_abs_error <= match_tol
    }
}

/// Run the surrogate checks used by the `gradcheck` command.
///
/// * the SA backward against a central difference of its sigmoid on `points`
///   evenly spaced currents within `±6 / sharpness` of the threshold;
/// * the straight-through aggregate slope: summed MTMC word forwards must move
///   by exactly `v2 - v1` between any two encodable values, `cl <= max_cl`;
/// * the query gradient of [`simulated_match`] against a central difference of
///   the smooth vote `sigmoid(sharpness * (score - threshold))`.
pub fn gradcheck(cfg: &SurrogateConfig, points: usize, max_cl: usize) -> Result<GradcheckReport, HatError> {
    cfg.validate()?;
    let k = cfg.sa_sharpness;
    let smooth = |x: f64| sigmoid(k * (x - cfg.sa_threshold));
    let mut sa_max_rel_error: f64 = 0.0;
    for p in 0..points {
        let x = cfg.sa_threshold + (-6.0 + 12.0 * p as f64 / (points - 1).max(1) as f64) / k;
        let h = 1e-4 / k;
        let fd = (smooth(x + h) - smooth(x - h)) / (2.0 * h);
        let g = sa_forward_backward(x, cfg).grad;
        sa_max_rel_error = sa_max_rel_error.max((g - fd).abs() / g.abs());
    }

    let mut ste_violations = 0;
    let mut ste_pairs_checked = 0;
    for cl in 1..=max_cl {
        let levels = 3 * cl + 1;
        let sums: Vec<f64> = (0..levels)
            .map(|v| {
                (1..=cl)
                    .map(|j| mtmc_word_forward_backward(v as f64, j, cl).map(|d| d.value))
                    .sum::<Result<f64, _>>()
            })
            .collect::<Result<_, _>>()?;
        for v1 in 0..levels {
            for v2 in v1..levels {
                ste_pairs_checked += 1;
                if sums[v2] - sums[v1] != (v2 - v1) as f64 {
                    ste_violations += 1;
                }
            }
        }
    }

    // query gradient on a fixed non-integer query so no |q - w| kink is hit
    let cl = cfg.cl;
    let levels = 3 * cl as u32 + 1;
    let dim = 6;
    let query: Vec<f64> = (0..dim).map(|i| 0.3 + 0.45 * i as f64).collect();
    let support_q = QuantizedVector::with_levels(
        (0..dim as u32).map(|i| (i * 7 + 3) % levels).collect(),
        levels,
    )?;
    let support = crate::encoding::encode_mtmc(&support_q, cl)?;
    let base = match_score(&query, &support);
    // center the sigmoid on this score so its slope is informative
    let local = SurrogateConfig {
        sa_threshold: base + 0.1,
        noise_sigma_train: 0.0,
        ..*cfg
    };
    let out = simulated_match(&query, std::slice::from_ref(&support), &local)?;
    let mut match_max_abs_error: f64 = 0.0;
    for i in 0..dim {
        let h = 1e-6;
        let mut plus = query.clone();
        let mut minus = query.clone();
        plus[i] += h;
        minus[i] -= h;
        let f = |q: &[f64]| sigmoid(local.sa_sharpness * (match_score(q, &support) - local.sa_threshold));
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        match_max_abs_error = match_max_abs_error.max((out[0].grad_query[i] - fd).abs());
    }

    Ok(GradcheckReport {
        sa_points: points,
        sa_max_rel_error,
        ste_violations,
        ste_pairs_checked,
        match_components: dim,
        match_max_abs_error,
    })
}

/// Result of one gradient step of the toy controller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    pub loss_before: f64,
    pub loss_after: f64,
}

/// One gradient-descent step of a toy two-layer controller `W2 * relu(W1 * x)`
/// against the cross-entropy of smooth class votes from [`simulated_match`].
///
/// The query embedding is clipped to `[0, 3]` and used directly (identity
/// straight-through for its 4-level quantizer); supports are clipped to
/// `[0, 3*cl]`, rounded, MTMC-encoded and differentiated through the `1/cl`
/// word slope.
pub fn demo_step(cfg: &SurrogateConfig, lr: f64) -> Result<DemoStep, HatError> {
    use rand::Rng;
    cfg.validate()?;
    let (n_in, n_hidden, dim, n_way) = (8, 16, 24, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w1: Vec<f64> = (0..n_hidden * n_in).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut w2: Vec<f64> = (0..dim * n_hidden).map(|_| rng.random_range(0.0..0.08)).collect();
    let inputs: Vec<Vec<f64>> = (0..=n_way)
        .map(|_| (0..n_in).map(|_| rng.random_range(0.0..2.0)).collect())
        .collect();
    // inputs[0..n_way] are supports of classes 0..n_way, the query belongs to class 0
    let query_in: Vec<f64> = inputs[0].iter().zip(&inputs[n_way]).map(|(a, b)| a + 0.3 * b).collect();
    let support_max = 3.0 * cfg.cl as f64;

    let forward = |w1: &[f64], w2: &[f64], x: &[f64]| {
        let h: Vec<f64> = (0..n_hidden)
            .map(|r| (0..n_in).map(|c| w1[r * n_in + c] * x[c]).sum::<f64>().max(0.0))
            .collect();
        let e: Vec<f64> = (0..dim)
            .map(|r| (0..n_hidden).map(|c| w2[r * n_hidden + c] * h[c]).sum())
            .collect();
        (h, e)
    };

    struct Pass {
        loss: f64,
        gw1: Vec<f64>,
        gw2: Vec<f64>,
    }

    let pass = |w1: &[f64], w2: &[f64]| -> Result<Pass, HatError> {
        let (hq, eq) = forward(w1, w2, &query_in);
        let q: Vec<f64> = eq.iter().map(|v| v.clamp(0.0, f64::from(CELL_LEVELS - 1))).collect();
        let mut supports = Vec::new();
        let mut hidden = Vec::new();
        let mut embed = Vec::new();
        for x in &inputs[..n_way] {
            let (h, e) = forward(w1, w2, x);
            let vals: Vec<u32> = e.iter().map(|v| v.clamp(0.0, support_max).round() as u32).collect();
            let sq = QuantizedVector::with_levels(vals, 3 * cfg.cl as u32 + 1)?;
            supports.push(crate::encoding::encode_mtmc(&sq, cfg.cl)?);
            hidden.push(h);
            embed.push(e);
        }
        let out = simulated_match(&q, &supports, cfg)?;
        // logits: smooth votes
        let logits: Vec<f64> = out
            .iter()
            .map(|o| sigmoid(cfg.sa_sharpness * (o.score - cfg.sa_threshold)))
            .collect();
        let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - mx).exp()).sum();
        let probs: Vec<f64> = logits.iter().map(|l| (l - mx).exp() / z).collect();
        let loss = -probs[0].ln();
        let mut gw1 = vec![0.0; w1.len()];
        let mut gw2 = vec![0.0; w2.len()];
        let mut backprop = |x: &[f64], h: &[f64], e: &[f64], ge: Vec<f64>, lo: f64, hi: f64| {
            let ge: Vec<f64> = ge
                .iter()
                .zip(e)
                .map(|(g, &v)| if v > lo && v < hi { *g } else { 0.0 })
                .collect();
            let mut gh = vec![0.0; n_hidden];
            for r in 0..dim {
                for c in 0..n_hidden {
                    gw2[r * n_hidden + c] += ge[r] * h[c];
                    gh[c] += ge[r] * w2[r * n_hidden + c];
                }
            }
            for r in 0..n_hidden {
                if h[r] > 0.0 {
                    for c in 0..n_in {
                        gw1[r * n_in + c] += gh[r] * x[c];
                    }
                }
            }
        };
        let mut gq = vec![0.0; dim];
        for (n, o) in out.iter().enumerate() {
            let dl = probs[n] - if n == 0 { 1.0 } else { 0.0 };
            for (g, d) in gq.iter_mut().zip(&o.grad_query) {
                *g += dl * d;
            }
            let gs: Vec<f64> = o.grad_support.iter().map(|g| dl * g).collect();
            backprop(&inputs[n], &hidden[n], &embed[n], gs, 0.0, support_max);
        }
        backprop(&query_in, &hq, &eq, gq, 0.0, f64::from(CELL_LEVELS - 1));
        Ok(Pass { loss, gw1, gw2 })
    };

    let before = pass(&w1, &w2)?;
    for (w, g) in w1.iter_mut().zip(&before.gw1) {
        *w -= lr * g;
    }
    for (w, g) in w2.iter_mut().zip(&before.gw2) {
        *w -= lr * g;
    }
    let after = pass(&w1, &w2)?;
    Ok(DemoStep {
        loss_before: before.loss,
        loss_after: after.loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode_mtmc, mtmc_word};

    #[test]
    fn word_forward_matches_table() {
        let d = mtmc_word_forward_backward(7.0, 1, 5).unwrap();
        assert_eq!(d, DualValue { value: 1.0, grad: 0.2 });
        for cl in 1..=8 {
            for j in 1..=cl {
                let d = mtmc_word_forward_backward(0.0, j, cl).unwrap();
                assert_eq!(d.value, 0.0);
                assert_eq!(d.grad, 1.0 / cl as f64);
            }
            for m in 0..=3 * cl as u32 {
                let mean: f64 = (1..=cl)
                    .map(|j| mtmc_word_forward_backward(f64::from(m), j, cl).unwrap().value)
                    .sum::<f64>()
                    / cl as f64;
                assert_eq!(mean, f64::from(m) / cl as f64);
                for j in 1..=cl {
                    assert_eq!(
                        mtmc_word_forward_backward(f64::from(m), j, cl).unwrap().value,
                        f64::from(mtmc_word(m, cl, j - 1))
                    );
                }
            }
        }
        assert!(mtmc_word_forward_backward(1.0, 0, 3).is_err());
        assert!(mtmc_word_forward_backward(1.0, 4, 3).is_err());
    }

    #[test]
    fn sa_saturation_and_threshold() {
        let cfg = SurrogateConfig::new(4);
        let far = sa_forward_backward(10.0, &cfg);
        assert_eq!(far.value, 1.0);
        assert!(far.grad < 1e-30);
        let at = sa_forward_backward(0.0, &cfg);
        assert_eq!(at.value, 1.0);
        assert_eq!(at.grad, cfg.sa_sharpness / 4.0);
        assert_eq!(sa_forward_backward(-0.01, &cfg).value, 0.0);
    }

    #[test]
    fn sa_gradient_is_symmetric_positive_and_integrates_to_one() {
        let cfg = SurrogateConfig {
            sa_threshold: 0.7,
            sa_sharpness: 3.0,
            ..SurrogateConfig::new(2)
        };
        let mut integral = 0.0;
        let h = 1e-3;
        for i in -20_000..20_000 {
            let x = 0.7 + (f64::from(i) + 0.5) * h;
            let g = sa_forward_backward(x, &cfg).grad;
            assert!(g > 0.0);
            integral += g * h;
        }
        assert!((integral - 1.0).abs() < 1e-6, "{integral}");
        for t in [0.1, 0.5, 1.3] {
            let a = sa_forward_backward(0.7 + t, &cfg).grad;
            let b = sa_forward_backward(0.7 - t, &cfg).grad;
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn asym_pair_refines_and_aligns() {
        let clip = QuantConfig::new(4, 3.0).unwrap();
        let zeros = vec![0.0; 5];
        let (q, s) = asym_quantize_pair(&zeros, &zeros, 4, 16, &clip, 0.0, 1.0).unwrap();
        assert!(q.values().iter().all(|&v| v == 0));
        assert!(s.values().iter().all(|&v| v == 0));
        // range [0, 3]: for odd cl every query decision edge is a support edge,
        // so the query code is a function of the support code
        for cl in [1u32, 3, 5, 7] {
            let levels = 3 * cl + 1;
            let xs: Vec<f64> = (0..3001).map(|i| f64::from(i) * 0.001 + 0.000_37).collect();
            let (q, s) = asym_quantize_pair(&xs, &xs, 4, levels, &clip, 0.0, 1.0).unwrap();
            for (&qa, &sa) in q.values().iter().zip(s.values()) {
                // round-half-up of m / cl
                assert_eq!(qa, (2 * sa + cl) / (2 * cl), "cl={cl} m={sa}");
            }
        }
        assert!(asym_quantize_pair(&zeros, &zeros, 1, 16, &clip, 0.0, 1.0).is_err());
    }

    #[test]
    fn simulated_match_noiseless_equals_mismatch() {
        let cl = 3;
        let s = encode_mtmc(&QuantizedVector::with_levels(vec![0, 4, 9, 7], 10).unwrap(), cl).unwrap();
        let q = [0.0, 1.0, 3.0, 2.0];
        let out = simulated_match(&q, std::slice::from_ref(&s), &SurrogateConfig::new(cl)).unwrap();
        // |3q - m| summed: 0 + 1 + 0 + 1
        assert_eq!(out[0].score, -2.0);
    }

    #[test]
    fn simulated_match_is_seeded() {
        let cl = 2;
        let s: Vec<_> = (0..5)
            .map(|i| encode_mtmc(&QuantizedVector::with_levels(vec![i, 6 - i], 7).unwrap(), cl).unwrap())
            .collect();
        let cfg = SurrogateConfig {
            noise_sigma_train: 0.5,
            seed: 11,
            ..SurrogateConfig::new(cl)
        };
        let a = simulated_match(&[1.0, 2.0], &s, &cfg).unwrap();
        let b = simulated_match(&[1.0, 2.0], &s, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulated_match(&[1.0, 2.0], &s, &SurrogateConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a[0].score, c[0].score);
    }

    #[test]
    fn simulated_match_shape_errors() {
        let s = encode_mtmc(&QuantizedVector::with_levels(vec![1, 2], 7).unwrap(), 2).unwrap();
        assert!(simulated_match(&[1.0], std::slice::from_ref(&s), &SurrogateConfig::new(2)).is_err());
        assert!(simulated_match(&[1.0, 1.0], std::slice::from_ref(&s), &SurrogateConfig::new(3)).is_err());
        let sre = crate::encoding::encode_sre(&QuantizedVector::with_levels(vec![1, 2], 4).unwrap(), 2).unwrap();
        assert!(simulated_match(&[1.0, 1.0], &[sre], &SurrogateConfig::new(2)).is_err());
    }

    #[test]
    fn gradcheck_report_passes() {
        let r = gradcheck(&SurrogateConfig::new(4), 1000, 8).unwrap();
        assert!(r.passed(1e-5, 1e-4), "{r:?}");
        assert_eq!(r.ste_violations, 0);
    }

    #[test]
    fn demo_step_reduces_loss() {
        let cfg = SurrogateConfig {
            sa_threshold: -40.0,
            sa_sharpness: 0.2,
            ..SurrogateConfig::new(4)
        };
        let step = demo_step(&cfg, 1e-3).unwrap();
        assert!(step.loss_after < step.loss_before, "{step:?}");
    }

    #[test]
    fn config_validation() {
        assert!(SurrogateConfig::new(0).validate().is_err());
        assert!(SurrogateConfig { sa_sharpness: 0.0, ..SurrogateConfig::new(2) }.validate().is_err());
        assert!(SurrogateConfig { ste_slope: -1.0, ..SurrogateConfig::new(2) }.validate().is_err());
    }
}
