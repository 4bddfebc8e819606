//! Per-step scoring and position selection.
//!
//! At step `s` of a block decoded in `S` steps the scheduler keeps a band of
//! `w = max(1, ⌊ρW⌋)` bins starting at `o_s = ⌊s·(W−w)/(S−1)⌋`, so the band
//! slides from the lowest bins at the first step to the highest bins at the
//! last. Each token's energy inside the band, normalized by the block maximum,
//! is its translated filtering score `ℓ`. The score is added to the model
//! confidence with a weight `β` that shrinks when the confidence spread is
//! high relative to recent steps (see [`adaptive_beta`]).

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{
    filter_block, token_energy, window_mask, FrequencyWindow, HiddenBlock, SpectralError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error("step {step} out of range for {steps} steps per block")]
    StepOutOfRange { step: usize, steps: usize },
    #[error("steps per block must be at least 1")]
    NoSteps,
    #[error("non-finite logit in row {row}")]
    NonFiniteLogits { row: usize },
    #[error("logits have {rows} rows, mask covers {mask} positions")]
    LogitsShape { rows: usize, mask: usize },
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("requested {k} positions but only {masked} are masked")]
    TooManyRequested { k: usize, masked: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Which ranking drives unmasking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Confidence plus β-weighted translated filtering score.
    Fourier,
    /// Maximum softmax probability alone.
    Confidence,
    /// Uniform draw without replacement from a seeded generator.
    Random,
    /// Lowest masked index first.
    LeftToRight,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::Fourier,
        SamplerKind::Confidence,
        SamplerKind::Random,
        SamplerKind::LeftToRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Fourier => "fourier",
            SamplerKind::Confidence => "confidence",
            SamplerKind::Random => "random",
            SamplerKind::LeftToRight => "l2r",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fourier" => Ok(SamplerKind::Fourier),
            "confidence" => Ok(SamplerKind::Confidence),
            "random" => Ok(SamplerKind::Random),
            "l2r" | "left_to_right" => Ok(SamplerKind::LeftToRight),
            other => Err(format!(
                "unknown sampler `{other}` (expected fourier, confidence, random or l2r)"
            )),
        }
    }
}

/// Scheduler tunables. `Default` is the ρ=0.2 operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub rho: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub epsilon: f64,
    pub history_len: usize,
    pub z_scale: f64,
    pub kind: SamplerKind,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            rho: 0.2,
            beta_min: 0.4,
            beta_max: 0.6,
            epsilon: 1e-5,
            history_len: 20,
            z_scale: 3.0,
            kind: SamplerKind::Fourier,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |key, reason: &str| {
            Err(SamplerError::InvalidConfig {
                key,
                reason: reason.to_string(),
            })
        };
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho", &format!("must lie in (0, 1], got {}", self.rho));
        }
        if !(self.beta_min.is_finite() && self.beta_min >= 0.0) {
            return bad("beta-min", &format!("must be >= 0, got {}", self.beta_min));
        }
        if !(self.beta_max.is_finite() && self.beta_max >= self.beta_min) {
            return bad(
                "beta-max",
                &format!(
                    "must be >= beta-min ({}), got {}",
                    self.beta_min, self.beta_max
                ),
            );
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon", &format!("must be > 0, got {}", self.epsilon));
        }
        if self.history_len == 0 {
            return bad("history-len", "must be at least 1");
        }
        if !(self.z_scale.is_finite() && self.z_scale > 0.0) {
            return bad("z-scale", &format!("must be > 0, got {}", self.z_scale));
        }
        Ok(())
    }
}

/// Recent confidence variances, oldest first, capped at a fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratorHistory {
    values: VecDeque<f64>,
    capacity: usize,
}

impl CalibratorHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            values: VecDeque::with_capacity(capacity + 1),
            capacity: capacity.max(1),
        }
    }

    /// History pre-filled with `values` (oldest first), trimmed to `capacity`.
    pub fn with_values(capacity: usize, values: &[f64]) -> Self {
        let mut h = Self::new(capacity);
        for v in values {
            h.push(*v);
        }
        h
    }

    pub fn push(&mut self, v: f64) {
        self.values.push_back(v);
        while self.values.len() > self.capacity {
            self.values.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }

    /// Fraction of stored entries strictly below `v`.
    pub fn percentile_of(&self, v: f64) -> f64 {
        if self.values.is_empty() {
            return 0.5;
        }
        let below = self.values.iter().filter(|x| **x < v).count();
        below as f64 / self.values.len() as f64
    }
}

/// `B × V` logits for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    data: Vec<f64>,
    rows: usize,
    vocab: usize,
}

impl Logits {
    pub fn new(rows: usize, vocab: usize, data: Vec<f64>) -> Result<Self, SamplerError> {
        if data.len() != rows * vocab {
            return Err(SamplerError::LengthMismatch {
                what: "logits",
                got: data.len(),
                expected: rows * vocab,
            });
        }
        if vocab == 0 {
            return Err(SamplerError::LengthMismatch {
                what: "vocabulary",
                got: 0,
                expected: 1,
            });
        }
        Ok(Self { data, rows, vocab })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SamplerError> {
        let vocab = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * vocab);
        for r in rows {
            if r.len() != vocab {
                return Err(SamplerError::LengthMismatch {
                    what: "logits row",
                    got: r.len(),
                    expected: vocab,
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), vocab, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.vocab..(t + 1) * self.vocab]
    }

    /// Highest-logit token of row `t`; ties go to the lower id.
    pub fn argmax(&self, t: usize) -> u32 {
        let mut best = 0;
        for (v, x) in self.row(t).iter().enumerate() {
            if *x > self.row(t)[best] {
                best = v;
            }
        }
        best as u32
    }

    /// Maximum softmax probability of row `t`.
    pub fn max_prob(&self, t: usize) -> Result<f64, SamplerError> {
        let row = self.row(t);
        if row.iter().any(|x| !x.is_finite()) {
            return Err(SamplerError::NonFiniteLogits { row: t });
        }
        let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|x| (x - top).exp()).sum();
        Ok(1.0 / z)
    }
}

/// Scores computed for one decoding step over the active block.
#[derive(Debug, Clone, PartialEq)]
pub struct StepScores {
    pub ell: Vec<f64>,
    /// Confidence at masked positions, 0 elsewhere.
    pub conf: Vec<f64>,
    pub beta: f64,
    /// `conf + beta·ell` at masked positions, `-inf` elsewhere.
    pub fused: Vec<f64>,
    pub mask: Vec<bool>,
    pub window: FrequencyWindow,
}

/// Band position for step `step` of `steps`, over `num_bins` bins.
///
/// A single-step block keeps the lowest band.
pub fn window_at_step(
    step: usize,
    steps: usize,
    num_bins: usize,
    rho: f64,
) -> Result<FrequencyWindow, SamplerError> {
    if steps == 0 {
        return Err(SamplerError::NoSteps);
    }
    if step >= steps {
        return Err(SamplerError::StepOutOfRange { step, steps });
    }
    let width = FrequencyWindow::width_for(rho, num_bins)?;
    let span = num_bins - width;
    // Integer floor of s·(W−w)/(S−1); exact, unlike the float form.
    let offset = if steps == 1 {
        0
    } else {
        step * span / (steps - 1)
    };
    Ok(FrequencyWindow::new(rho, num_bins, offset)?)
}

/// Band energy of each token divided by the block maximum plus `epsilon`.
pub fn translated_filtering_score(
    h: &HiddenBlock,
    win: &FrequencyWindow,
    epsilon: f64,
) -> Result<Vec<f64>, SamplerError> {
    let mask = window_mask(win, h.num_bins())?;
    let energy = token_energy(&filter_block(h, &mask)?);
    let max = energy.iter().copied().fold(0.0, f64::max);
    Ok(energy.into_iter().map(|e| e / (max + epsilon)).collect())
}

/// Maximum softmax probability at every masked position.
pub fn masked_max_probs(
    logits: &Logits,
    mask: &[bool],
) -> Result<BTreeMap<usize, f64>, SamplerError> {
    if logits.rows() < mask.len() {
        return Err(SamplerError::LogitsShape {
            rows: logits.rows(),
            mask: mask.len(),
        });
    }
    mask.iter()
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(t, _)| Ok((t, logits.max_prob(t)?)))
        .collect()
}

/// Population variance; zero for fewer than two values.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Weight `β` for the current step, updating `hist` in place.
///
/// With no masked positions the weight is `beta_min` and the history is left
/// alone. Otherwise the variance of `q` is appended (evicting the oldest
/// entry past capacity), its percentile `p` is the fraction of stored
/// variances strictly below it, and
/// `β = β_min + (1 − Φ((p − ½)·z_scale))·(β_max − β_min)`.
///
/// ```
/// use std::collections::BTreeMap;
/// use fourier_sampler::sampler::{adaptive_beta, CalibratorHistory, SamplerConfig};
///
/// let cfg = SamplerConfig::default();
/// let mut hist = CalibratorHistory::new(cfg.history_len);
/// assert_eq!(adaptive_beta(&BTreeMap::new(), &mut hist, &cfg), 0.4);
/// assert!(hist.is_empty());
/// ```
pub fn adaptive_beta(
    q: &BTreeMap<usize, f64>,
    hist: &mut CalibratorHistory,
    cfg: &SamplerConfig,
) -> f64 {
    if q.is_empty() {
        return cfg.beta_min;
    }
    let values: Vec<f64> = q.values().copied().collect();
    let variance = population_variance(&values);
    hist.push(variance);
    let p = hist.percentile_of(variance);
    let z = (p - 0.5) * cfg.z_scale;
    let w = normal_cdf(z);
    cfg.beta_min + (1.0 - w) * (cfg.beta_max - cfg.beta_min)
}

/// `conf + beta·ell` at masked positions; `-inf` at the rest.
pub fn fuse_scores(
    conf: &[f64],
    ell: &[f64],
    beta: f64,
    mask: &[bool],
) -> Result<Vec<f64>, SamplerError> {
    for (what, got) in [("ell", ell.len()), ("mask", mask.len())] {
        if got != conf.len() {
            return Err(SamplerError::LengthMismatch {
                what,
                got,
                expected: conf.len(),
            });
        }
    }
    Ok(conf
        .iter()
        .zip(ell)
        .zip(mask)
        .map(|((c, l), m)| if *m { c + beta * l } else { f64::NEG_INFINITY })
        .collect())
}

/// Seeded generator used by the random sampler.
#[derive(Debug, Clone)]
pub struct SelectionRng(ChaCha8Rng);

impl SelectionRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Picks `k` masked positions, returned in ascending order.
///
/// Score-ranked kinds take the highest scores with ties broken toward the
/// lower index. `scores` is ignored by the random and left-to-right kinds.
pub fn select_positions(
    scores: &[f64],
    mask: &[bool],
    k: usize,
    kind: SamplerKind,
    rng: &mut SelectionRng,
) -> Result<Vec<usize>, SamplerError> {
    if scores.len() != mask.len() {
        return Err(SamplerError::LengthMismatch {
            what: "scores",
            got: scores.len(),
            expected: mask.len(),
        });
    }
    let masked: Vec<usize> = (0..mask.len()).filter(|t| mask[*t]).collect();
    if k > masked.len() {
        return Err(SamplerError::TooManyRequested {
            k,
            masked: masked.len(),
        });
    }
    let mut picked = match kind {
        SamplerKind::Fourier | SamplerKind::Confidence => {
            let mut order = masked;
            order.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b)));
            order.truncate(k);
            order
        }
        SamplerKind::LeftToRight => masked[..k].to_vec(),
        SamplerKind::Random => rand::seq::index::sample(&mut rng.0, masked.len(), k)
            .into_iter()
            .map(|i| masked[i])
            .collect(),
    };
    picked.sort_unstable();
    Ok(picked)
}

/// Runs the full scoring pipeline for one step.
///
/// Only the fourier kind consults or updates the calibrator; the other kinds
/// report `beta = 0` so that `fused` equals the confidence.
pub fn score_step(
    hidden: &HiddenBlock,
    logits: &Logits,
    mask: &[bool],
    step: usize,
    steps: usize,
    cfg: &SamplerConfig,
    hist: &mut CalibratorHistory,
) -> Result<StepScores, SamplerError> {
    if mask.len() != hidden.block_len() {
        return Err(SamplerError::LengthMismatch {
            what: "mask",
            got: mask.len(),
            expected: hidden.block_len(),
        });
    }
    let window = window_at_step(step, steps, hidden.num_bins(), cfg.rho)?;
    let ell = translated_filtering_score(hidden, &window, cfg.epsilon)?;
    let q = masked_max_probs(logits, mask)?;
    let mut conf = vec![0.0; mask.len()];
    for (t, v) in &q {
        conf[*t] = *v;
    }
    let beta = match cfg.kind {
        SamplerKind::Fourier => adaptive_beta(&q, hist, cfg),
        _ => 0.0,
    };
    let fused = fuse_scores(&conf, &ell, beta, mask)?;
    Ok(StepScores {
        ell,
        conf,
        beta,
        fused,
        mask: mask.to_vec(),
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{naive_energy, naive_filter, random_block, PHI_MINUS_1_5};

    fn cfg() -> SamplerConfig {
        SamplerConfig::default()
    }

    fn qmap(values: &[f64]) -> BTreeMap<usize, f64> {
        values.iter().copied().enumerate().collect()
    }

    #[test]
    fn window_endpoints_and_midpoint() {
        let w = window_at_step(0, 64, 33, 0.2).unwrap();
        assert_eq!((w.width(), w.offset()), (6, 0));
        let w = window_at_step(63, 64, 33, 0.2).unwrap();
        assert_eq!((w.width(), w.offset()), (6, 27));
        // ⌊31/63 · 27⌋ = 13
        assert_eq!(window_at_step(31, 64, 33, 0.2).unwrap().offset(), 13);
    }

    #[test]
    fn window_single_step_and_errors() {
        assert_eq!(window_at_step(0, 1, 33, 0.2).unwrap().offset(), 0);
        assert!(matches!(
            window_at_step(4, 4, 33, 0.2),
            Err(SamplerError::StepOutOfRange { .. })
        ));
        assert!(matches!(
            window_at_step(0, 0, 33, 0.2),
            Err(SamplerError::NoSteps)
        ));
    }

    #[test]
    fn score_constant_block_is_flat() {
        let h = HiddenBlock::new(4, 1, vec![1.0; 4]).unwrap();
        let win = FrequencyWindow::new(0.2, 3, 0).unwrap();
        let ell = translated_filtering_score(&h, &win, 1e-5).unwrap();
        for l in ell {
            assert!((l - 1.0 / (1.0 + 1e-5)).abs() < 1e-12);
        }
    }

    #[test]
    fn score_alternating_block_outside_band_is_zero() {
        let h = HiddenBlock::new(4, 1, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let win = FrequencyWindow::new(0.2, 3, 0).unwrap();
        let ell = translated_filtering_score(&h, &win, 1e-5).unwrap();
        assert!(ell.iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn score_matches_naive_pipeline() {
        let h = random_block(8, 2, 21);
        let w = h.num_bins();
        for offset in 0..w - 1 {
            let win = FrequencyWindow::new(0.4, w, offset).unwrap();
            let keep: Vec<bool> = (0..w)
                .map(|k| k >= offset && k < offset + win.width())
                .collect();
            let e = naive_energy(&naive_filter(&h, &keep));
            let max = e.iter().copied().fold(0.0, f64::max);
            let got = translated_filtering_score(&h, &win, 1e-5).unwrap();
            for (a, b) in got.iter().zip(&e) {
                assert!((a - b / (max + 1e-5)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn max_probs() {
        let logits = Logits::from_rows(&[vec![10.0, 0.0, 0.0], vec![0.0; 3]]).unwrap();
        let q = masked_max_probs(&logits, &[true, false]).unwrap();
        assert_eq!(q.len(), 1);
        assert!((q[&0] - 0.9999092083843409).abs() < 1e-12);

        let uniform = Logits::from_rows(&[vec![0.0; 4]]).unwrap();
        assert_eq!(masked_max_probs(&uniform, &[true]).unwrap()[&0], 0.25);
        assert!(masked_max_probs(&uniform, &[false]).unwrap().is_empty());

        let bad = Logits::from_rows(&[vec![0.0, f64::INFINITY]]).unwrap();
        assert!(matches!(
            masked_max_probs(&bad, &[true]),
            Err(SamplerError::NonFiniteLogits { row: 0 })
        ));
    }

    #[test]
    fn beta_empty_mask_leaves_history() {
        let mut hist = CalibratorHistory::with_values(20, &[0.1, 0.3]);
        let b = adaptive_beta(&BTreeMap::new(), &mut hist, &cfg());
        assert_eq!(b, 0.4);
        assert_eq!(hist.values(), vec![0.1, 0.3]);
    }

    #[test]
    fn beta_median_case() {
        // Population variance of {0, 1} is 0.25.
        let mut hist = CalibratorHistory::with_values(20, &[0.1, 0.2, 0.3]);
        let b = adaptive_beta(&qmap(&[0.0, 1.0]), &mut hist, &cfg());
        assert!((b - 0.5).abs() < 1e-12);
        assert_eq!(hist.len(), 4);
    }

    #[test]
    fn beta_first_step() {
        let mut hist = CalibratorHistory::new(20);
        let b = adaptive_beta(&qmap(&[0.3]), &mut hist, &cfg());
        // single element: variance 0, p = 0, z = -1.5
        assert!((b - (0.4 + (1.0 - PHI_MINUS_1_5) * 0.2)).abs() < 1e-9);
        assert!((b - 0.5866385597462284).abs() < 1e-9);
    }

    #[test]
    fn cdf_reference_points() {
        assert!((normal_cdf(-1.5) - PHI_MINUS_1_5).abs() < 1e-12);
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn history_evicts_oldest() {
        let mut h = CalibratorHistory::new(3);
        for v in [1.0, 2.0, 3.0, 4.0] {
            h.push(v);
        }
        assert_eq!(h.values(), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn fuse_cases() {
        let f = fuse_scores(&[0.7, 0.1], &[0.4, 0.9], 0.5, &[true, false]).unwrap();
        assert!((f[0] - 0.9).abs() < 1e-12);
        assert_eq!(f[1], f64::NEG_INFINITY);
        let f = fuse_scores(&[0.7, 0.3], &[0.4, 0.9], 0.0, &[true, true]).unwrap();
        assert_eq!(f, vec![0.7, 0.3]);
        assert!(fuse_scores(&[0.1], &[0.1, 0.2], 0.1, &[true]).is_err());
    }

    #[test]
    fn select_top_k_and_ties() {
        let mut rng = SelectionRng::new(0);
        let got = select_positions(
            &[0.9, 0.2, 0.8],
            &[true; 3],
            2,
            SamplerKind::Fourier,
            &mut rng,
        );
        assert_eq!(got.unwrap(), vec![0, 2]);
        let got = select_positions(
            &[0.5, 0.5],
            &[true; 2],
            1,
            SamplerKind::Confidence,
            &mut rng,
        );
        assert_eq!(got.unwrap(), vec![0]);
    }

    #[test]
    fn select_respects_mask_and_kinds() {
        let mut rng = SelectionRng::new(3);
        let mask = [false, true, true, false, true];
        let scores = [9.0, 0.1, 0.2, 9.0, 0.3];
        let top = select_positions(&scores, &mask, 1, SamplerKind::Fourier, &mut rng).unwrap();
        assert_eq!(top, vec![4]);
        let l2r = select_positions(&scores, &mask, 2, SamplerKind::LeftToRight, &mut rng).unwrap();
        assert_eq!(l2r, vec![1, 2]);
        let rnd = select_positions(&scores, &mask, 2, SamplerKind::Random, &mut rng).unwrap();
        assert_eq!(rnd.len(), 2);
        assert!(rnd.iter().all(|t| mask[*t]));
        assert!(matches!(
            select_positions(&scores, &mask, 4, SamplerKind::Fourier, &mut rng),
            Err(SamplerError::TooManyRequested { k: 4, masked: 3 })
        ));
    }

    #[test]
    fn random_selection_is_seeded() {
        let mask = [true; 10];
        let scores = [0.0; 10];
        let a = select_positions(
            &scores,
            &mask,
            3,
            SamplerKind::Random,
            &mut SelectionRng::new(9),
        );
        let b = select_positions(
            &scores,
            &mask,
            3,
            SamplerKind::Random,
            &mut SelectionRng::new(9),
        );
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn config_validation_names_key() {
        let mut c = cfg();
        c.rho = 0.0;
        assert!(matches!(
            c.validate(),
            Err(SamplerError::InvalidConfig { key: "rho", .. })
        ));
        let mut c = cfg();
        c.beta_max = 0.1;
        assert!(matches!(
            c.validate(),
            Err(SamplerError::InvalidConfig {
                key: "beta-max",
                ..
            })
        ));
        let mut c = cfg();
        c.epsilon = 0.0;
        assert!(matches!(
            c.validate(),
            Err(SamplerError::InvalidConfig { key: "epsilon", .. })
        ));
        let mut c = cfg();
        c.history_len = 0;
        assert!(c.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in SamplerKind::ALL {
            assert_eq!(k.name().parse::<SamplerKind>().unwrap(), k);
        }
        assert!("greedy".parse::<SamplerKind>().is_err());
    }
}
