// Shared test oracles. Compiled into unit tests and included by path from
// integration tests, so it only names the crate through its public API.
#![allow(dead_code)]

use fourier_sampler::spectral::HiddenBlock;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform entries in [-1, 1) from a fixed seed.
pub fn random_block(block_len: usize, dim: usize, seed: u64) -> HiddenBlock {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..block_len * dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    HiddenBlock::new(block_len, dim, data).unwrap()
}

/// Direct O(B²) DFT of one channel: (re, im) for all B bins.
pub fn naive_dft(signal: &[f64]) -> Vec<(f64, f64)> {
    let n = signal.len();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, x) in signal.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            (re, im)
        })
        .collect()
}

/// Direct O(B²) inverse DFT, real part, with the 1/B factor.
pub fn naive_idft_real(spec: &[(f64, f64)]) -> Vec<f64> {
    let n = spec.len();
    (0..n)
        .map(|t| {
            let mut acc = 0.0;
            for (k, (re, im)) in spec.iter().enumerate() {
                let a = 2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                acc += re * a.cos() - im * a.sin();
            }
            acc / n as f64
        })
        .collect()
}

/// Reference band-limiting: full-length DFT, keep bin k when the real-FFT
/// bin min(k, B-k) is selected, then invert.
pub fn naive_filter(h: &HiddenBlock, keep: &[bool]) -> HiddenBlock {
    let b = h.block_len();
    let dim = h.dim();
    let mut out = vec![0.0; b * dim];
    for d in 0..dim {
        let col: Vec<f64> = (0..b).map(|t| h.get(t, d)).collect();
        let spec: Vec<(f64, f64)> = naive_dft(&col)
            .into_iter()
            .enumerate()
            .map(|(k, c)| if keep[k.min(b - k)] { c } else { (0.0, 0.0) })
            .collect();
        for (t, v) in naive_idft_real(&spec).into_iter().enumerate() {
            out[t * dim + d] = v;
        }
    }
    HiddenBlock::new(b, dim, out).unwrap()
}

/// Per-token energy by explicit double loop.
pub fn naive_energy(h: &HiddenBlock) -> Vec<f64> {
    let mut e = vec![0.0; h.block_len()];
    for (t, slot) in e.iter_mut().enumerate() {
        for d in 0..h.dim() {
            *slot += h.get(t, d) * h.get(t, d);
        }
    }
    e
}

/// Standard normal CDF values computed independently (Python `math.erf`).
pub const PHI_MINUS_1_5: f64 = 0.06680720126885809;
