//! Sequence-axis spectral kernel.
//!
//! A [`HiddenBlock`] holds `B` token rows of `D` channels. Every channel is
//! transformed independently along the token axis with a real FFT, producing
//! `W = ⌊B/2⌋ + 1` bins per channel. The forward transform is unnormalized;
//! the inverse carries the `1/B` factor.
//!
//! ```
//! use fourier_sampler::spectral::{HiddenBlock, rfft_seq, irfft_seq};
//!
//! let h = HiddenBlock::new(4, 1, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
//! let spec = rfft_seq(&h);
//! assert_eq!(spec.num_bins(), 3);
//! assert!((spec.coeff(2, 0).re - 4.0).abs() < 1e-12);
//! let back = irfft_seq(&spec).unwrap();
//! assert!(back.max_abs_diff(&h) < 1e-12);
//! ```

use num_complex::Complex64;
use thiserror::Error;

use crate::fft::{self, Twiddles};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("block must have at least one token and one channel (got {block_len}x{dim})")]
    EmptyBlock { block_len: usize, dim: usize },
    #[error("expected {expected} values for the block, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("non-finite value at token {token}, channel {channel}")]
    NonFinite { token: usize, channel: usize },
    #[error("spectrum has {num_bins} bins but a length-{source_len} signal needs {expected}")]
    BinCountMismatch {
        num_bins: usize,
        source_len: usize,
        expected: usize,
    },
    #[error("mask has {mask_bins} bins, block needs {expected}")]
    MaskMismatch { mask_bins: usize, expected: usize },
    #[error("window ratio must lie in (0, 1], got {0}")]
    InvalidRatio(f64),
    #[error("window [{offset}, {offset}+{width}) exceeds {num_bins} bins")]
    WindowOutOfRange {
        offset: usize,
        width: usize,
        num_bins: usize,
    },
    #[error("number of bins must be positive")]
    NoBins,
}

/// Number of independent real-FFT bins for a length-`len` signal.
pub fn num_bins_for(len: usize) -> usize {
    len / 2 + 1
}

/// Final-layer hidden states of one block, `block_len × dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenBlock {
    data: Vec<f64>,
    block_len: usize,
    dim: usize,
}

impl HiddenBlock {
    pub fn new(block_len: usize, dim: usize, data: Vec<f64>) -> Result<Self, SpectralError> {
        if block_len == 0 || dim == 0 {
            return Err(SpectralError::EmptyBlock { block_len, dim });
        }
        if data.len() != block_len * dim {
            return Err(SpectralError::SizeMismatch {
                expected: block_len * dim,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite {
                token: i / dim,
                channel: i % dim,
            });
        }
        Ok(Self {
            data,
            block_len,
            dim,
        })
    }

    pub fn zeros(block_len: usize, dim: usize) -> Result<Self, SpectralError> {
        Self::new(block_len, dim, vec![0.0; block_len * dim])
    }

    /// Builds a block from per-token rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpectralError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(SpectralError::SizeMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_bins(&self) -> usize {
        num_bins_for(self.block_len)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn get(&self, t: usize, d: usize) -> f64 {
        self.data[t * self.dim + d]
    }

    /// Largest entrywise absolute difference; blocks must share a shape.
    pub fn max_abs_diff(&self, other: &HiddenBlock) -> f64 {
        assert_eq!(
            (self.block_len, self.dim),
            (other.block_len, other.dim),
            "shape mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn column(&self, d: usize) -> Vec<Complex64> {
        (0..self.block_len)
            .map(|t| Complex64::new(self.get(t, d), 0.0))
            .collect()
    }
}

/// Per-channel real spectrum of a [`HiddenBlock`], `num_bins × dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBlock {
    coeffs: Vec<Complex64>,
    num_bins: usize,
    source_len: usize,
    dim: usize,
}

impl SpectrumBlock {
    pub fn new(
        num_bins: usize,
        source_len: usize,
        dim: usize,
        coeffs: Vec<Complex64>,
    ) -> Result<Self, SpectralError> {
        if source_len == 0 || dim == 0 {
            return Err(SpectralError::EmptyBlock {
                block_len: source_len,
                dim,
            });
        }
        let expected = num_bins_for(source_len);
        if num_bins != expected {
            return Err(SpectralError::BinCountMismatch {
                num_bins,
                source_len,
                expected,
            });
        }
        if coeffs.len() != num_bins * dim {
            return Err(SpectralError::SizeMismatch {
                expected: num_bins * dim,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            coeffs,
            num_bins,
            source_len,
            dim,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeff(&self, k: usize, d: usize) -> Complex64 {
        self.coeffs[k * self.dim + d]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Zeroes every bin whose mask bit is clear, in every channel.
    pub fn apply_mask(&mut self, mask: &FrequencyMask) -> Result<(), SpectralError> {
        if mask.num_bins() != self.num_bins {
            return Err(SpectralError::MaskMismatch {
                mask_bins: mask.num_bins(),
                expected: self.num_bins,
            });
        }
        for (k, keep) in mask.bits().iter().enumerate() {
            if !keep {
                for c in &mut self.coeffs[k * self.dim..(k + 1) * self.dim] {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok(())
    }
}

/// Binary selection over the `W` real-FFT bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyMask {
    bits: Vec<bool>,
}

impl FrequencyMask {
    pub fn from_bits(bits: Vec<bool>) -> Result<Self, SpectralError> {
        if bits.is_empty() {
            return Err(SpectralError::NoBins);
        }
        Ok(Self { bits })
    }

    pub fn all(num_bins: usize) -> Self {
        Self {
            bits: vec![true; num_bins.max(1)],
        }
    }

    pub fn none(num_bins: usize) -> Self {
        Self {
            bits: vec![false; num_bins.max(1)],
        }
    }

    /// Mask with a single bin set.
    pub fn single(num_bins: usize, bin: usize) -> Self {
        let mut bits = vec![false; num_bins.max(1)];
        bits[bin] = true;
        Self { bits }
    }

    pub fn num_bins(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }
}

/// A contiguous band of `width` bins starting at `offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyWindow {
    ratio: f64,
    width: usize,
    offset: usize,
}

impl FrequencyWindow {
    /// Window of relative bandwidth `ratio` placed at `offset` within `num_bins`.
    pub fn new(ratio: f64, num_bins: usize, offset: usize) -> Result<Self, SpectralError> {
        let width = Self::width_for(ratio, num_bins)?;
        if offset + width > num_bins {
            return Err(SpectralError::WindowOutOfRange {
                offset,
                width,
                num_bins,
            });
        }
        Ok(Self {
            ratio,
            width,
            offset,
        })
    }

    /// `max(1, ⌊ratio · num_bins⌋)`.
    pub fn width_for(ratio: f64, num_bins: usize) -> Result<usize, SpectralError> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(SpectralError::InvalidRatio(ratio));
        }
        if num_bins == 0 {
            return Err(SpectralError::NoBins);
        }
        Ok(((ratio * num_bins as f64).floor() as usize).max(1))
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Exclusive upper bin.
    pub fn end(&self) -> usize {
        self.offset + self.width
    }
}

/// Unnormalized real FFT of every channel along the token axis.
pub fn rfft_seq(h: &HiddenBlock) -> SpectrumBlock {
    let b = h.block_len();
    let w = h.num_bins();
    let dim = h.dim();
    let tw = Twiddles::new(b);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); w * dim];
    for d in 0..dim {
        let spec = fft::forward(&h.column(d), &tw);
        for k in 0..w {
            coeffs[k * dim + d] = spec[k];
        }
    }
    // Bins that are real for real input get their rounding residue dropped.
    for d in 0..dim {
        coeffs[d].im = 0.0;
        if b.is_multiple_of(2) {
            coeffs[(w - 1) * dim + d].im = 0.0;
        }
    }
    SpectrumBlock {
        coeffs,
        num_bins: w,
        source_len: b,
        dim,
    }
}

/// Inverse of [`rfft_seq`], restoring a length-`source_len` block.
pub fn irfft_seq(s: &SpectrumBlock) -> Result<HiddenBlock, SpectralError> {
    let b = s.source_len();
    let w = s.num_bins();
    if w != num_bins_for(b) {
        return Err(SpectralError::BinCountMismatch {
            num_bins: w,
            source_len: b,
            expected: num_bins_for(b),
        });
    }
    let dim = s.dim();
    let tw = Twiddles::new(b);
    let mut data = vec![0.0; b * dim];
    let mut full = vec![Complex64::new(0.0, 0.0); b];
    for d in 0..dim {
        for (k, slot) in full.iter_mut().enumerate() {
            *slot = if k < w {
                s.coeff(k, d)
            } else {
                s.coeff(b - k, d).conj()
            };
        }
        // Hermitian symmetry requires real DC and Nyquist bins.
        full[0].im = 0.0;
        if b.is_multiple_of(2) {
            full[b / 2].im = 0.0;
        }
        for (t, v) in fft::inverse(&full, &tw).into_iter().enumerate() {
            data[t * dim + d] = v.re;
        }
    }
    HiddenBlock::new(b, dim, data)
}

/// Mask keeping bins `k < ⌊W/2⌋`.
pub fn low_half_mask(num_bins: usize) -> Result<FrequencyMask, SpectralError> {
    if num_bins == 0 {
        return Err(SpectralError::NoBins);
    }
    let cut = num_bins / 2;
    Ok(FrequencyMask {
        bits: (0..num_bins).map(|k| k < cut).collect(),
    })
}

/// Mask keeping exactly the bins covered by `win`.
pub fn window_mask(win: &FrequencyWindow, num_bins: usize) -> Result<FrequencyMask, SpectralError> {
    if num_bins == 0 {
        return Err(SpectralError::NoBins);
    }
    if win.end() > num_bins {
        return Err(SpectralError::WindowOutOfRange {
            offset: win.offset(),
            width: win.width(),
            num_bins,
        });
    }
    Ok(FrequencyMask {
        bits: (0..num_bins)
            .map(|k| k >= win.offset() && k < win.end())
            .collect(),
    })
}

/// Band-limits every channel of `h` to the bins selected by `m`.
pub fn filter_block(h: &HiddenBlock, m: &FrequencyMask) -> Result<HiddenBlock, SpectralError> {
    if m.num_bins() != h.num_bins() {
        return Err(SpectralError::MaskMismatch {
            mask_bins: m.num_bins(),
            expected: h.num_bins(),
        });
    }
    let mut spec = rfft_seq(h);
    spec.apply_mask(m)?;
    irfft_seq(&spec)
}

/// Squared Euclidean norm of every token row.
pub fn token_energy(h: &HiddenBlock) -> Vec<f64> {
    (0..h.block_len())
        .map(|t| h.row(t).iter().map(|v| v * v).sum())
        .collect()
}
