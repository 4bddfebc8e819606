//! Frequency-band unmasking scheduler for masked-diffusion language models.
//!
//! Positions of the active block are ranked by model confidence plus a
//! spectral score: the block's hidden states are band-pass filtered along the
//! token axis with a window that slides from the lowest to the highest
//! frequencies over the block's steps, and each token's share of the
//! filtered energy is added with an adaptive weight.
//!
//! - [`spectral`]: real FFT along the token axis, masks, filtering, energies.
//! - [`sampler`]: window schedule, filtering score, adaptive weight, selection.
//! - [`decoder`]: the block-wise decode loop and its backends.
//! - [`analysis`]: low-frequency ratios, traces, exports, dump format.
//! - [`config`] and [`compare`]: run configuration and the comparison harness.

extern crate self as fourier_sampler;

pub mod analysis;
pub mod compare;
pub mod config;
pub mod decoder;
mod fft;
pub mod sampler;
pub mod spectral;

#[cfg(test)]
mod testutil;

// The guide's chapters run as doctests so its snippets cannot drift.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/band.md")]
    mod band {}
    #[doc = include_str!("../../../book/src/calibrator.md")]
    mod calibrator {}
    #[doc = include_str!("../../../book/src/decoding.md")]
    mod decoding {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
