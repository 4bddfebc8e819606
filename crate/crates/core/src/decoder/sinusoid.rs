use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, ForwardRequest, ModelOutput};
use crate::sampler::Logits;
use crate::spectral::num_bins_for;

/// One cosine term `amplitude · cos(2π·freq·t/B + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidComponent {
    pub freq: usize,
    pub amplitude: f64,
    pub phase: f64,
}

/// Analytic backend: every channel is a sum of cosines over the block, so its
/// spectrum is known in closed form. Logits are planted by the caller and
/// repeat for every block.
#[derive(Debug, Clone)]
pub struct SinusoidBackend {
    block_size: usize,
    channels: Vec<Vec<SinusoidComponent>>,
    logits: Logits,
}

impl SinusoidBackend {
    pub fn new(
        block_size: usize,
        channels: Vec<Vec<SinusoidComponent>>,
        logits: Logits,
    ) -> Result<Self, BackendError> {
        if block_size == 0 {
            return Err(BackendError::InvalidParams(
                "block size must be positive".into(),
            ));
        }
        if channels.is_empty() {
            return Err(BackendError::InvalidParams(
                "at least one channel required".into(),
            ));
        }
        if logits.rows() != block_size {
            return Err(BackendError::DimensionMismatch {
                what: "planted logits rows",
                expected: block_size,
                got: logits.rows(),
            });
        }
        let num_bins = num_bins_for(block_size);
        for c in channels.iter().flatten() {
            if c.freq >= num_bins {
                return Err(BackendError::FrequencyOutOfRange {
                    freq: c.freq,
                    num_bins,
                });
            }
            if !(c.amplitude.is_finite() && c.phase.is_finite()) {
                return Err(BackendError::InvalidParams(format!(
                    "non-finite component {c:?}"
                )));
            }
        }
        Ok(Self {
            block_size,
            channels,
            logits,
        })
    }

    /// Uniform logits (all zero) over `vocab` tokens.
    pub fn flat_logits(block_size: usize, vocab: usize) -> Logits {
        Logits::new(block_size, vocab, vec![0.0; block_size * vocab]).expect("shape")
    }

    /// Parses `freq:amp[:phase]` terms; `,` separates terms, `;` channels.
    pub fn parse_channels(text: &str) -> Result<Vec<Vec<SinusoidComponent>>, BackendError> {
        let bad = |s: &str| BackendError::InvalidParams(format!("bad sinusoid term `{s}`"));
        text.split(';')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(|channel| {
                channel
                    .split(',')
                    .map(str::trim)
                    .map(|term| {
                        let parts: Vec<&str> = term.split(':').collect();
                        if !(2..=3).contains(&parts.len()) {
                            return Err(bad(term));
                        }
                        Ok(SinusoidComponent {
                            freq: parts[0].parse().map_err(|_| bad(term))?,
                            amplitude: parts[1].parse().map_err(|_| bad(term))?,
                            phase: match parts.get(2) {
                                Some(p) => p.parse().map_err(|_| bad(term))?,
                                None => 0.0,
                            },
                        })
                    })
                    .collect()
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    /// Hidden values for a block of `len` positions, row-major.
    pub fn hidden_values(&self, len: usize) -> Result<Vec<f64>, BackendError> {
        let num_bins = num_bins_for(len);
        let dim = self.channels.len();
        let mut out = vec![0.0; len * dim];
        for (d, terms) in self.channels.iter().enumerate() {
            for c in terms {
                if c.freq >= num_bins {
                    return Err(BackendError::FrequencyOutOfRange {
                        freq: c.freq,
                        num_bins,
                    });
                }
                for t in 0..len {
                    let angle = 2.0 * std::f64::consts::PI * ((c.freq * t) % len) as f64
                        / len as f64
                        + c.phase;
                    out[t * dim + d] += c.amplitude * angle.cos();
                }
            }
        }
        Ok(out)
    }
}

impl Backend for SinusoidBackend {
    fn vocab_size(&self) -> usize {
        self.logits.vocab()
    }

    fn forward(&self, req: &ForwardRequest<'_>) -> Result<ModelOutput, BackendError> {
        let len = req.block_len;
        if len > self.block_size {
            return Err(BackendError::DimensionMismatch {
                what: "block length",
                expected: self.block_size,
                got: len,
            });
        }
        let hidden = self.hidden_values(len)?;
        let vocab = self.logits.vocab();
        let logits = &self.logits.data()[..len * vocab];
        ModelOutput::rounded(len, self.dim(), vocab, &hidden, logits)
    }

    fn check_plan(&self, plan: &super::DecodePlan) -> Result<(), BackendError> {
        if plan.block_size != self.block_size {
            return Err(BackendError::DimensionMismatch {
                what: "block size",
                expected: self.block_size,
                got: plan.block_size,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{decode, DecodePlan};
    use crate::sampler::{translated_filtering_score, window_at_step, SamplerConfig};
    use crate::spectral::HiddenBlock;

    fn block_of(b: &SinusoidBackend, len: usize) -> HiddenBlock {
        HiddenBlock::new(len, b.dim(), b.hidden_values(len).unwrap()).unwrap()
    }

    #[test]
    fn dc_channel_scores_only_while_window_holds_bin_zero() {
        let b = SinusoidBackend::new(
            16,
            vec![vec![SinusoidComponent {
                freq: 0,
                amplitude: 2.0,
                phase: 0.0,
            }]],
            SinusoidBackend::flat_logits(16, 2),
        )
        .unwrap();
        let h = block_of(&b, 16);
        for s in 0..8 {
            let win = window_at_step(s, 8, 9, 0.2).unwrap();
            let ell = translated_filtering_score(&h, &win, 1e-5).unwrap();
            if win.offset() == 0 {
                assert!(ell.iter().all(|l| (l - 4.0 / (4.0 + 1e-5)).abs() < 1e-9));
            } else {
                assert!(ell.iter().all(|l| l.abs() < 1e-9), "s={s}");
            }
        }
    }

    #[test]
    fn nyquist_channel_scores_only_in_top_bin() {
        let b = SinusoidBackend::new(
            8,
            vec![vec![SinusoidComponent {
                freq: 4,
                amplitude: 1.0,
                phase: 0.0,
            }]],
            SinusoidBackend::flat_logits(8, 2),
        )
        .unwrap();
        let h = block_of(&b, 8);
        for s in 0..4 {
            let win = window_at_step(s, 4, 5, 0.4).unwrap();
            let ell = translated_filtering_score(&h, &win, 1e-5).unwrap();
            let holds_top = win.end() == 5;
            assert_eq!(ell.iter().any(|l| *l > 1e-9), holds_top, "s={s}");
        }
    }

    // Channel 0 sits in bin `lo` and peaks at position `a`; channel 1 sits in
    // bin `hi` and peaks at `b`. Both are cos², so each position's energy in a
    // band holding one of the bins is known exactly.
    fn two_token(block: usize, lo: usize, hi: usize, a: usize, b: usize) -> SinusoidBackend {
        let phase =
            |f: usize, p: usize| -2.0 * std::f64::consts::PI * (f * p) as f64 / block as f64;
        SinusoidBackend::new(
            block,
            vec![
                vec![SinusoidComponent {
                    freq: lo,
                    amplitude: 1.0,
                    phase: phase(lo, a),
                }],
                vec![SinusoidComponent {
                    freq: hi,
                    amplitude: 1.0,
                    phase: phase(hi, b),
                }],
            ],
            SinusoidBackend::flat_logits(block, 4),
        )
        .unwrap()
    }

    #[test]
    fn low_bin_token_commits_before_high_bin_token() {
        let backend = two_token(8, 1, 3, 0, 2);
        let plan = DecodePlan::new(8, 8, 4).unwrap();
        let out = decode(&backend, &[], &SamplerConfig::default(), &plan).unwrap();
        let steps = out.commit_steps();
        assert!(steps[0].unwrap() < steps[2].unwrap(), "{steps:?}");
    }

    #[test]
    fn rejects_out_of_range_frequency() {
        let err = SinusoidBackend::new(
            8,
            vec![vec![SinusoidComponent {
                freq: 5,
                amplitude: 1.0,
                phase: 0.0,
            }]],
            SinusoidBackend::flat_logits(8, 2),
        );
        assert!(matches!(
            err,
            Err(BackendError::FrequencyOutOfRange {
                freq: 5,
                num_bins: 5
            })
        ));
    }

    #[test]
    fn channel_parsing() {
        let c = SinusoidBackend::parse_channels("0:1; 4:0.5:1.57, 1:2").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].len(), 2);
        assert_eq!(c[1][0].phase, 1.57);
        assert!(SinusoidBackend::parse_channels("1").is_err());
        assert!(SinusoidBackend::parse_channels("a:1").is_err());
    }
}
