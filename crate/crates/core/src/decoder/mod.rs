//! Block-wise masked-diffusion decoding.
//!
//! The generated region is split into consecutive blocks of `block_size`
//! positions. Each block is completed in `steps_per_block` forward passes
//! before the next one starts. At every step the backend returns hidden
//! states and logits for the active block, the sampler scores the masked
//! positions, and the `k` best are committed with the argmax token of their
//! logits row, where `k = ⌈masked / (steps − step)⌉`.

mod replay;
mod sinusoid;
mod template;

pub use replay::ReplayBackend;
pub use sinusoid::{SinusoidBackend, SinusoidComponent};
pub use template::{Slot, SlotKind, Template, TemplateBackend, TemplateParams};

use thiserror::Error;

use crate::analysis::{DumpError, DumpFile, DumpStep, TraceRecord};
use crate::sampler::{
    score_step, select_positions, CalibratorHistory, Logits, SamplerConfig, SamplerError,
    SelectionRng,
};
use crate::spectral::{HiddenBlock, SpectralError};

pub type TokenId = u32;

/// Placeholder id for a position that has not been committed yet.
pub const MASK: TokenId = TokenId::MAX;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("replay dump exhausted at step {step}")]
    Exhausted { step: usize },
    #[error("{what} mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("step count mismatch: dump holds {recorded} steps, decode needs {needed}")]
    StepCountMismatch { recorded: usize, needed: usize },
    #[error("logits required: dump was recorded without logits")]
    LogitsRequired,
    #[error("frequency {freq} out of range for {num_bins} bins")]
    FrequencyOutOfRange { freq: usize, num_bins: usize },
    #[error("token {token} at position {position} is not a filler of its slot")]
    InconsistentBuffer { position: usize, token: TokenId },
    #[error("invalid backend parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// Backend response for the active block.
///
/// Values are held at single precision so that a recorded dump reproduces
/// them exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub hidden: HiddenBlock,
    pub logits: Logits,
}

impl ModelOutput {
    pub fn from_f32(
        block_len: usize,
        dim: usize,
        vocab: usize,
        hidden: &[f32],
        logits: &[f32],
    ) -> Result<Self, BackendError> {
        let hidden = HiddenBlock::new(
            block_len,
            dim,
            hidden.iter().map(|v| f64::from(*v)).collect(),
        )?;
        let logits = Logits::new(
            block_len,
            vocab,
            logits.iter().map(|v| f64::from(*v)).collect(),
        )?;
        Ok(Self { hidden, logits })
    }

    /// Rounds f64 backend output to single precision.
    pub fn rounded(
        block_len: usize,
        dim: usize,
        vocab: usize,
        hidden: &[f64],
        logits: &[f64],
    ) -> Result<Self, BackendError> {
        let h: Vec<f32> = hidden.iter().map(|v| *v as f32).collect();
        let l: Vec<f32> = logits.iter().map(|v| *v as f32).collect();
        Self::from_f32(block_len, dim, vocab, &h, &l)
    }
}

/// What the backend sees at one step.
#[derive(Debug, Clone, Copy)]
pub struct ForwardRequest<'a> {
    /// Prompt followed by the generated region; uncommitted slots hold [`MASK`].
    pub tokens: &'a [TokenId],
    pub prompt_len: usize,
    /// Offset of the active block within the generated region.
    pub block_start: usize,
    pub block_len: usize,
    pub global_step: usize,
    pub step_in_block: usize,
}

impl ForwardRequest<'_> {
    pub fn generated(&self) -> &[TokenId] {
        &self.tokens[self.prompt_len..]
    }

    pub fn block_tokens(&self) -> &[TokenId] {
        let start = self.prompt_len + self.block_start;
        &self.tokens[start..start + self.block_len]
    }
}

/// Block/step layout of a whole decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodePlan {
    pub gen_len: usize,
    pub block_size: usize,
    pub steps_per_block: usize,
}

impl DecodePlan {
    pub fn new(
        gen_len: usize,
        block_size: usize,
        steps_per_block: usize,
    ) -> Result<Self, DecodeError> {
        if gen_len == 0 {
            return Err(DecodeError::InvalidSchedule(
                "gen-len must be at least 1".into(),
            ));
        }
        if block_size == 0 {
            return Err(DecodeError::InvalidSchedule(
                "block-size must be at least 1".into(),
            ));
        }
        if steps_per_block == 0 {
            return Err(DecodeError::InvalidSchedule(
                "steps must be at least 1".into(),
            ));
        }
        if steps_per_block > block_size {
            return Err(DecodeError::InvalidSchedule(format!(
                "steps ({steps_per_block}) exceeds block-size ({block_size})"
            )));
        }
        Ok(Self {
            gen_len,
            block_size,
            steps_per_block,
        })
    }

    /// `(start, len)` of every block; the last may be short.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        (0..self.gen_len)
            .step_by(self.block_size)
            .map(|start| (start, self.block_size.min(self.gen_len - start)))
            .collect()
    }

    /// Steps used for a block of `len` positions.
    pub fn steps_for(&self, len: usize) -> usize {
        self.steps_per_block.min(len)
    }

    pub fn total_steps(&self) -> usize {
        self.blocks()
            .iter()
            .map(|(_, len)| self.steps_for(*len))
            .sum()
    }
}

pub trait Backend: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn forward(&self, req: &ForwardRequest<'_>) -> Result<ModelOutput, BackendError>;

    /// Rejects plans the backend cannot serve before any step runs.
    fn check_plan(&self, _plan: &DecodePlan) -> Result<(), BackendError> {
        Ok(())
    }

    /// Mask the backend was recorded under at `global_step`, if it replays one.
    fn recorded_mask(&self, _global_step: usize) -> Option<&[bool]> {
        None
    }
}

/// Number of positions to commit at `step` with `masked` positions left.
pub fn unmask_budget(masked: usize, steps: usize, step: usize) -> usize {
    masked.div_ceil(steps - step)
}

/// Per-step commit counts for a block of `len` positions over `steps` steps.
pub fn unmask_schedule(len: usize, steps: usize) -> Vec<usize> {
    let mut left = len;
    (0..steps)
        .map(|s| {
            let k = unmask_budget(left, steps, s);
            left -= k;
            k
        })
        .collect()
}

/// Mutable per-sequence state.
#[derive(Debug, Clone)]
pub struct DecodeState {
    pub tokens: Vec<TokenId>,
    pub prompt_len: usize,
    pub block_index: usize,
    pub step_in_block: usize,
    pub global_step: usize,
    pub calibrator: CalibratorHistory,
    pub trace: Vec<TraceRecord>,
}

impl DecodeState {
    pub fn new(prompt: &[TokenId], gen_len: usize, history_len: usize) -> Self {
        let mut tokens = prompt.to_vec();
        tokens.resize(prompt.len() + gen_len, MASK);
        Self {
            tokens,
            prompt_len: prompt.len(),
            block_index: 0,
            step_in_block: 0,
            global_step: 0,
            calibrator: CalibratorHistory::new(history_len),
            trace: Vec::new(),
        }
    }

    pub fn generated(&self) -> &[TokenId] {
        &self.tokens[self.prompt_len..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    /// Generated region only.
    pub tokens: Vec<TokenId>,
    pub trace: Vec<TraceRecord>,
    /// First step whose live mask differed from the recorded one (replay only).
    pub divergent_from_step: Option<usize>,
}

impl DecodeOutcome {
    /// Step at which each generated position was committed.
    pub fn commit_steps(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.tokens.len()];
        for r in self.trace.iter().filter(|r| r.selected) {
            out[r.position] = Some(r.step);
        }
        out
    }
}

pub fn decode(
    backend: &dyn Backend,
    prompt: &[TokenId],
    cfg: &SamplerConfig,
    plan: &DecodePlan,
) -> Result<DecodeOutcome, DecodeError> {
    run(backend, prompt, cfg, plan, None)
}

/// Decodes while recording every forward pass into a dump.
///
/// The dump format has one fixed block length, so `block_size` must divide
/// `gen_len`.
pub fn decode_and_record(
    backend: &dyn Backend,
    prompt: &[TokenId],
    cfg: &SamplerConfig,
    plan: &DecodePlan,
) -> Result<(DecodeOutcome, DumpFile), DecodeError> {
    if !plan.gen_len.is_multiple_of(plan.block_size) {
        return Err(DecodeError::InvalidSchedule(format!(
            "recording needs block-size ({}) to divide gen-len ({})",
            plan.block_size, plan.gen_len
        )));
    }
    let mut dump = None;
    let outcome = run(backend, prompt, cfg, plan, Some(&mut dump))?;
    let dump = match dump {
        Some(d) => d,
        None => return Err(DecodeError::Invariant("no steps recorded".into())),
    };
    Ok((outcome, dump))
}

fn run(
    backend: &dyn Backend,
    prompt: &[TokenId],
    cfg: &SamplerConfig,
    plan: &DecodePlan,
    mut recorder: Option<&mut Option<DumpFile>>,
) -> Result<DecodeOutcome, DecodeError> {
    cfg.validate()?;
    backend.check_plan(plan)?;
    let mut state = DecodeState::new(prompt, plan.gen_len, cfg.history_len);
    let mut rng = SelectionRng::new(cfg.seed);
    let mut divergent_from_step = None;

    for (block_index, (start, len)) in plan.blocks().into_iter().enumerate() {
        state.block_index = block_index;
        let steps = plan.steps_for(len);
        let abs = state.prompt_len + start;
        for s in 0..steps {
            state.step_in_block = s;
            let mask: Vec<bool> = state.tokens[abs..abs + len]
                .iter()
                .map(|t| *t == MASK)
                .collect();
            let masked = mask.iter().filter(|m| **m).count();
            if masked == 0 {
                return Err(DecodeError::Invariant(format!(
                    "block {block_index} has no masked positions at step {s}"
                )));
            }
            if divergent_from_step.is_none() {
                if let Some(rec) = backend.recorded_mask(state.global_step) {
                    if rec != mask.as_slice() {
                        divergent_from_step = Some(state.global_step);
                    }
                }
            }

            let req = ForwardRequest {
                tokens: &state.tokens,
                prompt_len: state.prompt_len,
                block_start: start,
                block_len: len,
                global_step: state.global_step,
                step_in_block: s,
            };
            let out = backend.forward(&req)?;
            if out.hidden.block_len() != len || out.logits.rows() != len {
                return Err(BackendError::DimensionMismatch {
                    what: "block length",
                    expected: len,
                    got: out.hidden.block_len(),
                }
                .into());
            }

            let scores = score_step(
                &out.hidden,
                &out.logits,
                &mask,
                s,
                steps,
                cfg,
                &mut state.calibrator,
            )?;
            let k = unmask_budget(masked, steps, s);
            let picked = select_positions(&scores.fused, &mask, k, cfg.kind, &mut rng)?;

            let mut committed = vec![None; len];
            for t in &picked {
                let token = out.logits.argmax(*t);
                state.tokens[abs + t] = token;
                committed[*t] = Some(token);
            }
            for t in 0..len {
                state.trace.push(TraceRecord {
                    step: state.global_step,
                    position: start + t,
                    ell: scores.ell[t],
                    conf: mask[t].then_some(scores.conf[t]),
                    beta: scores.beta,
                    fused: mask[t].then_some(scores.fused[t]),
                    selected: committed[t].is_some(),
                    committed_token: committed[t],
                });
            }

            if let Some(slot) = recorder.as_deref_mut() {
                let dump = slot.get_or_insert_with(|| {
                    DumpFile::new(
                        len as u32,
                        out.hidden.dim() as u32,
                        out.logits.vocab() as u32,
                        true,
                    )
                });
                dump.push_step(DumpStep {
                    step_index: state.global_step as u32,
                    mask: mask.clone(),
                    hidden: out.hidden.data().iter().map(|v| *v as f32).collect(),
                    logits: Some(out.logits.data().iter().map(|v| *v as f32).collect()),
                })?;
            }
            state.global_step += 1;
        }
        if state.tokens[abs..abs + len].contains(&MASK) {
            return Err(DecodeError::Invariant(format!(
                "block {block_index} finished with masked positions"
            )));
        }
    }

    Ok(DecodeOutcome {
        tokens: state.generated().to_vec(),
        trace: state.trace,
        divergent_from_step,
    })
}
