use super::{Backend, BackendError, DecodePlan, ForwardRequest, ModelOutput};
use crate::analysis::DumpFile;

/// Serves the forward passes stored in a dump, one per global step.
///
/// The scheduler still makes its own choices. When those differ from the ones
/// the dump was recorded under, later recorded states no longer match the
/// live buffer; the decoder reports that as a divergent replay.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    dump: DumpFile,
}

impl ReplayBackend {
    pub fn new(dump: DumpFile) -> Result<Self, BackendError> {
        if !dump.header.has_logits() {
            return Err(BackendError::LogitsRequired);
        }
        Ok(Self { dump })
    }

    pub fn block_len(&self) -> usize {
        self.dump.header.block_len as usize
    }

    pub fn num_steps(&self) -> usize {
        self.dump.steps.len()
    }
}

impl Backend for ReplayBackend {
    fn vocab_size(&self) -> usize {
        self.dump.header.vocab as usize
    }

    fn forward(&self, req: &ForwardRequest<'_>) -> Result<ModelOutput, BackendError> {
        let step = self
            .dump
            .steps
            .get(req.global_step)
            .ok_or(BackendError::Exhausted {
                step: req.global_step,
            })?;
        if req.block_len != self.block_len() {
            return Err(BackendError::DimensionMismatch {
                what: "block length",
                expected: self.block_len(),
                got: req.block_len,
            });
        }
        let logits = step.logits.as_deref().ok_or(BackendError::LogitsRequired)?;
        ModelOutput::from_f32(
            self.block_len(),
            self.dump.header.dim as usize,
            self.vocab_size(),
            &step.hidden,
            logits,
        )
    }

    fn check_plan(&self, plan: &DecodePlan) -> Result<(), BackendError> {
        if plan.block_size != self.block_len() {
            return Err(BackendError::DimensionMismatch {
                what: "block size",
                expected: self.block_len(),
                got: plan.block_size,
            });
        }
        if self.num_steps() > plan.total_steps() {
            return Err(BackendError::StepCountMismatch {
                recorded: self.num_steps(),
                needed: plan.total_steps(),
            });
        }
        Ok(())
    }

    fn recorded_mask(&self, global_step: usize) -> Option<&[bool]> {
        self.dump.steps.get(global_step).map(|s| s.mask.as_slice())
    }
}
