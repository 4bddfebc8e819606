//! Toy language model over a slot template.
//!
//! A template is a sequence of slots. A STRUCT slot has exactly one filler and
//! the model predicts it with near certainty. A DETAIL slot accepts any of `m`
//! fillers and the model is near-uniform over them until one is committed.
//!
//! Hidden states are built so that the slot kind shows up in the spectrum:
//! every position contributes a Gaussian bump of its token embedding centred
//! on itself. STRUCT bumps are smooth (energy near bin 0); DETAIL bumps are
//! sign-alternated (energy near the top bin).

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, DecodePlan, ForwardRequest, ModelOutput, TokenId, MASK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SlotKind {
    Struct,
    Detail,
}

impl SlotKind {
    pub fn label(self) -> &'static str {
        match self {
            SlotKind::Struct => "STRUCT",
            SlotKind::Detail => "DETAIL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot {
    Struct { filler: TokenId },
    Detail { fillers: Vec<TokenId> },
}

impl Slot {
    pub fn kind(&self) -> SlotKind {
        match self {
            Slot::Struct { .. } => SlotKind::Struct,
            Slot::Detail { .. } => SlotKind::Detail,
        }
    }

    pub fn accepts(&self, token: TokenId) -> bool {
        match self {
            Slot::Struct { filler } => *filler == token,
            Slot::Detail { fillers } => fillers.contains(&token),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateParams {
    /// Fillers per DETAIL slot (`m`).
    pub detail_fillers: usize,
    /// Token ids `0..struct_vocab` are STRUCT words.
    pub struct_vocab: usize,
    /// Token ids `struct_vocab..struct_vocab + detail_vocab` are DETAIL words.
    pub detail_vocab: usize,
    pub dim: usize,
    /// Standard deviation, in positions, of each token's bump.
    pub bump_width: f64,
    /// Longest run of same-kind slots.
    pub max_run: usize,
}

impl Default for TemplateParams {
    fn default() -> Self {
        Self {
            detail_fillers: 4,
            struct_vocab: 16,
            detail_vocab: 48,
            dim: 32,
            bump_width: 1.0,
            max_run: 3,
        }
    }
}

impl TemplateParams {
    pub fn vocab(&self) -> usize {
        self.struct_vocab + self.detail_vocab
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: &str| Err(BackendError::InvalidParams(m.to_string()));
        if self.detail_fillers < 2 {
            return bad("detail slots need at least 2 fillers");
        }
        if self.detail_fillers > self.detail_vocab {
            return bad("more fillers per slot than detail words");
        }
        if self.struct_vocab == 0 {
            return bad("struct vocabulary is empty");
        }
        if self.dim == 0 {
            return bad("embedding dim must be positive");
        }
        if !(self.bump_width.is_finite() && self.bump_width > 0.0) {
            return bad("bump width must be positive");
        }
        if self.max_run == 0 {
            return bad("max run must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    slots: Vec<Slot>,
}

impl Template {
    pub fn new(slots: Vec<Slot>) -> Result<Self, BackendError> {
        if slots.is_empty() {
            return Err(BackendError::InvalidParams("template is empty".into()));
        }
        Ok(Self { slots })
    }

    /// Random template of `len` slots: alternating runs of STRUCT and DETAIL
    /// slots, each run `1..=max_run` long.
    pub fn generate(len: usize, params: &TemplateParams, seed: u64) -> Result<Self, BackendError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kind = if rng.random_bool(0.5) {
            SlotKind::Struct
        } else {
            SlotKind::Detail
        };
        let mut slots = Vec::with_capacity(len);
        while slots.len() < len {
            let run = rng.random_range(1..=params.max_run);
            for _ in 0..run.min(len - slots.len()) {
                slots.push(match kind {
                    SlotKind::Struct => Slot::Struct {
                        filler: rng.random_range(0..params.struct_vocab) as TokenId,
                    },
                    SlotKind::Detail => {
                        let picks = rand::seq::index::sample(
                            &mut rng,
                            params.detail_vocab,
                            params.detail_fillers,
                        );
                        let mut fillers: Vec<TokenId> = picks
                            .into_iter()
                            .map(|i| (params.struct_vocab + i) as TokenId)
                            .collect();
                        fillers.sort_unstable();
                        Slot::Detail { fillers }
                    }
                });
            }
            kind = match kind {
                SlotKind::Struct => SlotKind::Detail,
                SlotKind::Detail => SlotKind::Struct,
            };
        }
        Self::new(slots)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn kinds(&self) -> Vec<SlotKind> {
        self.slots.iter().map(Slot::kind).collect()
    }

    /// `position<TAB>label` lines, one per slot.
    pub fn labels_text(&self) -> String {
        self.slots
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{i}\t{}\n", s.kind().label()))
            .collect()
    }

    /// True when every token fills its slot.
    pub fn is_valid(&self, tokens: &[TokenId]) -> bool {
        tokens.len() == self.slots.len()
            && self.slots.iter().zip(tokens).all(|(s, t)| s.accepts(*t))
    }
}

// SplitMix64 finalizer, used for per-(slot, filler) logit jitter.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STRUCT_LOGIT: f64 = 10.0;
const DETAIL_JITTER: f64 = 0.05;
const OFF_SLOT_LOGIT: f64 = -20.0;

#[derive(Debug, Clone)]
pub struct TemplateBackend {
    template: Template,
    params: TemplateParams,
    embeddings: Vec<f64>,
    seed: u64,
}

impl TemplateBackend {
    pub fn new(
        template: Template,
        params: TemplateParams,
        embedding_seed: u64,
    ) -> Result<Self, BackendError> {
        params.validate()?;
        let vocab = params.vocab();
        for s in template.slots() {
            let ok = match s {
                Slot::Struct { filler } => (*filler as usize) < params.struct_vocab,
                Slot::Detail { fillers } => {
                    fillers.len() >= 2
                        && fillers
                            .iter()
                            .all(|f| (*f as usize) >= params.struct_vocab && (*f as usize) < vocab)
                }
            };
            if !ok {
                return Err(BackendError::InvalidParams(format!(
                    "slot {s:?} does not fit the vocabulary"
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(embedding_seed);
        let mut embeddings = Vec::with_capacity(vocab * params.dim);
        for _ in 0..vocab {
            let v: Vec<f64> = (0..params.dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            embeddings.extend(v.into_iter().map(|x| x / norm));
        }
        Ok(Self {
            template,
            params,
            embeddings,
            seed: embedding_seed,
        })
    }

    /// Template of `len` slots and backend sharing one seed.
    pub fn generate(len: usize, params: TemplateParams, seed: u64) -> Result<Self, BackendError> {
        let template = Template::generate(len, &params, seed)?;
        Self::new(template, params, seed)
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    pub fn params(&self) -> &TemplateParams {
        &self.params
    }

    fn embedding(&self, token: TokenId) -> &[f64] {
        let d = self.params.dim;
        &self.embeddings[token as usize * d..(token as usize + 1) * d]
    }

    // Vector a position feeds into the block: the committed token's embedding,
    // or the expected one while masked.
    fn source_vector(&self, position: usize, token: TokenId) -> Vec<f64> {
        if token != MASK {
            return self.embedding(token).to_vec();
        }
        match &self.template.slots[position] {
            Slot::Struct { filler } => self.embedding(*filler).to_vec(),
            Slot::Detail { fillers } => {
                let mut v = vec![0.0; self.params.dim];
                for f in fillers {
                    for (a, b) in v.iter_mut().zip(self.embedding(*f)) {
                        *a += b / fillers.len() as f64;
                    }
                }
                v
            }
        }
    }

    /// Hidden states for generated positions `start..start + len`, row-major.
    pub fn hidden_values(&self, generated: &[TokenId], start: usize, len: usize) -> Vec<f64> {
        let dim = self.params.dim;
        let sigma = self.params.bump_width;
        let reach = (3.0 * sigma).ceil() as isize;
        let mut out = vec![0.0; len * dim];
        for i in 0..len {
            let pos = start + i;
            let v = self.source_vector(pos, generated[pos]);
            let detail = self.template.slots[pos].kind() == SlotKind::Detail;
            for off in -reach..=reach {
                let tau = i as isize + off;
                if tau < 0 || tau >= len as isize {
                    continue;
                }
                let mut g = (-(off * off) as f64 / (2.0 * sigma * sigma)).exp();
                if detail && off % 2 != 0 {
                    g = -g;
                }
                let row = &mut out[tau as usize * dim..(tau as usize + 1) * dim];
                for (r, x) in row.iter_mut().zip(&v) {
                    *r += g * x;
                }
            }
        }
        out
    }

    /// Logit rows for generated positions `start..start + len`, row-major.
    pub fn logit_values(&self, start: usize, len: usize) -> Vec<f64> {
        let vocab = self.params.vocab();
        let mut out = vec![0.0; len * vocab];
        for i in 0..len {
            let pos = start + i;
            let row = &mut out[i * vocab..(i + 1) * vocab];
            match &self.template.slots[pos] {
                Slot::Struct { filler } => row[*filler as usize] = STRUCT_LOGIT,
                Slot::Detail { fillers } => {
                    row.fill(OFF_SLOT_LOGIT);
                    for f in fillers {
                        let h = mix(self.seed ^ mix(pos as u64) ^ mix(u64::from(*f) << 32));
                        row[*f as usize] = DETAIL_JITTER * (h >> 11) as f64 / (1u64 << 53) as f64;
                    }
                }
            }
        }
        out
    }
}

impl Backend for TemplateBackend {
    fn vocab_size(&self) -> usize {
        self.params.vocab()
    }

    fn forward(&self, req: &ForwardRequest<'_>) -> Result<ModelOutput, BackendError> {
        let generated = req.generated();
        if generated.len() != self.template.len() {
            return Err(BackendError::DimensionMismatch {
                what: "generation length",
                expected: self.template.len(),
                got: generated.len(),
            });
        }
        for (position, (slot, token)) in self.template.slots.iter().zip(generated).enumerate() {
            if *token != MASK && !slot.accepts(*token) {
                return Err(BackendError::InconsistentBuffer {
                    position,
                    token: *token,
                });
            }
        }
        let hidden = self.hidden_values(generated, req.block_start, req.block_len);
        let logits = self.logit_values(req.block_start, req.block_len);
        ModelOutput::rounded(
            req.block_len,
            self.params.dim,
            self.params.vocab(),
            &hidden,
            &logits,
        )
    }

    fn check_plan(&self, plan: &DecodePlan) -> Result<(), BackendError> {
        if plan.gen_len != self.template.len() {
            return Err(BackendError::DimensionMismatch {
                what: "generation length",
                expected: self.template.len(),
                got: plan.gen_len,
            });
        }
        Ok(())
    }
}
