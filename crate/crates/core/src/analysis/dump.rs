//! Binary interchange of per-step hidden states, logits, and mask bitmaps.
//!
//! Layout, all little-endian:
//!
//! ```text
//! header   magic "FSDUMP01" (8 bytes)
//!          format_version u32, B u32, D u32, V u32, num_steps u32, flags u32
//! step*    step_index u32
//!          mask bitmap ⌈B/8⌉ bytes, bit t = byte t/8 bit t%8 (1 = masked)
//!          hidden B×D f32 row-major
//!          logits B×V f32 row-major      (only when flags bit 0 is set)
//! trailer  crc32 (IEEE) of every preceding byte, u32
//! ```

use std::io::{Read, Write};

use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"FSDUMP01";
pub const FORMAT_VERSION: u32 = 1;
pub const FLAG_LOGITS: u32 = 1;
pub const HEADER_LEN: usize = 32;
const TRAILER_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("bad magic: expected \"FSDUMP01\"")]
    BadMagic,
    #[error("unsupported format version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("size mismatch: header implies {expected} bytes, found {actual}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("malformed dump: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpHeader {
    pub format_version: u32,
    pub block_len: u32,
    pub dim: u32,
    pub vocab: u32,
    pub num_steps: u32,
    pub flags: u32,
}

impl DumpHeader {
    pub fn has_logits(&self) -> bool {
        self.flags & FLAG_LOGITS != 0
    }

    pub fn bitmap_len(&self) -> usize {
        (self.block_len as usize).div_ceil(8)
    }

    pub fn step_len(&self) -> u64 {
        let b = self.block_len as u64;
        let mut n = 4 + self.bitmap_len() as u64 + 4 * b * self.dim as u64;
        if self.has_logits() {
            n += 4 * b * self.vocab as u64;
        }
        n
    }

    /// Exact file size implied by the header.
    pub fn file_len(&self) -> u64 {
        HEADER_LEN as u64 + self.num_steps as u64 * self.step_len() + TRAILER_LEN as u64
    }
}

/// One recorded forward pass over the active block.
#[derive(Debug, Clone)]
pub struct DumpStep {
    pub step_index: u32,
    pub mask: Vec<bool>,
    pub hidden: Vec<f32>,
    pub logits: Option<Vec<f32>>,
}

fn same_bits(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

impl PartialEq for DumpStep {
    fn eq(&self, other: &Self) -> bool {
        self.step_index == other.step_index
            && self.mask == other.mask
            && same_bits(&self.hidden, &other.hidden)
            && match (&self.logits, &other.logits) {
                (Some(a), Some(b)) => same_bits(a, b),
                (None, None) => true,
                _ => false,
            }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpFile {
    pub header: DumpHeader,
    pub steps: Vec<DumpStep>,
}

impl DumpFile {
    /// Empty dump for blocks of `block_len × dim` with vocabulary `vocab`.
    pub fn new(block_len: u32, dim: u32, vocab: u32, with_logits: bool) -> Self {
        Self {
            header: DumpHeader {
                format_version: FORMAT_VERSION,
                block_len,
                dim,
                vocab,
                num_steps: 0,
                flags: if with_logits { FLAG_LOGITS } else { 0 },
            },
            steps: Vec::new(),
        }
    }

    /// Appends a step and bumps `num_steps`.
    pub fn push_step(&mut self, step: DumpStep) -> Result<(), DumpError> {
        self.check_step(&step)?;
        self.steps.push(step);
        self.header.num_steps = self.steps.len() as u32;
        Ok(())
    }

    fn check_step(&self, step: &DumpStep) -> Result<(), DumpError> {
        let h = &self.header;
        let b = h.block_len as usize;
        if step.mask.len() != b {
            return Err(DumpError::Malformed(format!(
                "step {}: mask has {} entries, expected {b}",
                step.step_index,
                step.mask.len()
            )));
        }
        if step.hidden.len() != b * h.dim as usize {
            return Err(DumpError::Malformed(format!(
                "step {}: hidden has {} values, expected {}",
                step.step_index,
                step.hidden.len(),
                b * h.dim as usize
            )));
        }
        match (&step.logits, h.has_logits()) {
            (Some(l), true) if l.len() == b * h.vocab as usize => Ok(()),
            (None, false) => Ok(()),
            (Some(l), true) => Err(DumpError::Malformed(format!(
                "step {}: logits have {} values, expected {}",
                step.step_index,
                l.len(),
                b * h.vocab as usize
            ))),
            _ => Err(DumpError::Malformed(format!(
                "step {}: logits presence disagrees with header flags",
                step.step_index
            ))),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, DumpError> {
        let h = &self.header;
        if h.num_steps as usize != self.steps.len() {
            return Err(DumpError::Malformed(format!(
                "header says {} steps, dump holds {}",
                h.num_steps,
                self.steps.len()
            )));
        }
        let mut out = Vec::with_capacity(h.file_len() as usize);
        out.extend_from_slice(MAGIC);
        for v in [
            h.format_version,
            h.block_len,
            h.dim,
            h.vocab,
            h.num_steps,
            h.flags,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for step in &self.steps {
            self.check_step(step)?;
            out.extend_from_slice(&step.step_index.to_le_bytes());
            let mut bitmap = vec![0u8; h.bitmap_len()];
            for (t, m) in step.mask.iter().enumerate() {
                if *m {
                    bitmap[t / 8] |= 1 << (t % 8);
                }
            }
            out.extend_from_slice(&bitmap);
            for v in &step.hidden {
                out.extend_from_slice(&v.to_le_bytes());
            }
            if let Some(logits) = &step.logits {
                for v in logits {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DumpError> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(DumpError::BadMagic);
        }
        if bytes.len() < HEADER_LEN + TRAILER_LEN {
            return Err(DumpError::SizeMismatch {
                expected: (HEADER_LEN + TRAILER_LEN) as u64,
                actual: bytes.len() as u64,
            });
        }
        let mut cur = Cursor::new(&bytes[8..]);
        let format_version = cur.u32();
        if format_version != FORMAT_VERSION {
            return Err(DumpError::UnsupportedVersion(format_version));
        }
        let header = DumpHeader {
            format_version,
            block_len: cur.u32(),
            dim: cur.u32(),
            vocab: cur.u32(),
            num_steps: cur.u32(),
            flags: cur.u32(),
        };
        let expected = header.file_len();
        if expected != bytes.len() as u64 {
            return Err(DumpError::SizeMismatch {
                expected,
                actual: bytes.len() as u64,
            });
        }
        let body_end = bytes.len() - TRAILER_LEN;
        let stored = u32::from_le_bytes(bytes[body_end..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&bytes[..body_end]);
        if stored != computed {
            return Err(DumpError::CrcMismatch { stored, computed });
        }

        let b = header.block_len as usize;
        let mut cur = Cursor::new(&bytes[HEADER_LEN..body_end]);
        let mut steps = Vec::with_capacity(header.num_steps as usize);
        for _ in 0..header.num_steps {
            let step_index = cur.u32();
            let bitmap = cur.take(header.bitmap_len());
            let mask: Vec<bool> = (0..b).map(|t| bitmap[t / 8] >> (t % 8) & 1 == 1).collect();
            if !b.is_multiple_of(8) && bitmap[b / 8] >> (b % 8) != 0 {
                return Err(DumpError::Malformed(format!(
                    "step {step_index}: padding bits set in mask bitmap"
                )));
            }
            let hidden = cur.f32s(b * header.dim as usize);
            let logits = header
                .has_logits()
                .then(|| cur.f32s(b * header.vocab as usize));
            steps.push(DumpStep {
                step_index,
                mask,
                hidden,
                logits,
            });
        }
        Ok(Self { header, steps })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take(4).try_into().expect("4 bytes"))
    }

    fn f32s(&mut self, n: usize) -> Vec<f32> {
        self.take(4 * n)
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    }
}

pub fn write_dump<W: Write>(mut w: W, dump: &DumpFile) -> Result<(), DumpError> {
    w.write_all(&dump.to_bytes()?)?;
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> Result<DumpFile, DumpError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    DumpFile::from_bytes(&bytes)
}
