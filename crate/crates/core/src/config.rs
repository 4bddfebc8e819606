//! Run configuration: flat `key = value` files merged with flag overrides.
//!
//! ```
//! use fourier_sampler::config::{parse_kv, RunConfig, Settings};
//!
//! let file = parse_kv("rho = 0.4\nsteps = 32\n").unwrap();
//! let mut flags = Settings::new();
//! flags.insert("steps".into(), "16".into());
//! let cfg = RunConfig::resolve(&file, &flags).unwrap();
//! assert_eq!(cfg.sampler.rho, 0.4);
//! assert_eq!(cfg.steps_per_block, 16);
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::TraceFormat;
use crate::decoder::{DecodePlan, TemplateParams, TokenId};
use crate::sampler::{SamplerConfig, SamplerKind};

pub type Settings = BTreeMap<String, String>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

/// Every key a config file may set. Flags use the same names.
pub const KEYS: &[&str] = &[
    "backend",
    "sampler",
    "rho",
    "beta-min",
    "beta-max",
    "epsilon",
    "history-len",
    "z-scale",
    "block-size",
    "steps",
    "gen-len",
    "seed",
    "prompt",
    "trace",
    "trace-format",
    "record-dump",
    "out",
    "dump",
    "components",
    "vocab",
    "fillers",
    "dim",
    "bump-width",
];

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<Settings, ConfigError> {
    let mut out = Settings::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            reason: "expected `key = value`".into(),
        })?;
        let key = normalize(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                reason: format!("`{key}` set twice"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Sinusoid,
    Template,
    Replay,
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sinusoid" => Ok(BackendKind::Sinusoid),
            "template" | "template_lm" => Ok(BackendKind::Template),
            "replay" => Ok(BackendKind::Replay),
            other => Err(format!(
                "unknown backend `{other}` (expected sinusoid, template or replay)"
            )),
        }
    }
}

/// Fully validated settings for one decode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub sampler: SamplerConfig,
    pub gen_len: usize,
    pub block_size: usize,
    pub steps_per_block: usize,
    pub prompt: Vec<TokenId>,
    pub trace: Option<PathBuf>,
    pub trace_format: Option<TraceFormat>,
    pub record_dump: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub dump: Option<PathBuf>,
    /// Sinusoid channel terms, `freq:amp[:phase]` (see the sinusoid backend).
    pub components: String,
    /// Vocabulary of the sinusoid backend's flat logits.
    pub vocab: usize,
    pub template: TemplateParams,
}

pub const DEFAULT_COMPONENTS: &str =
    "0:1; 1:0.8:0.5; 2:0.6:1.0; 3:0.5:1.5; 5:0.4:2.0; 8:0.3:2.5; 13:0.25:3.0; 21:0.2:0.7";

struct Lookup<'a> {
    file: &'a Settings,
    flags: &'a Settings,
}

impl Lookup<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.flags
            .get(key)
            .or_else(|| self.file.get(key))
            .map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Invalid {
                key: key.to_string(),
                reason: format!("`{v}`: {e}"),
            }),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }
}

impl RunConfig {
    /// Merges file settings with flag settings (flags win) and validates.
    pub fn resolve(file: &Settings, flags: &Settings) -> Result<Self, ConfigError> {
        for key in file.keys().chain(flags.keys()) {
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        let l = Lookup { file, flags };
        let d = SamplerConfig::default();
        let sampler = SamplerConfig {
            rho: l.get("rho", d.rho)?,
            beta_min: l.get("beta-min", d.beta_min)?,
            beta_max: l.get("beta-max", d.beta_max)?,
            epsilon: l.get("epsilon", d.epsilon)?,
            history_len: l.get("history-len", d.history_len)?,
            z_scale: l.get("z-scale", d.z_scale)?,
            kind: l.get("sampler", SamplerKind::Fourier)?,
            seed: l.get("seed", 0u64)?,
        };
        sampler.validate().map_err(|e| match e {
            crate::sampler::SamplerError::InvalidConfig { key, reason } => ConfigError::Invalid {
                key: key.to_string(),
                reason,
            },
            other => ConfigError::Invalid {
                key: "sampler".into(),
                reason: other.to_string(),
            },
        })?;

        let block_size: usize = l.get("block-size", 64)?;
        let steps_per_block: usize = l.get("steps", 64)?;
        let gen_len: usize = l.get("gen-len", 64)?;
        let invalid = |key: &str, reason: String| ConfigError::Invalid {
            key: key.to_string(),
            reason,
        };
        if block_size == 0 {
            return Err(invalid("block-size", "must be at least 1".into()));
        }
        if steps_per_block == 0 {
            return Err(invalid("steps", "must be at least 1".into()));
        }
        if steps_per_block > block_size {
            return Err(invalid(
                "steps",
                format!("{steps_per_block} exceeds block-size {block_size}"),
            ));
        }
        if gen_len == 0 {
            return Err(invalid("gen-len", "must be at least 1".into()));
        }

        let prompt = match l.raw("prompt") {
            None => Vec::new(),
            Some(p) => p
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<TokenId>()
                        .map_err(|_| invalid("prompt", format!("bad token id `{s}`")))
                })
                .collect::<Result<_, _>>()?,
        };

        let trace_format = match l.raw("trace-format") {
            None => None,
            Some(f) => Some(
                f.parse::<TraceFormat>()
                    .map_err(|e| invalid("trace-format", e.to_string()))?,
            ),
        };

        let td = TemplateParams::default();
        let template = TemplateParams {
            detail_fillers: l.get("fillers", td.detail_fillers)?,
            dim: l.get("dim", td.dim)?,
            bump_width: l.get("bump-width", td.bump_width)?,
            ..td
        };
        template
            .validate()
            .map_err(|e| invalid("fillers", e.to_string()))?;

        let backend: BackendKind = l.get("backend", BackendKind::Template)?;
        let dump = l.path("dump");
        if backend == BackendKind::Replay && dump.is_none() {
            return Err(invalid("dump", "replay backend needs a dump file".into()));
        }
        let vocab: usize = l.get("vocab", 8)?;
        if vocab == 0 {
            return Err(invalid("vocab", "must be at least 1".into()));
        }

        let cfg = Self {
            backend,
            sampler,
            gen_len,
            block_size,
            steps_per_block,
            prompt,
            trace: l.path("trace"),
            trace_format,
            record_dump: l.path("record-dump"),
            out: l.path("out"),
            dump,
            components: l
                .raw("components")
                .unwrap_or(DEFAULT_COMPONENTS)
                .to_string(),
            vocab,
            template,
        };
        if cfg.record_dump.is_some() && !gen_len.is_multiple_of(block_size) {
            return Err(invalid(
                "record-dump",
                format!("block-size {block_size} must divide gen-len {gen_len} when recording"),
            ));
        }
        Ok(cfg)
    }

    pub fn plan(&self) -> DecodePlan {
        DecodePlan::new(self.gen_len, self.block_size, self.steps_per_block)
            .expect("validated in resolve")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> Settings {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(&Settings::new(), &Settings::new()).unwrap();
        assert_eq!(c.sampler, SamplerConfig::default());
        assert_eq!((c.block_size, c.steps_per_block, c.gen_len), (64, 64, 64));
        assert_eq!(c.backend, BackendKind::Template);
    }

    #[test]
    fn flags_override_file() {
        let file = parse_kv("# experiment\nrho = 0.4\nbeta_min = 0.3 # trailing\nsampler = l2r\n")
            .unwrap();
        let c = RunConfig::resolve(&file, &flags(&[("rho", "0.1")])).unwrap();
        assert_eq!(c.sampler.rho, 0.1);
        assert_eq!(c.sampler.beta_min, 0.3);
        assert_eq!(c.sampler.kind, SamplerKind::LeftToRight);
    }

    #[test]
    fn errors_name_the_key() {
        let err = RunConfig::resolve(&Settings::new(), &flags(&[("steps", "0")])).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "steps"));
        let err = RunConfig::resolve(&Settings::new(), &flags(&[("rho", "abc")])).unwrap_err();
        assert!(err.to_string().contains("`rho`"));
        let err = RunConfig::resolve(&Settings::new(), &flags(&[("beta-max", "0.1")])).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "beta-max"));
        assert!(
            matches!(parse_kv("colour = red"), Err(ConfigError::UnknownKey(k)) if k == "colour")
        );
        assert!(matches!(
            parse_kv("rho 0.2"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        let err =
            RunConfig::resolve(&Settings::new(), &flags(&[("backend", "replay")])).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "dump"));
        let err = RunConfig::resolve(&Settings::new(), &flags(&[("steps", "65")])).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "steps"));
    }

    #[test]
    fn prompt_and_paths() {
        let c = RunConfig::resolve(
            &Settings::new(),
            &flags(&[
                ("prompt", "1, 2 3"),
                ("trace", "t.csv"),
                ("trace-format", "svg"),
            ]),
        )
        .unwrap();
        assert_eq!(c.prompt, vec![1, 2, 3]);
        assert_eq!(c.trace, Some(PathBuf::from("t.csv")));
        assert_eq!(c.trace_format, Some(TraceFormat::SvgHeatmap));
    }
}
