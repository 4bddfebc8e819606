//! `fsampler` subcommands. [`run`] is the whole program minus process exit,
//! so tests drive it in-process.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use fourier_sampler::analysis::{
    export_trace, group_stats, parse_labels, read_dump, spectral_profiles, top_k_profiles,
    write_dump, AnalysisError, DumpError, DumpFile, FreqGroup, TokenSpectralProfile, TraceFormat,
};
use fourier_sampler::compare::{aggregate, run_seed, CompareConfig};
use fourier_sampler::config::{parse_kv, BackendKind, ConfigError, RunConfig, Settings};
use fourier_sampler::decoder::{
    decode, decode_and_record, Backend, BackendError, DecodeError, ReplayBackend, SinusoidBackend,
    TemplateBackend,
};
use fourier_sampler::sampler::{Logits, SamplerConfig, SamplerKind};
use fourier_sampler::spectral::HiddenBlock;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DumpError> for CliError {
    fn from(e: DumpError) -> Self {
        match e {
            DumpError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(format!("invalid dump: {e}")),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DecodeError> for CliError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::Invariant(_) => CliError::Invariant(e.to_string()),
            DecodeError::Dump(d) => d.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

#[derive(Debug, Parser)]
#[command(
    name = "fsampler",
    version,
    about = "Frequency-band unmasking scheduler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode one sequence and write tokens, trace and an optional dump.
    Decode(Box<DecodeArgs>),
    /// Per-token low-frequency ratios of one recorded step.
    Analyze(AnalyzeArgs),
    /// Run every sampler over seeded templates and tabulate the results.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sinusoid, template or replay [default: template]
    #[arg(long)]
    backend: Option<String>,
    /// fourier, confidence, random or l2r [default: fourier]
    #[arg(long)]
    sampler: Option<String>,
    /// Window width as a fraction of the bins [default: 0.2]
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    /// Added to the per-step energy maximum [default: 1e-5]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Variance history length [default: 20]
    #[arg(long)]
    history_len: Option<usize>,
    /// Percentile-to-z scale of the calibrator [default: 3]
    #[arg(long)]
    z_scale: Option<f64>,
    /// [default: 64]
    #[arg(long)]
    block_size: Option<usize>,
    /// Steps per block [default: 64]
    #[arg(long)]
    steps: Option<usize>,
    /// [default: 64]
    #[arg(long)]
    gen_len: Option<usize>,
    /// Seeds the template and random selection [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Prompt token ids, comma or space separated.
    #[arg(long)]
    prompt: Option<String>,
    /// Trace output; format from --trace-format or the extension, else csv.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// csv, json or svg
    #[arg(long)]
    trace_format: Option<String>,
    /// Record every forward pass to this dump file.
    #[arg(long)]
    record_dump: Option<PathBuf>,
    /// Token output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dump read by the replay backend.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Sinusoid channels: `freq:amp[:phase]` terms, `,` between terms, `;` between channels.
    #[arg(long)]
    components: Option<String>,
    /// Sinusoid vocabulary size [default: 8]
    #[arg(long)]
    vocab: Option<usize>,
    /// Template fillers per DETAIL slot [default: 4]
    #[arg(long)]
    fillers: Option<usize>,
    /// Template hidden size [default: 32]
    #[arg(long)]
    dim: Option<usize>,
    /// Template bump width in positions [default: 1]
    #[arg(long)]
    bump_width: Option<f64>,
    /// Write the template's `position<TAB>STRUCT|DETAIL` labels here.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

impl DecodeArgs {
    fn settings(&self) -> Settings {
        let mut s = Settings::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                s.insert(k.to_string(), v);
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        put("backend", self.backend.clone());
        put("sampler", self.sampler.clone());
        put("rho", self.rho.map(|v| v.to_string()));
        put("beta-min", self.beta_min.map(|v| v.to_string()));
        put("beta-max", self.beta_max.map(|v| v.to_string()));
        put("epsilon", self.epsilon.map(|v| v.to_string()));
        put("history-len", self.history_len.map(|v| v.to_string()));
        put("z-scale", self.z_scale.map(|v| v.to_string()));
        put("block-size", self.block_size.map(|v| v.to_string()));
        put("steps", self.steps.map(|v| v.to_string()));
        put("gen-len", self.gen_len.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("prompt", self.prompt.clone());
        put("trace", path(&self.trace));
        put("trace-format", self.trace_format.clone());
        put("record-dump", path(&self.record_dump));
        put("out", path(&self.out));
        put("dump", path(&self.dump));
        put("components", self.components.clone());
        put("vocab", self.vocab.map(|v| v.to_string()));
        put("fillers", self.fillers.map(|v| v.to_string()));
        put("dim", self.dim.map(|v| v.to_string()));
        put("bump-width", self.bump_width.map(|v| v.to_string()));
        s
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Dump file to analyze.
    dump: PathBuf,
    /// Recorded step to profile.
    #[arg(long, default_value_t = 0)]
    step: usize,
    /// Rows in each top-k ranking.
    #[arg(long, default_value_t = 14)]
    top_k: usize,
    /// `position<TAB>label` file; adds per-label group shares.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Report output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Templates per block size (at least 2).
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// Comma-separated block sizes, each dividing --gen-len.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    block_sizes: Vec<usize>,
    #[arg(long, default_value_t = 128)]
    gen_len: usize,
    /// Steps per block; defaults to the block size.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    #[arg(long, default_value_t = 0.4)]
    beta_min: f64,
    #[arg(long, default_value_t = 0.6)]
    beta_max: f64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Emit JSON instead of a text table.
    #[arg(long)]
    json: bool,
    /// Report output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Decode(a) => cmd_decode(&a, stdout, stderr),
        Command::Analyze(a) => cmd_analyze(&a, stdout),
        Command::Compare(a) => cmd_compare(&a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, bytes),
        None => stdout
            .write_all(bytes)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn load_dump(path: &Path) -> Result<DumpFile, CliError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(read_dump(std::io::BufReader::new(file))?)
}

fn cmd_decode(
    a: &DecodeArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let file = match &a.config {
        Some(p) => parse_kv(&read_text(p)?)?,
        None => Settings::new(),
    };
    let cfg = RunConfig::resolve(&file, &a.settings())?;
    let plan = cfg.plan();

    let mut labels = None;
    let backend: Box<dyn Backend> = match cfg.backend {
        BackendKind::Sinusoid => {
            let channels = SinusoidBackend::parse_channels(&cfg.components)?;
            Box::new(SinusoidBackend::new(
                cfg.block_size,
                channels,
                SinusoidBackend::flat_logits(cfg.block_size, cfg.vocab),
            )?)
        }
        BackendKind::Template => {
            let b = TemplateBackend::generate(cfg.gen_len, cfg.template.clone(), cfg.sampler.seed)?;
            labels = Some(b.template().labels_text());
            Box::new(b)
        }
        BackendKind::Replay => {
            let path = cfg.dump.as_ref().expect("validated in resolve");
            Box::new(ReplayBackend::new(load_dump(path)?)?)
        }
    };
    if a.labels_out.is_some() && labels.is_none() {
        return Err(CliError::Validation(
            "invalid `labels-out`: only the template backend has slot labels".into(),
        ));
    }

    let outcome = match &cfg.record_dump {
        Some(path) => {
            let (outcome, dump) =
                decode_and_record(backend.as_ref(), &cfg.prompt, &cfg.sampler, &plan)?;
            let mut bytes = Vec::new();
            write_dump(&mut bytes, &dump)?;
            write_file(path, &bytes)?;
            outcome
        }
        None => decode(backend.as_ref(), &cfg.prompt, &cfg.sampler, &plan)?,
    };

    if let Some(step) = outcome.divergent_from_step {
        let _ = writeln!(stderr, "warning: divergent replay from step {step}");
    }
    if let Some(path) = &cfg.trace {
        let format = cfg
            .trace_format
            .or_else(|| TraceFormat::from_path(path))
            .unwrap_or(TraceFormat::Csv);
        write_file(path, &export_trace(&outcome.trace, format)?)?;
    }
    if let (Some(path), Some(text)) = (&a.labels_out, &labels) {
        write_file(path, text.as_bytes())?;
    }
    let mut line = outcome
        .tokens
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(" ");
    line.push('\n');
    emit(&cfg.out, stdout, line.as_bytes())
}

fn profile_row(p: &TokenSpectralProfile) -> String {
    let token = p.token.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
    let group = match p.group {
        FreqGroup::Low => "low",
        FreqGroup::High => "high",
    };
    format!(
        "{:>8} {:>6} {:>10.6} {:>10.6} {:>5}{}\n",
        p.position,
        token,
        p.r_low,
        p.r_high(),
        group,
        if p.zero_energy { " zero-energy" } else { "" }
    )
}

fn cmd_analyze(a: &AnalyzeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let dump = load_dump(&a.dump)?;
    let step = dump.steps.get(a.step).ok_or_else(|| {
        CliError::Validation(format!(
            "invalid `step`: {} but the dump holds {} steps",
            a.step,
            dump.steps.len()
        ))
    })?;
    let (b, d, v) = (
        dump.header.block_len as usize,
        dump.header.dim as usize,
        dump.header.vocab as usize,
    );
    let h = HiddenBlock::new(b, d, step.hidden.iter().map(|x| f64::from(*x)).collect())
        .map_err(|e| CliError::Validation(format!("invalid dump: {e}")))?;
    let tokens = match &step.logits {
        Some(l) => {
            let logits = Logits::new(b, v, l.iter().map(|x| f64::from(*x)).collect())
                .map_err(|e| CliError::Validation(format!("invalid dump: {e}")))?;
            Some((0..b).map(|t| logits.argmax(t)).collect::<Vec<_>>())
        }
        None => None,
    };
    let labels = match &a.labels {
        Some(p) => Some(parse_labels(&read_text(p)?)?),
        None => None,
    };
    let profiles = spectral_profiles(&h, tokens.as_deref())
        .map_err(|e| CliError::Validation(format!("invalid dump: {e}")))?;
    let stats = match &labels {
        Some(l) => Some(group_stats(&profiles, l)?),
        None => None,
    };

    let header = format!(
        "{:>8} {:>6} {:>10} {:>10} {:>5}\n",
        "position", "argmax", "r_low", "r_high", "group"
    );
    let mut report = format!(
        "# step {} of {} (block {b}, dim {d})\n\n## tokens\n{header}",
        a.step,
        dump.steps.len()
    );
    for p in &profiles {
        report.push_str(&profile_row(p));
    }
    for (title, which) in [("low", FreqGroup::Low), ("high", FreqGroup::High)] {
        report.push_str(&format!("\n## top {} {title}\n{header}", a.top_k));
        for p in top_k_profiles(&profiles, a.top_k, which) {
            report.push_str(&profile_row(&p));
        }
    }
    if let Some(stats) = stats {
        report.push_str(&format!(
            "\n## groups\n{:<16} {:>6} {:>8} {:>8}\n",
            "label", "count", "low", "high"
        ));
        for s in stats {
            report.push_str(&format!(
                "{:<16} {:>6} {:>8.4} {:>8.4}\n",
                s.label, s.count, s.low_fraction, s.high_fraction
            ));
        }
    }
    emit(&a.out, stdout, report.as_bytes())
}

fn cmd_compare(a: &CompareArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = CompareConfig {
        seeds: a.seeds,
        block_sizes: a.block_sizes.clone(),
        gen_len: a.gen_len,
        steps: a.steps,
        sampler: SamplerConfig {
            rho: a.rho,
            beta_min: a.beta_min,
            beta_max: a.beta_max,
            epsilon: a.epsilon,
            kind: SamplerKind::Fourier,
            ..SamplerConfig::default()
        },
        ..CompareConfig::default()
    };
    cfg.validate().map_err(CliError::Validation)?;
    let results = cfg
        .jobs()
        .into_par_iter()
        .map(|(b, s)| run_seed(&cfg, b, s))
        .collect::<Result<Vec<_>, _>>()?;
    let report = aggregate(&results);
    let expected = cfg
        .block_sizes
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .len()
        * SamplerKind::ALL.len();
    if report.rows.len() != expected {
        return Err(CliError::Invariant(format!(
            "result grid has {} rows, expected {expected}",
            report.rows.len()
        )));
    }
    let text = if a.json {
        let mut j = report.to_json();
        j.push('\n');
        j
    } else {
        report.to_table()
    };
    emit(&a.out, stdout, text.as_bytes())
}
