//! Sampler comparison over seeded template corpora.
//!
//! Every (block size, seed) pair decodes one template with each sampler kind.
//! Results are aggregated per (block size, sampler) and per sampler pair.
//! [`run_seed`] is independent per seed, so callers may fan seeds out across
//! threads and hand the results to [`aggregate`] in any order.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::decoder::{decode, DecodeError, DecodePlan, SlotKind, TemplateBackend, TemplateParams};
use crate::sampler::{SamplerConfig, SamplerKind};

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub seeds: usize,
    pub block_sizes: Vec<usize>,
    pub gen_len: usize,
    /// Steps per block; `None` means one commit per step.
    pub steps: Option<usize>,
    pub sampler: SamplerConfig,
    pub template: TemplateParams,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            seeds: 20,
            block_sizes: vec![64],
            gen_len: 128,
            steps: None,
            sampler: SamplerConfig::default(),
            template: TemplateParams::default(),
        }
    }
}

impl CompareConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.seeds < 2 {
            return Err(format!("seeds must be at least 2, got {}", self.seeds));
        }
        if self.block_sizes.is_empty() {
            return Err("no block sizes given".into());
        }
        for b in &self.block_sizes {
            if *b == 0 || !self.gen_len.is_multiple_of(*b) {
                return Err(format!(
                    "block size {b} must divide gen-len {}",
                    self.gen_len
                ));
            }
            let steps = self.steps_for(*b);
            if steps == 0 || steps > *b {
                return Err(format!("steps {steps} invalid for block size {b}"));
            }
        }
        self.sampler.validate().map_err(|e| e.to_string())?;
        self.template.validate().map_err(|e| e.to_string())
    }

    pub fn steps_for(&self, block_size: usize) -> usize {
        self.steps.unwrap_or(block_size)
    }

    /// All (block size, seed) jobs in canonical order.
    pub fn jobs(&self) -> Vec<(usize, u64)> {
        self.block_sizes
            .iter()
            .flat_map(|b| (0..self.seeds as u64).map(move |s| (*b, s)))
            .collect()
    }
}

/// One sampler's decode of one template.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerRun {
    pub kind: SamplerKind,
    pub valid: bool,
    pub mean_struct_step: f64,
    pub mean_detail_step: f64,
    /// Step-in-block at which each position was committed.
    pub commit_steps: Vec<usize>,
}

impl SamplerRun {
    pub fn gap(&self) -> f64 {
        self.mean_detail_step - self.mean_struct_step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub block_size: usize,
    pub seed: u64,
    pub runs: Vec<SamplerRun>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Decodes one seeded template with every sampler kind.
pub fn run_seed(
    cfg: &CompareConfig,
    block_size: usize,
    seed: u64,
) -> Result<SeedResult, DecodeError> {
    let backend = TemplateBackend::generate(cfg.gen_len, cfg.template.clone(), seed)?;
    let steps = cfg.steps_for(block_size);
    let plan = DecodePlan::new(cfg.gen_len, block_size, steps)?;
    let kinds = backend.template().kinds();
    let mut runs = Vec::with_capacity(SamplerKind::ALL.len());
    for kind in SamplerKind::ALL {
        let sampler = SamplerConfig {
            kind,
            seed,
            ..cfg.sampler.clone()
        };
        let out = decode(&backend, &[], &sampler, &plan)?;
        let commit_steps: Vec<usize> = out
            .commit_steps()
            .into_iter()
            .map(|s| {
                s.map(|s| s % steps)
                    .ok_or_else(|| DecodeError::Invariant("uncommitted position".into()))
            })
            .collect::<Result<_, _>>()?;
        let avg = |k: SlotKind| {
            mean(
                commit_steps
                    .iter()
                    .zip(&kinds)
                    .filter(|(_, kk)| **kk == k)
                    .map(|(s, _)| *s as f64),
            )
        };
        runs.push(SamplerRun {
            kind,
            valid: backend.template().is_valid(&out.tokens),
            mean_struct_step: avg(SlotKind::Struct),
            mean_detail_step: avg(SlotKind::Detail),
            commit_steps,
        });
    }
    Ok(SeedResult {
        block_size,
        seed,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerRow {
    pub block_size: usize,
    pub sampler: SamplerKind,
    pub runs: usize,
    pub validity_rate: f64,
    pub mean_struct_step: f64,
    pub mean_detail_step: f64,
    /// Fraction of seeds whose STRUCT mean step is below the DETAIL mean.
    pub struct_first_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDelta {
    pub block_size: usize,
    pub a: SamplerKind,
    pub b: SamplerKind,
    /// Mean over seeds of `gap(a) − gap(b)`, gap = DETAIL mean − STRUCT mean.
    pub gap_delta: f64,
    /// Mean fraction of position pairs committed in the same relative order
    /// (ties count as agreement only when tied in both).
    pub concordance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub rows: Vec<SamplerRow>,
    pub deltas: Vec<PairDelta>,
}

fn concordance(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            if a[i].cmp(&a[j]) == b[i].cmp(&b[j]) {
                agree += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        agree as f64 / total as f64
    }
}

/// Aggregates per-seed results; output order is independent of input order.
pub fn aggregate(results: &[SeedResult]) -> CompareReport {
    let mut by_block: BTreeMap<usize, Vec<&SeedResult>> = BTreeMap::new();
    for r in results {
        by_block.entry(r.block_size).or_default().push(r);
    }
    let mut rows = Vec::new();
    let mut deltas = Vec::new();
    for (block_size, mut seeds) in by_block {
        seeds.sort_by_key(|r| r.seed);
        let run_of = |r: &SeedResult, k: SamplerKind| r.runs.iter().find(|x| x.kind == k).cloned();
        for kind in SamplerKind::ALL {
            let runs: Vec<SamplerRun> = seeds.iter().filter_map(|r| run_of(r, kind)).collect();
            let n = runs.len();
            if n == 0 {
                continue;
            }
            rows.push(SamplerRow {
                block_size,
                sampler: kind,
                runs: n,
                validity_rate: runs.iter().filter(|r| r.valid).count() as f64 / n as f64,
                mean_struct_step: mean(runs.iter().map(|r| r.mean_struct_step)),
                mean_detail_step: mean(runs.iter().map(|r| r.mean_detail_step)),
                struct_first_rate: runs
                    .iter()
                    .filter(|r| r.mean_struct_step < r.mean_detail_step)
                    .count() as f64
                    / n as f64,
            });
        }
        for (i, a) in SamplerKind::ALL.iter().enumerate() {
            for b in &SamplerKind::ALL[i + 1..] {
                let pairs: Vec<(SamplerRun, SamplerRun)> = seeds
                    .iter()
                    .filter_map(|r| Some((run_of(r, *a)?, run_of(r, *b)?)))
                    .collect();
                if pairs.is_empty() {
                    continue;
                }
                deltas.push(PairDelta {
                    block_size,
                    a: *a,
                    b: *b,
                    gap_delta: mean(pairs.iter().map(|(x, y)| x.gap() - y.gap())),
                    concordance: mean(
                        pairs
                            .iter()
                            .map(|(x, y)| concordance(&x.commit_steps, &y.commit_steps)),
                    ),
                });
            }
        }
    }
    CompareReport { rows, deltas }
}

/// Sequential driver over every job.
pub fn run_compare(cfg: &CompareConfig) -> Result<CompareReport, DecodeError> {
    cfg.validate().map_err(DecodeError::InvalidSchedule)?;
    let results = cfg
        .jobs()
        .into_iter()
        .map(|(b, s)| run_seed(cfg, b, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(&results))
}

impl CompareReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:>6} {:<11} {:>5} {:>9} {:>12} {:>12} {:>12}\n",
            "block", "sampler", "runs", "validity", "struct_step", "detail_step", "struct_first"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:>6} {:<11} {:>5} {:>9.3} {:>12.3} {:>12.3} {:>12.3}\n",
                r.block_size,
                r.sampler.name(),
                r.runs,
                r.validity_rate,
                r.mean_struct_step,
                r.mean_detail_step,
                r.struct_first_rate
            ));
        }
        s.push('\n');
        s.push_str(&format!(
            "{:>6} {:<11} {:<11} {:>10} {:>12}\n",
            "block", "a", "b", "gap_delta", "concordance"
        ));
        for d in &self.deltas {
            s.push_str(&format!(
                "{:>6} {:<11} {:<11} {:>10.3} {:>12.3}\n",
                d.block_size,
                d.a.name(),
                d.b.name(),
                d.gap_delta,
                d.concordance
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CompareConfig {
        CompareConfig {
            seeds: 3,
            block_sizes: vec![16, 32],
            gen_len: 32,
            ..CompareConfig::default()
        }
    }

    #[test]
    fn grid_shape() {
        let report = run_compare(&small()).unwrap();
        assert_eq!(report.rows.len(), 2 * 4);
        assert_eq!(report.deltas.len(), 2 * 6);
        assert!(report.rows.iter().all(|r| r.validity_rate == 1.0));
        let table = report.to_table();
        assert!(table.contains("fourier"));
    }

    #[test]
    fn aggregation_ignores_input_order() {
        let cfg = small();
        let mut results: Vec<SeedResult> = cfg
            .jobs()
            .into_iter()
            .map(|(b, s)| run_seed(&cfg, b, s).unwrap())
            .collect();
        let forward = aggregate(&results);
        results.reverse();
        assert_eq!(aggregate(&results), forward);
    }

    #[test]
    fn rejects_too_few_seeds() {
        let cfg = CompareConfig {
            seeds: 1,
            ..small()
        };
        assert!(cfg.validate().is_err());
        let cfg = CompareConfig {
            block_sizes: vec![24],
            ..small()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn concordance_bounds() {
        assert_eq!(concordance(&[0, 1, 2], &[0, 1, 2]), 1.0);
        assert_eq!(concordance(&[0, 1, 2], &[2, 1, 0]), 0.0);
    }
}
