//! Low-frequency ratios, low/high grouping, and per-category aggregation.
//!
//! A token's low-frequency ratio is the energy of its row after keeping the
//! lowest half of the bins, divided by the energy of the unfiltered row.
//! Filtering mixes positions, so the raw ratio can exceed 1 at individual
//! tokens; reports use the value clamped to `[0, 1]` and keep the raw one.

use std::collections::BTreeMap;

use serde::Serialize;

use super::AnalysisError;
use crate::spectral::{filter_block, low_half_mask, token_energy, HiddenBlock, SpectralError};

/// Raw ratios plus the rows whose total energy was zero (ratio reported as 0).
#[derive(Debug, Clone, PartialEq)]
pub struct LowFreqRatios {
    pub raw: Vec<f64>,
    pub zero_energy: Vec<bool>,
}

impl LowFreqRatios {
    pub fn clamped(&self) -> Vec<f64> {
        self.raw.iter().map(|r| r.clamp(0.0, 1.0)).collect()
    }

    pub fn any_zero_energy(&self) -> bool {
        self.zero_energy.iter().any(|z| *z)
    }
}

pub fn low_freq_ratio(h: &HiddenBlock) -> Result<LowFreqRatios, SpectralError> {
    let low = filter_block(h, &low_half_mask(h.num_bins())?)?;
    let kept = token_energy(&low);
    let total = token_energy(h);
    let zero_energy: Vec<bool> = total.iter().map(|e| *e == 0.0).collect();
    let raw = kept
        .iter()
        .zip(&total)
        .map(|(k, t)| if *t == 0.0 { 0.0 } else { k / t })
        .collect();
    Ok(LowFreqRatios { raw, zero_energy })
}

/// Block-level ratio `‖H_low‖² / ‖H‖²` (0 for an all-zero block).
pub fn block_low_freq_ratio(h: &HiddenBlock) -> Result<f64, SpectralError> {
    let low = filter_block(h, &low_half_mask(h.num_bins())?)?;
    let kept: f64 = token_energy(&low).iter().sum();
    let total: f64 = token_energy(h).iter().sum();
    Ok(if total == 0.0 { 0.0 } else { kept / total })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqGroup {
    Low,
    High,
}

impl FreqGroup {
    /// `Low` iff the clamped ratio is strictly above one half.
    pub fn classify(r_low: f64) -> Self {
        if r_low > 0.5 {
            FreqGroup::Low
        } else {
            FreqGroup::High
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenSpectralProfile {
    pub position: usize,
    pub token: Option<u32>,
    /// Clamped to `[0, 1]`.
    pub r_low: f64,
    pub r_low_raw: f64,
    pub zero_energy: bool,
    pub group: FreqGroup,
}

impl TokenSpectralProfile {
    pub fn r_high(&self) -> f64 {
        1.0 - self.r_low
    }
}

/// Profiles every row of `h`; `tokens`, when given, labels each position.
pub fn spectral_profiles(
    h: &HiddenBlock,
    tokens: Option<&[u32]>,
) -> Result<Vec<TokenSpectralProfile>, SpectralError> {
    let ratios = low_freq_ratio(h)?;
    Ok(ratios
        .raw
        .iter()
        .zip(&ratios.zero_energy)
        .enumerate()
        .map(|(t, (raw, zero))| {
            let r_low = raw.clamp(0.0, 1.0);
            TokenSpectralProfile {
                position: t,
                token: tokens.and_then(|tk| tk.get(t).copied()),
                r_low,
                r_low_raw: *raw,
                zero_energy: *zero,
                group: FreqGroup::classify(r_low),
            }
        })
        .collect())
}

/// The `k` profiles with the highest low (or high) ratio, earlier positions
/// first among equals. Returns everything when `k` exceeds the list.
pub fn top_k_profiles(
    profiles: &[TokenSpectralProfile],
    k: usize,
    which: FreqGroup,
) -> Vec<TokenSpectralProfile> {
    let key = |p: &TokenSpectralProfile| match which {
        FreqGroup::Low => p.r_low,
        FreqGroup::High => p.r_high(),
    };
    let mut sorted = profiles.to_vec();
    sorted.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.position.cmp(&b.position)));
    sorted.truncate(k);
    sorted
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryStats {
    pub label: String,
    pub count: usize,
    pub low_fraction: f64,
    pub high_fraction: f64,
}

/// Share of each category's tokens in the low and high groups, sorted by label.
pub fn group_stats(
    profiles: &[TokenSpectralProfile],
    labels: &BTreeMap<usize, String>,
) -> Result<Vec<CategoryStats>, AnalysisError> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for p in profiles {
        let label = labels
            .get(&p.position)
            .ok_or(AnalysisError::MissingLabel(p.position))?;
        let entry = tally.entry(label.as_str()).or_default();
        entry.0 += 1;
        if p.group == FreqGroup::Low {
            entry.1 += 1;
        }
    }
    Ok(tally
        .into_iter()
        .map(|(label, (count, low))| {
            let low_fraction = low as f64 / count as f64;
            CategoryStats {
                label: label.to_string(),
                count,
                low_fraction,
                high_fraction: (count - low) as f64 / count as f64,
            }
        })
        .collect())
}

/// Parses `position<TAB>label` lines. Blank lines are skipped.
pub fn parse_labels(text: &str) -> Result<BTreeMap<usize, String>, AnalysisError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| AnalysisError::Parse {
            line: i + 1,
            reason,
        };
        let (pos, label) = line
            .split_once('\t')
            .ok_or_else(|| err("expected `position<TAB>label`".into()))?;
        let pos: usize = pos
            .trim()
            .parse()
            .map_err(|_| err(format!("bad position `{pos}`")))?;
        let label = label.trim();
        if label.is_empty() {
            return Err(err("empty label".into()));
        }
        if out.insert(pos, label.to_string()).is_some() {
            return Err(err(format!("duplicate position {pos}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{naive_energy, naive_filter, random_block};

    fn profile(position: usize, r_low: f64) -> TokenSpectralProfile {
        TokenSpectralProfile {
            position,
            token: None,
            r_low,
            r_low_raw: r_low,
            zero_energy: false,
            group: FreqGroup::classify(r_low),
        }
    }

    #[test]
    fn constant_block_is_all_low() {
        let h = HiddenBlock::new(8, 2, vec![1.5; 16]).unwrap();
        let r = low_freq_ratio(&h).unwrap();
        assert!(r.clamped().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn alternating_block_is_all_high() {
        let h = HiddenBlock::new(4, 1, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let r = low_freq_ratio(&h).unwrap();
        assert!(r.clamped().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn matches_naive_oracle() {
        let h = random_block(16, 4, 77);
        let w = h.num_bins();
        let keep: Vec<bool> = (0..w).map(|k| k < w / 2).collect();
        let low = naive_energy(&naive_filter(&h, &keep));
        let total = naive_energy(&h);
        let r = low_freq_ratio(&h).unwrap();
        for t in 0..16 {
            assert!((r.raw[t] - low[t] / total[t]).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_rows_are_flagged() {
        let h = HiddenBlock::new(4, 1, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let r = low_freq_ratio(&h).unwrap();
        assert_eq!(r.zero_energy, vec![false, true, false, false]);
        assert_eq!(r.raw[1], 0.0);
        assert!(r.any_zero_energy());
    }

    #[test]
    fn block_ratio_of_constant_is_one() {
        let h = HiddenBlock::new(6, 1, vec![2.0; 6]).unwrap();
        assert!((block_low_freq_ratio(&h).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn top_k_sorts_and_breaks_ties() {
        let ps: Vec<_> = (0..40)
            .map(|i| profile(i, ((i * 7) % 40) as f64 / 40.0))
            .collect();
        let top = top_k_profiles(&ps, 14, FreqGroup::Low);
        assert_eq!(top.len(), 14);
        assert!(top.windows(2).all(|w| w[0].r_low >= w[1].r_low));

        let tied = vec![profile(3, 0.9), profile(1, 0.9)];
        assert_eq!(top_k_profiles(&tied, 1, FreqGroup::Low)[0].position, 1);
        assert_eq!(top_k_profiles(&tied, 5, FreqGroup::High).len(), 2);
    }

    #[test]
    fn high_ranking_of_constant_block_is_all_zero() {
        let h = HiddenBlock::new(8, 1, vec![1.0; 8]).unwrap();
        let ps = spectral_profiles(&h, None).unwrap();
        let top = top_k_profiles(&ps, 8, FreqGroup::High);
        assert!(top.iter().all(|p| p.r_high().abs() < 1e-9));
    }

    #[test]
    fn group_stats_threshold() {
        let ps = vec![
            profile(0, 0.6),
            profile(1, 0.7),
            profile(2, 0.4),
            profile(3, 0.5),
        ];
        let labels: BTreeMap<usize, String> = [
            (0, "conj"),
            (1, "conj"),
            (2, "conj"),
            (3, "noun"),
            (9, "verb"),
        ]
        .into_iter()
        .map(|(p, l)| (p, l.to_string()))
        .collect();
        let stats = group_stats(&ps, &labels).unwrap();
        assert_eq!(stats.len(), 2, "unprofiled categories are dropped");
        assert_eq!(stats[0].label, "conj");
        assert!((stats[0].low_fraction - 2.0 / 3.0).abs() < 1e-12);
        assert!((stats[0].low_fraction + stats[0].high_fraction - 1.0).abs() < 1e-12);
        // exactly 0.5 is not "low"
        assert_eq!(stats[1].low_fraction, 0.0);
    }

    #[test]
    fn group_stats_missing_label() {
        let ps = vec![profile(0, 0.6), profile(5, 0.1)];
        let labels = parse_labels("0\tnoun\n").unwrap();
        assert!(matches!(
            group_stats(&ps, &labels),
            Err(AnalysisError::MissingLabel(5))
        ));
    }

    #[test]
    fn label_parsing() {
        let l = parse_labels("0\tnoun\n\n3\tverb phrase\n").unwrap();
        assert_eq!(l[&3], "verb phrase");
        assert!(parse_labels("0 noun\n").is_err());
        assert!(parse_labels("x\tnoun\n").is_err());
        assert!(parse_labels("1\ta\n1\tb\n").is_err());
    }
}
