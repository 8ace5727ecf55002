//! Scalar reward and the textual feedback blocks shown to the proposer.
//!
//! The rendered text is a stable wire format: pLDDT ranges render as
//! `a:b`, deviation ranges as `a-b`, and lists are joined with `", "`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::{contiguous_ranges, ReferenceContext, ResidueRange, Sequence};
use crate::structure::FidelityMetrics;

pub const LOW_REWARD_PHRASE: &str = "Low reward. Significant improvements necessary.";
pub const MODERATE_REWARD_PHRASE: &str = "Moderate reward. Improvements needed.";
pub const HIGH_REWARD_PHRASE: &str = "High reward. Minor refinements remain.";
pub const NON_REDUNDANT_SENTENCE: &str = "This generated sequence is sufficiently non-redundant.";
pub const REPETITIVE_SENTENCE: &str = "The generated sequence is too repetitive.";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightsError {
    #[error("weights must be finite and non-negative")]
    Negative,
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
}

/// Weights of the three objectives in the composite reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub plddt: f64,
    pub tm: f64,
    pub rmsd: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            plddt: 1.0 / 11.0,
            tm: 5.0 / 11.0,
            rmsd: 5.0 / 11.0,
        }
    }
}

impl RewardWeights {
    pub fn new(plddt: f64, tm: f64, rmsd: f64) -> Result<Self, WeightsError> {
        let w = Self { plddt, tm, rmsd };
        w.validate()?;
        Ok(w)
    }

    /// pLDDT-only objective.
    pub fn single_objective() -> Self {
        Self {
            plddt: 1.0,
            tm: 0.0,
            rmsd: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), WeightsError> {
        let all = [self.plddt, self.tm, self.rmsd];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(WeightsError::Negative);
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(WeightsError::NotNormalized(sum));
        }
        Ok(())
    }

    /// Linear interpolation `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        let t = t.clamp(0.0, 1.0);
        Self {
            plddt: self.plddt + (other.plddt - self.plddt) * t,
            tm: self.tm + (other.tm - self.tm) * t,
            rmsd: self.rmsd + (other.rmsd - self.rmsd) * t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub plddt_component: f64,
    pub tm_component: f64,
    pub rmsd_component: f64,
    pub penalty: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn from_components(
        plddt_component: f64,
        tm_component: f64,
        rmsd_component: f64,
        penalty: f64,
        weights: &RewardWeights,
    ) -> Self {
        let total = weights.plddt * plddt_component
            + weights.tm * tm_component
            + weights.rmsd * rmsd_component
            + penalty;
        Self {
            plddt_component,
            tm_component,
            rmsd_component,
            penalty,
            total,
        }
    }

    /// Total under different weights, keeping the penalty.
    pub fn reweighted(&self, weights: &RewardWeights) -> f64 {
        Self::from_components(
            self.plddt_component,
            self.tm_component,
            self.rmsd_component,
            self.penalty,
            weights,
        )
        .total
    }
}

/// Knobs of reward shaping and feedback rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackConfig {
    /// Cα-RMSD (Å) at which the RMSD component reaches zero and beyond
    /// which the penalty applies.
    pub penalty_threshold: f64,
    /// Magnitude of the negative correction for RMSD above the threshold.
    pub penalty: f64,
    /// Fixed pLDDT threshold; adaptive when absent.
    pub plddt_threshold: Option<f64>,
    pub deviation_window: usize,
    pub deviation_cutoff: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            penalty_threshold: 10.0,
            penalty: 0.25,
            plddt_threshold: None,
            deviation_window: 5,
            deviation_cutoff: 5.0,
        }
    }
}

/// Maps an RMSD onto `[0, 1]` plus a penalty for blown-up folds.
pub fn rmsd_to_score(rmsd: f64, penalty_threshold: f64, penalty: f64) -> (f64, f64) {
    let component = (1.0 - rmsd / penalty_threshold).max(0.0);
    let correction = if rmsd > penalty_threshold {
        -penalty
    } else {
        0.0
    };
    (component, correction)
}

pub fn composite_reward(
    metrics: &FidelityMetrics,
    weights: &RewardWeights,
    cfg: &FeedbackConfig,
) -> RewardBreakdown {
    let (rmsd_component, penalty) =
        rmsd_to_score(metrics.ca_rmsd, cfg.penalty_threshold, cfg.penalty);
    RewardBreakdown::from_components(
        metrics.mean_plddt_01,
        metrics.tm_score,
        rmsd_component,
        penalty,
        weights,
    )
}

pub fn quality_phrase(total: f64) -> &'static str {
    if total < 0.4 {
        LOW_REWARD_PHRASE
    } else if total < 0.7 {
        MODERATE_REWARD_PHRASE
    } else {
        HIGH_REWARD_PHRASE
    }
}

/// `111:111, 196:201`
pub fn render_colon_ranges(ranges: &[ResidueRange]) -> String {
    ranges
        .iter()
        .map(|r| format!("{}:{}", r.start, r.end))
        .collect::<Vec<_>>()
        .join(", ")
}

/// `1-29, 32-41`
pub fn render_dash_ranges(ranges: &[ResidueRange]) -> String {
    ranges
        .iter()
        .map(|r| format!("{}-{}", r.start, r.end))
        .collect::<Vec<_>>()
        .join(", ")
}

fn format_threshold(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("{t:.0}")
    } else {
        format!("{t:.1}")
    }
}

/// Linear-interpolated percentile (`q` in `[0, 1]`) of unsorted values.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Threshold below which residues are reported as low confidence:
/// the 25th percentile clamped to [35, 70], rounded to one decimal.
pub fn adaptive_plddt_threshold(per_residue_plddt: &[f64]) -> f64 {
    let t = percentile(per_residue_plddt, 0.25).clamp(35.0, 70.0);
    (t * 10.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlddtFeedback {
    pub text: String,
    pub threshold: f64,
    pub ranges: Vec<ResidueRange>,
}

pub fn plddt_feedback(per_residue_plddt: &[f64], fixed_threshold: Option<f64>) -> PlddtFeedback {
    let threshold = fixed_threshold.unwrap_or_else(|| adaptive_plddt_threshold(per_residue_plddt));
    let flags: Vec<bool> = per_residue_plddt.iter().map(|&p| p < threshold).collect();
    let ranges = contiguous_ranges(&flags);
    let t = format_threshold(threshold);
    let text = if ranges.is_empty() {
        format!("pLDDT feedback: No residues have low pLDDT (less than {t}); the predicted structure is confident throughout.")
    } else {
        format!(
            "pLDDT feedback: The following ranges of residues have low pLDDT (less than {t}), indicating low confidence in the predicted structure: {}.",
            render_colon_ranges(&ranges)
        )
    };
    PlddtFeedback {
        text,
        threshold,
        ranges,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationBin {
    /// 2 Å ≤ d ≤ 5 Å
    Moderate,
    /// 5 Å < d < 10 Å
    High,
    /// d ≥ 10 Å
    Severe,
}

impl DeviationBin {
    pub fn of(d: f64) -> Option<Self> {
        if d >= 10.0 {
            Some(DeviationBin::Severe)
        } else if d > 5.0 {
            Some(DeviationBin::High)
        } else if d >= 2.0 {
            Some(DeviationBin::Moderate)
        } else {
            None
        }
    }
}

/// Centered moving average, truncated at the chain ends.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationFeedback {
    pub text: String,
    /// Ranges whose smoothed deviation exceeds the cutoff; these are rendered.
    pub flagged: Vec<ResidueRange>,
    /// Every binned range of the smoothed profile, for analysis.
    pub binned: Vec<(ResidueRange, DeviationBin)>,
}

pub fn tm_sentence(tm: f64) -> &'static str {
    if tm < 0.5 {
        "The TM-score is low, indicating poor structural similarity. Please make substantial improvements."
    } else if tm < 0.8 {
        "The TM-score is moderate, indicating partial structural similarity. Please improve the deviating regions."
    } else {
        "The TM-score is high, indicating strong structural similarity. Minor refinements may still help."
    }
}

pub fn deviation_feedback(
    per_residue_deviation: &[f64],
    tm_score: f64,
    window: usize,
    cutoff: f64,
) -> DeviationFeedback {
    let smoothed = smooth(per_residue_deviation, window);
    let flags: Vec<bool> = smoothed.iter().map(|&d| d > cutoff).collect();
    let flagged = contiguous_ranges(&flags);

    let mut binned = Vec::new();
    for bin in [
        DeviationBin::Moderate,
        DeviationBin::High,
        DeviationBin::Severe,
    ] {
        let mask: Vec<bool> = smoothed
            .iter()
            .map(|&d| DeviationBin::of(d) == Some(bin))
            .collect();
        binned.extend(contiguous_ranges(&mask).into_iter().map(|r| (r, bin)));
    }
    binned.sort_by_key(|(r, _)| r.start);

    let cutoff_text = format!("{cutoff:.1}");
    let detail = if flagged.is_empty() {
        format!("No residue regions exceed a local average deviation of {cutoff_text} Å.")
    } else {
        format!(
            "The following residue regions have low structural similarity to the native structure (local average deviation >{cutoff_text} Å): {}. Focus on improving these regions.",
            render_dash_ranges(&flagged)
        )
    };
    DeviationFeedback {
        text: format!("TM-score feedback: {} {}", tm_sentence(tm_score), detail),
        flagged,
        binned,
    }
}

/// Fraction of length-6 windows that repeat an earlier window.
pub fn repeated_kmer_fraction(seq: &Sequence, k: usize) -> f64 {
    let bytes = seq.as_bytes();
    if bytes.len() < k {
        return 0.0;
    }
    let windows = bytes.len() - k + 1;
    let distinct: std::collections::HashSet<&[u8]> = bytes.windows(k).collect();
    (windows - distinct.len()) as f64 / windows as f64
}

pub fn redundancy_feedback(seq: &Sequence) -> (String, f64) {
    let fraction = repeated_kmer_fraction(seq, 6);
    let sentence = if fraction > 0.05 {
        REPETITIVE_SENTENCE
    } else {
        NON_REDUNDANT_SENTENCE
    };
    (format!("Redundancy feedback: {sentence}"), fraction)
}

pub fn length_feedback(seq: &Sequence, desired_length: usize) -> Option<String> {
    use std::cmp::Ordering;
    let relation = match seq.len().cmp(&desired_length) {
        Ordering::Equal => return None,
        Ordering::Greater => "longer",
        Ordering::Less => "shorter",
    };
    Some(format!(
        "Length feedback: The generated sequence is {relation} than the desired length of {desired_length}."
    ))
}

pub fn ligand_feedback(ctx: &ReferenceContext, seq: &Sequence) -> Option<String> {
    let sites = &ctx.ligand_site_residues;
    if sites.is_empty() {
        return None;
    }
    let listed = sites
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let mut text =
        format!("Ligand feedback: Residues {listed} bind the ligand and must be preserved.");
    if let Some(reference) = &ctx.reference_sequence {
        let changed: Vec<String> = sites
            .iter()
            .filter_map(|&p| {
                let want = reference.residue(p)?;
                let have = seq.residue(p)?;
                (want != have).then(|| {
                    format!(
                        "position {p} was changed from {} to {}",
                        want as char, have as char
                    )
                })
            })
            .collect();
        if changed.is_empty() {
            text.push_str(" All binding-site residues match the reference.");
        } else {
            text.push_str(&format!(
                " Restore the reference residue where {}.",
                changed.join(", ")
            ));
        }
    }
    Some(text)
}

/// Reward plus every feedback block rendered for one evaluated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub reward: RewardBreakdown,
    pub quality_phrase: String,
    pub plddt_block: String,
    pub tm_block: String,
    pub redundancy_block: String,
    pub length_block: Option<String>,
    pub ligand_block: Option<String>,
    pub plddt_threshold: f64,
    pub repeated_fraction: f64,
    pub deviation_ranges: Vec<(ResidueRange, DeviationBin)>,
    pub high_deviation_ranges: Vec<ResidueRange>,
    pub low_plddt_ranges: Vec<ResidueRange>,
    /// Opaque reference to an image or other attachment for multimodal proposers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attachment: Option<String>,
}

impl FeedbackBundle {
    /// The `#Feedback` section body.
    pub fn render(&self) -> String {
        let mut parts: Vec<&str> = vec![&self.tm_block, &self.plddt_block, &self.redundancy_block];
        parts.extend(self.length_block.as_deref());
        parts.extend(self.ligand_block.as_deref());
        parts.push(&self.quality_phrase);
        parts.join(" ")
    }

    /// 1-based positions covered by low-pLDDT or high-deviation ranges.
    pub fn flagged_positions(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .low_plddt_ranges
            .iter()
            .chain(&self.high_deviation_ranges)
            .flat_map(|r| r.start..=r.end)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub fn build_feedback(
    ctx: &ReferenceContext,
    seq: &Sequence,
    metrics: &FidelityMetrics,
    weights: &RewardWeights,
    cfg: &FeedbackConfig,
) -> FeedbackBundle {
    let reward = composite_reward(metrics, weights, cfg);
    let plddt = plddt_feedback(&metrics.per_residue_plddt, cfg.plddt_threshold);
    let deviation = deviation_feedback(
        &metrics.per_residue_deviation,
        metrics.tm_score,
        cfg.deviation_window,
        cfg.deviation_cutoff,
    );
    let (redundancy_block, repeated_fraction) = redundancy_feedback(seq);
    FeedbackBundle {
        reward,
        quality_phrase: quality_phrase(reward.total).to_string(),
        plddt_block: plddt.text,
        tm_block: deviation.text,
        redundancy_block,
        length_block: length_feedback(seq, ctx.desired_length),
        ligand_block: ligand_feedback(ctx, seq),
        plddt_threshold: plddt.threshold,
        repeated_fraction,
        deviation_ranges: deviation.binned,
        high_deviation_ranges: deviation.flagged,
        low_plddt_ranges: plddt.ranges,
        attachment: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::generate_reference_trace;
    use proptest::prelude::*;

    fn metrics(p: f64, tm: f64, rmsd: f64) -> FidelityMetrics {
        FidelityMetrics {
            mean_plddt_01: p,
            tm_score: tm,
            ca_rmsd: rmsd,
            per_residue_deviation: vec![0.0; 4],
            per_residue_plddt: vec![p * 100.0; 4],
        }
    }

    fn seq(s: &str) -> Sequence {
        Sequence::new(s).unwrap()
    }

    #[test]
    fn rmsd_score_rule() {
        assert_eq!(rmsd_to_score(0.0, 10.0, 0.25), (1.0, 0.0));
        assert_eq!(rmsd_to_score(10.0, 10.0, 0.25), (0.0, 0.0));
        assert_eq!(rmsd_to_score(12.0, 10.0, 0.25), (0.0, -0.25));
    }

    #[test]
    fn composite_examples() {
        let cfg = FeedbackConfig::default();
        let w = RewardWeights::default();
        assert!(w.validate().is_ok());
        let r = composite_reward(&metrics(1.0, 1.0, 0.0), &w, &cfg);
        assert!((r.total - 1.0).abs() < 1e-12);
        // rmsd 3 Å -> component 0.7
        let r = composite_reward(&metrics(0.66, 0.55, 3.0), &w, &cfg);
        assert!((r.total - 6.91 / 11.0).abs() < 1e-9);
        assert!((r.total - 0.6282).abs() < 5e-5);
        let r = composite_reward(&metrics(0.8, 0.8, 2.0), &w, &cfg);
        assert!((r.total - 0.8).abs() < 1e-12);
        let single = RewardWeights::single_objective();
        let r = composite_reward(&metrics(0.42, 0.1, 9.0), &single, &cfg);
        assert!((r.total - 0.42).abs() < 1e-12);
    }

    #[test]
    fn weights_validation() {
        assert!(RewardWeights::new(0.5, 0.5, 0.1).is_err());
        assert!(RewardWeights::new(-0.5, 1.0, 0.5).is_err());
        assert!(RewardWeights::new(0.2, 0.7, 0.1).is_ok());
    }

    #[test]
    fn quality_bands() {
        assert_eq!(quality_phrase(0.30), LOW_REWARD_PHRASE);
        assert_eq!(quality_phrase(0.55), MODERATE_REWARD_PHRASE);
        assert_eq!(quality_phrase(0.90), HIGH_REWARD_PHRASE);
        assert_eq!(quality_phrase(0.4), MODERATE_REWARD_PHRASE);
        assert_eq!(quality_phrase(0.7), HIGH_REWARD_PHRASE);
    }

    #[test]
    fn plddt_blocks() {
        let fb = plddt_feedback(&[90.0; 6], None);
        assert_eq!(fb.threshold, 70.0);
        assert!(fb.ranges.is_empty());
        assert!(fb.text.contains("No residues have low pLDDT"));

        let fb = plddt_feedback(&[90.0; 6], Some(35.0));
        assert_eq!(fb.threshold, 35.0);

        let fb = plddt_feedback(&[90.0, 30.0, 30.0, 90.0, 20.0], Some(35.0));
        assert_eq!(render_colon_ranges(&fb.ranges), "2:3, 5:5");
        assert_eq!(
            fb.text,
            "pLDDT feedback: The following ranges of residues have low pLDDT (less than 35), indicating low confidence in the predicted structure: 2:3, 5:5."
        );
    }

    #[test]
    fn adaptive_threshold_clamps() {
        assert_eq!(adaptive_plddt_threshold(&[10.0, 20.0, 30.0]), 35.0);
        assert_eq!(adaptive_plddt_threshold(&[99.0; 3]), 70.0);
        // P25 of 40,50,60,70,80 = 50
        assert_eq!(
            adaptive_plddt_threshold(&[80.0, 40.0, 60.0, 50.0, 70.0]),
            50.0
        );
    }

    #[test]
    fn deviation_smoothing_matches_direct_oracle() {
        let mut dev = vec![1.0; 40];
        for d in &mut dev[9..20] {
            *d = 8.0;
        }
        // Direct computation: each 1-based position's centered 5-window mean.
        let mut expected_flags = vec![false; 40];
        for i in 0..40usize {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(40);
            let mean: f64 = dev[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            expected_flags[i] = mean > 5.0;
        }
        let expected = contiguous_ranges(&expected_flags);
        let fb = deviation_feedback(&dev, 0.3, 5, 5.0);
        assert_eq!(fb.flagged, expected);
        assert_eq!(render_dash_ranges(&fb.flagged), "10-20");
        assert!(fb
            .text
            .starts_with("TM-score feedback: The TM-score is low"));

        let none = deviation_feedback(&[0.0; 10], 1.0, 5, 5.0);
        assert!(none.flagged.is_empty() && none.binned.is_empty());
    }

    #[test]
    fn dash_rendering() {
        let r = [
            ResidueRange::new(1, 29),
            ResidueRange::new(32, 41),
            ResidueRange::new(44, 44),
        ];
        assert_eq!(render_dash_ranges(&r), "1-29, 32-41, 44-44");
        assert_eq!(render_colon_ranges(&r[2..]), "44:44");
    }

    #[test]
    fn redundancy() {
        let (text, f) = redundancy_feedback(&seq("AAAAAAAAAA"));
        assert!((f - 0.8).abs() < 1e-12);
        assert_eq!(
            text,
            "Redundancy feedback: The generated sequence is too repetitive."
        );
        let (text, f) = redundancy_feedback(&seq("MKTAYI"));
        assert_eq!(f, 0.0);
        assert_eq!(
            text,
            "Redundancy feedback: This generated sequence is sufficiently non-redundant."
        );
        assert_eq!(repeated_kmer_fraction(&seq("MKT"), 6), 0.0);
    }

    #[test]
    fn length_blocks() {
        let s = seq("MKTAY");
        assert_eq!(length_feedback(&s, 5), None);
        assert!(length_feedback(&s, 2)
            .unwrap()
            .contains("longer than the desired length of 2"));
        assert!(length_feedback(&s, 6)
            .unwrap()
            .contains("shorter than the desired length of 6"));
    }

    #[test]
    fn ligand_blocks() {
        let reference = seq("MKTAYIAKQR");
        let mut ctx = ReferenceContext::new(
            Some(reference.clone()),
            generate_reference_trace(10),
            vec![],
        )
        .unwrap();
        assert_eq!(ligand_feedback(&ctx, &reference), None);
        ctx.ligand_site_residues = vec![5, 9];
        let kept = ligand_feedback(&ctx, &reference).unwrap();
        assert_eq!(
            kept,
            "Ligand feedback: Residues 5, 9 bind the ligand and must be preserved. All binding-site residues match the reference."
        );
        let mutated = seq("MKTAAIAKQR");
        let changed = ligand_feedback(&ctx, &mutated).unwrap();
        assert!(changed.contains("position 5 was changed from Y to A"));
        assert!(!changed.contains("position 9"));
    }

    proptest! {
        #[test]
        fn reward_monotone_and_bounded(
            p in 0.0f64..=1.0, tm in 0.0f64..=1.0, rmsd in 0.0f64..20.0, bump in 0.0f64..0.5,
        ) {
            let cfg = FeedbackConfig::default();
            let w = RewardWeights::default();
            let base = composite_reward(&metrics(p, tm, rmsd), &w, &cfg).total;
            prop_assert!(composite_reward(&metrics((p + bump).min(1.0), tm, rmsd), &w, &cfg).total >= base);
            prop_assert!(composite_reward(&metrics(p, (tm + bump).min(1.0), rmsd), &w, &cfg).total >= base);
            prop_assert!(composite_reward(&metrics(p, tm, (rmsd - bump).max(0.0)), &w, &cfg).total >= base);
            prop_assert!(base >= -0.25 - 1e-12 && base <= 1.0 + 1e-12);
            if rmsd <= cfg.penalty_threshold {
                prop_assert!(base >= 0.0);
            }
        }

        #[test]
        fn feedback_ranges_tile_flags(
            plddt in prop::collection::vec(0.0f64..100.0, 1..80),
        ) {
            let fb = plddt_feedback(&plddt, None);
            let mut covered = vec![false; plddt.len()];
            for r in &fb.ranges {
                prop_assert!(r.end <= plddt.len());
                for i in r.indices() { covered[i] = true; }
            }
            let expected: Vec<bool> = plddt.iter().map(|&v| v < fb.threshold).collect();
            prop_assert_eq!(covered, expected);

            let dev: Vec<f64> = plddt.iter().map(|v| v / 8.0).collect();
            let df = deviation_feedback(&dev, 0.5, 5, 5.0);
            let smoothed = smooth(&dev, 5);
            let mut covered = vec![false; dev.len()];
            for r in &df.flagged { for i in r.indices() { covered[i] = true; } }
            let expected: Vec<bool> = smoothed.iter().map(|&d| d > 5.0).collect();
            prop_assert_eq!(covered, expected);
        }

        #[test]
        fn redundancy_fraction_bounds(raw in "[ACDEFGHIKLMNPQRSTVWY]{1,60}") {
            let s = Sequence::new(raw).unwrap();
            let f = repeated_kmer_fraction(&s, 6);
            prop_assert!((0.0..=1.0).contains(&f));
            let all_distinct = s.len() < 6 || {
                let set: std::collections::HashSet<_> = s.as_bytes().windows(6).collect();
                set.len() == s.len() - 5
            };
            prop_assert_eq!(f == 0.0, all_distinct);
        }
    }
}
