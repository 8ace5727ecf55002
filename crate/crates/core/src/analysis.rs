//! Post-hoc reporting over finished runs: success rates, paired
//! improvement statistics, identity, substitution and positional analyses.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::search::Trajectory;
use crate::seq::{residue_index, Sequence, ALPHABET};
use crate::structure::FidelityMetrics;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no records")]
    Empty,
    #[error("sequences of different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two paired values, got {0}")]
    TooFewPairs(usize),
    #[error("before and after have different lengths ({0} vs {1})")]
    UnpairedValues(usize, usize),
    #[error("a before value is zero; percent change is undefined")]
    ZeroBaseline,
    #[error("all differences equal {0}; the t statistic is unbounded (p -> 0)")]
    DegenerateVariance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessThresholds {
    pub min_plddt: f64,
    pub min_tm: f64,
    /// Only used by the stricter rate.
    pub max_rmsd: f64,
}

impl Default for SuccessThresholds {
    fn default() -> Self {
        Self {
            min_plddt: 0.8,
            min_tm: 0.8,
            max_rmsd: 1.5,
        }
    }
}

/// Fraction of passing designs with its count pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub passed: usize,
    pub total: usize,
}

impl Rate {
    pub fn fraction(&self) -> f64 {
        self.passed as f64 / self.total as f64
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.fraction()
    }
}

impl std::fmt::Display for Rate {
    /// `2.5% (10/394)`; whole percentages drop the decimal.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let pct = format!("{:.1}", self.percent());
        let pct = pct.strip_suffix(".0").unwrap_or(&pct);
        write!(f, "{pct}% ({}/{})", self.passed, self.total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRates {
    /// pLDDT and TM gates.
    pub rate1: Rate,
    /// pLDDT, TM and RMSD gates.
    pub rate2: Rate,
}

pub fn success_rates(
    records: &[FidelityMetrics],
    th: &SuccessThresholds,
) -> Result<SuccessRates, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let gate1 = |m: &&FidelityMetrics| m.mean_plddt_01 >= th.min_plddt && m.tm_score >= th.min_tm;
    let rate1 = records.iter().filter(gate1).count();
    let rate2 = records
        .iter()
        .filter(gate1)
        .filter(|m| m.ca_rmsd <= th.max_rmsd)
        .count();
    let total = records.len();
    Ok(SuccessRates {
        rate1: Rate {
            passed: rate1,
            total,
        },
        rate2: Rate {
            passed: rate2,
            total,
        },
    })
}

/// Percentage of identical positions.
pub fn sequence_identity(a: &Sequence, b: &Sequence) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    let same = a
        .as_bytes()
        .iter()
        .zip(b.as_bytes())
        .filter(|(x, y)| x == y)
        .count();
    Ok(100.0 * same as f64 / a.len() as f64)
}

/// Residue substitution counts, rows indexed by the original residue and
/// columns by its replacement, both in [`ALPHABET`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionMatrix {
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized counts; empty rows stay zero.
    pub frequencies: Vec<Vec<f64>>,
}

impl SubstitutionMatrix {
    pub fn count(&self, from: u8, to: u8) -> u64 {
        match (residue_index(from), residue_index(to)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    /// Off-diagonal total, i.e. the number of substitutions.
    pub fn substitutions(&self) -> u64 {
        (0..20)
            .flat_map(|i| (0..20).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.counts[i][j])
            .sum()
    }

    /// Tab-separated table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("from");
        for &r in ALPHABET {
            out.push('\t');
            out.push(r as char);
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push(ALPHABET[i] as char);
            for c in row {
                out.push_str(&format!("\t{c}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn substitution_matrix(
    pairs: &[(Sequence, Sequence)],
) -> Result<SubstitutionMatrix, AnalysisError> {
    let mut counts = vec![vec![0u64; 20]; 20];
    for (from, to) in pairs {
        if from.len() != to.len() {
            return Err(AnalysisError::LengthMismatch(from.len(), to.len()));
        }
        for (&x, &y) in from.as_bytes().iter().zip(to.as_bytes()) {
            let (i, j) = (
                residue_index(x).expect("valid"),
                residue_index(y).expect("valid"),
            );
            counts[i][j] += 1;
        }
    }
    let frequencies = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter()
                .map(|&c| {
                    if total == 0 {
                        0.0
                    } else {
                        c as f64 / total as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok(SubstitutionMatrix {
        counts,
        frequencies,
    })
}

/// Share of substitutions falling in each quarter of the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionalBins {
    pub percent: [f64; 4],
    pub substitutions: usize,
    /// No substitutions at all; `percent` is all zero.
    pub zero_total: bool,
}

/// Quarter (0..4) of 1-based position `p` in a sequence of length `len`.
/// Quarters end at ceil(L/4), ceil(L/2) and ceil(3L/4).
pub fn quarter(p: usize, len: usize) -> usize {
    let bounds = [len.div_ceil(4), len.div_ceil(2), (3 * len).div_ceil(4)];
    bounds.iter().position(|&b| p <= b).unwrap_or(3)
}

pub fn positional_update_bins(
    pairs: &[(Sequence, Sequence)],
) -> Result<PositionalBins, AnalysisError> {
    let mut counts = [0usize; 4];
    for (from, to) in pairs {
        if from.len() != to.len() {
            return Err(AnalysisError::LengthMismatch(from.len(), to.len()));
        }
        for (i, (x, y)) in from.as_bytes().iter().zip(to.as_bytes()).enumerate() {
            if x != y {
                counts[quarter(i + 1, from.len())] += 1;
            }
        }
    }
    let total: usize = counts.iter().sum();
    let percent = counts.map(|c| {
        if total == 0 {
            0.0
        } else {
            100.0 * c as f64 / total as f64
        }
    });
    Ok(PositionalBins {
        percent,
        substitutions: total,
        zero_total: total == 0,
    })
}

/// Paired before/after comparison of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementStats {
    pub n: usize,
    pub mean_before: f64,
    pub mean_after: f64,
    /// Mean of the per-pair percent changes.
    pub mean_percent: f64,
    /// Standard error of `mean_percent`.
    pub standard_error: f64,
    /// Percent change of the means.
    pub percent_of_means: f64,
    /// Two-sided paired t-test on the raw differences.
    pub p_value: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn two_sided_t_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

pub fn paired_improvement_stats(
    before: &[f64],
    after: &[f64],
) -> Result<ImprovementStats, AnalysisError> {
    if before.len() != after.len() {
        return Err(AnalysisError::UnpairedValues(before.len(), after.len()));
    }
    let n = before.len();
    if n < 2 {
        return Err(AnalysisError::TooFewPairs(n));
    }
    if before.contains(&0.0) {
        return Err(AnalysisError::ZeroBaseline);
    }
    let pct: Vec<f64> = before
        .iter()
        .zip(after)
        .map(|(b, a)| 100.0 * (a - b) / b)
        .collect();
    let diffs: Vec<f64> = before.iter().zip(after).map(|(b, a)| a - b).collect();
    let (mean_before, mean_after) = (mean(before), mean(after));
    let mean_diff = mean(&diffs);
    let sd = sample_sd(&diffs);
    let p_value = if diffs.iter().all(|&d| d == 0.0) {
        1.0
    } else if sd == 0.0 {
        return Err(AnalysisError::DegenerateVariance(mean_diff));
    } else {
        two_sided_t_p(mean_diff / (sd / (n as f64).sqrt()), (n - 1) as f64)
    };
    Ok(ImprovementStats {
        n,
        mean_before,
        mean_after,
        mean_percent: mean(&pct),
        standard_error: sample_sd(&pct) / (n as f64).sqrt(),
        percent_of_means: 100.0 * (mean_after - mean_before) / mean_before,
        p_value,
    })
}

/// One row of a before/after table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub metric: String,
    pub stats: ImprovementStats,
}

fn align(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Aligned text table: metric, before -> after, mean %, % of means, SE, p.
pub fn render_improvement_table(rows: &[ImprovementRow]) -> String {
    let mut table = vec![[
        "metric",
        "before -> after",
        "mean %",
        "% of means",
        "SE",
        "p",
    ]
    .map(String::from)
    .to_vec()];
    for r in rows {
        let s = &r.stats;
        table.push(vec![
            r.metric.clone(),
            format!("{:.2} -> {:.2}", s.mean_before, s.mean_after),
            format!("{:+.1}%", s.mean_percent),
            format!("{:+.1}%", s.percent_of_means),
            format!("{:.2}", s.standard_error),
            format!("{:.2e}", s.p_value),
        ]);
    }
    align(&table)
}

/// Aligned success-rate table with one column pair per oracle.
pub fn render_success_table(columns: &[(String, SuccessRates)]) -> String {
    let mut table = vec![["oracle", "success rate-1", "success rate-2"]
        .map(String::from)
        .to_vec()];
    for (name, rates) in columns {
        table.push(vec![
            name.clone(),
            rates.rate1.to_string(),
            rates.rate2.to_string(),
        ]);
    }
    align(&table)
}

/// CSV of trajectories with raw and running-best scores.
pub fn trajectory_csv(runs: &[(String, &Trajectory)]) -> String {
    let mut out = String::from("run,step,iteration,candidate_id,score,best_so_far,plddt,tm,rmsd\n");
    for (name, t) in runs {
        for (step, (p, best)) in t.points.iter().zip(t.best_so_far()).enumerate() {
            out.push_str(&format!(
                "{name},{},{},{},{},{},{},{},{}\n",
                step + 1,
                p.iteration,
                p.candidate_id,
                p.score,
                best,
                p.plddt,
                p.tm,
                p.rmsd
            ));
        }
    }
    out
}
