//! `report`: aggregate finished run logs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use foldsearch_core::analysis::{
    paired_improvement_stats, positional_update_bins, render_improvement_table,
    render_success_table, sequence_identity, substitution_matrix, success_rates, trajectory_csv,
    ImprovementRow, PositionalBins, SubstitutionMatrix, SuccessRates, SuccessThresholds,
};
use foldsearch_core::io::{load_run, EVENTS_FILE};
use foldsearch_core::search::{SearchEvent, Trajectory};
use foldsearch_core::seq::{Sequence, StepSizeRegime};
use foldsearch_core::{EvaluationRecord, Evaluator, FidelityMetrics, Scorer};

use crate::commands::evaluate::eval_error;
use crate::commands::run::RunHeader;
use crate::config::OracleSpec;
use crate::dataset::{build_oracle, load_cases};
use crate::error::CliError;

/// What `report` needs from one finished run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run_id: String,
    pub header: RunHeader,
    pub start: EvaluationRecord,
    pub best: EvaluationRecord,
    pub trajectories: Vec<(StepSizeRegime, Trajectory)>,
}

/// Run directories under each path: the path itself when it holds a log,
/// otherwise its immediate subdirectories that do, in name order.
pub fn discover_runs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.join(EVENTS_FILE).is_file() {
            out.push(p.clone());
            continue;
        }
        let entries =
            std::fs::read_dir(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        let mut found: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| d.join(EVENTS_FILE).is_file())
            .collect();
        if found.is_empty() {
            return Err(CliError::Config(format!(
                "{}: no run logs found",
                p.display()
            )));
        }
        found.sort();
        out.extend(found);
    }
    Ok(out)
}

/// Reads a run log. Returns `None` for runs without a final event.
pub fn read_run(dir: &Path) -> Result<Option<RunRecord>, CliError> {
    let loaded = load_run(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let header: RunHeader = serde_json::from_value(loaded.config().clone()).map_err(|e| {
        CliError::Config(format!("{}: unreadable config event: {e}", dir.display()))
    })?;
    let Some(fin) = loaded.final_event() else {
        return Ok(None);
    };
    let mut start = None;
    let mut trajectories: Vec<(StepSizeRegime, Trajectory)> = Vec::new();
    for event in loaded.search_events() {
        if let SearchEvent::Evaluation(e) = event {
            if start.is_none() {
                start = Some(e.record.clone());
            }
            match trajectories.iter_mut().find(|(r, _)| *r == e.regime) {
                Some((_, t)) => t.push(e.iteration, e.candidate_id, &e.record),
                None => {
                    let mut t = Trajectory::default();
                    t.push(e.iteration, e.candidate_id, &e.record);
                    trajectories.push((e.regime, t));
                }
            }
        }
    }
    let start = start
        .ok_or_else(|| CliError::Config(format!("{}: no evaluations logged", dir.display())))?;
    Ok(Some(RunRecord {
        run_id: loaded.run_id.clone(),
        header,
        start,
        best: fin.best.clone(),
        trajectories,
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricRow {
    pub row: Option<ImprovementRow>,
    pub metric: String,
    /// Why no statistics could be computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub runs: Vec<String>,
    pub incomplete: Vec<PathBuf>,
    pub thresholds: SuccessThresholds,
    /// `(oracle label, rates)`; a second column appears with a cross oracle.
    pub success: Vec<(String, SuccessRates)>,
    pub improvements: Vec<MetricRow>,
    /// Mean percent identity between start and final sequences.
    pub mean_identity: f64,
    pub positional_bins: PositionalBins,
    #[serde(skip)]
    pub substitutions: SubstitutionMatrix,
    /// Oracle calls spent by the cross-oracle re-evaluation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_oracle_calls: Option<usize>,
    #[serde(skip)]
    pub trajectory_csv: String,
}

impl Report {
    pub fn render_text(&self) -> String {
        let mut out = format!("runs: {}", self.runs.len());
        if !self.incomplete.is_empty() {
            out.push_str(&format!(" ({} incomplete skipped)", self.incomplete.len()));
        }
        out.push_str("\n\n");
        out.push_str(&render_success_table(&self.success));
        out.push('\n');
        let rows: Vec<ImprovementRow> = self
            .improvements
            .iter()
            .filter_map(|m| m.row.clone())
            .collect();
        if !rows.is_empty() {
            out.push_str(&render_improvement_table(&rows));
        }
        for m in self.improvements.iter().filter(|m| m.row.is_none()) {
            out.push_str(&format!(
                "{}: {}\n",
                m.metric,
                m.note.as_deref().unwrap_or("not computed")
            ));
        }
        out.push_str(&format!(
            "\nmean identity to start: {:.1}%\n",
            self.mean_identity
        ));
        let b = &self.positional_bins;
        out.push_str(&format!(
            "substitutions by quarter ({} total): {:.1}% {:.1}% {:.1}% {:.1}%\n",
            b.substitutions, b.percent[0], b.percent[1], b.percent[2], b.percent[3]
        ));
        if let Some(n) = self.cross_oracle_calls {
            out.push_str(&format!("cross-oracle calls: {n}\n"));
        }
        out
    }

    /// Writes `report.json`, `trajectories.csv` and `substitutions.tsv`.
    pub fn write_files(&self, dir: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Config(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let json =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(dir.join("report.json"), json + "\n").map_err(io)?;
        std::fs::write(dir.join("trajectories.csv"), &self.trajectory_csv).map_err(io)?;
        std::fs::write(dir.join("substitutions.tsv"), self.substitutions.to_tsv()).map_err(io)?;
        Ok(())
    }
}

/// Reads a cross-oracle file: a bare oracle spec or a run config whose
/// `oracle` section is used.
pub fn load_oracle_spec(path: &Path) -> Result<OracleSpec, CliError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        Bare(OracleSpec),
        Wrapped { oracle: OracleSpec },
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let spec = match serde_json::from_str::<Either>(&text) {
        Ok(Either::Bare(s)) | Ok(Either::Wrapped { oracle: s }) => s,
        Err(_) => {
            // Re-parse as a bare spec for a useful error message.
            let e = serde_json::from_str::<OracleSpec>(&text).err();
            return Err(CliError::Config(format!(
                "{}: not an oracle config{}",
                path.display(),
                e.map(|e| format!(" ({e})")).unwrap_or_default()
            )));
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Scores each run's final sequence with `spec`, one oracle call apiece.
pub fn cross_evaluate(
    runs: &[RunRecord],
    spec: &OracleSpec,
) -> Result<(Vec<FidelityMetrics>, usize), CliError> {
    let mut metrics = Vec::with_capacity(runs.len());
    let mut calls = 0;
    for run in runs {
        let cfg = &run.header.config;
        let cases = load_cases(cfg)?;
        let case = cases
            .iter()
            .find(|c| c.case_id == run.header.case_id)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "run {}: case {} not in its dataset",
                    run.run_id, run.header.case_id
                ))
            })?;
        let oracle = build_oracle(spec, case)?;
        let scorer = Scorer::new(
            case.ctx.clone(),
            cfg.search.weights,
            cfg.search.feedback.clone(),
        );
        let evaluator = Evaluator::new(oracle.as_ref(), scorer, 1);
        let rec = evaluator
            .evaluate(&run.best.sequence)
            .map_err(eval_error)?
            .record;
        calls += evaluator.ledger().spent;
        metrics.push(rec.metrics.clone());
    }
    Ok((metrics, calls))
}

fn improvement(metric: &str, before: Vec<f64>, after: Vec<f64>) -> MetricRow {
    match paired_improvement_stats(&before, &after) {
        Ok(stats) => MetricRow {
            row: Some(ImprovementRow {
                metric: metric.into(),
                stats,
            }),
            metric: metric.into(),
            note: None,
        },
        Err(e) => MetricRow {
            row: None,
            metric: metric.into(),
            note: Some(e.to_string()),
        },
    }
}

pub fn build_report(
    run_dirs: &[PathBuf],
    cross: Option<&OracleSpec>,
    thresholds: SuccessThresholds,
) -> Result<Report, CliError> {
    let mut runs = Vec::new();
    let mut incomplete = Vec::new();
    for dir in run_dirs {
        match read_run(dir)? {
            Some(r) => runs.push(r),
            None => incomplete.push(dir.clone()),
        }
    }
    if runs.is_empty() {
        return Err(CliError::Config("no finished runs to report on".into()));
    }
    let finals: Vec<FidelityMetrics> = runs.iter().map(|r| r.best.metrics.clone()).collect();
    let analysis = |e: foldsearch_core::analysis::AnalysisError| CliError::Internal(e.to_string());
    let mut success = vec![(
        "search oracle".to_string(),
        success_rates(&finals, &thresholds).map_err(analysis)?,
    )];
    let mut cross_oracle_calls = None;
    if let Some(spec) = cross {
        let (metrics, calls) = cross_evaluate(&runs, spec)?;
        success.push((
            "cross oracle".to_string(),
            success_rates(&metrics, &thresholds).map_err(analysis)?,
        ));
        cross_oracle_calls = Some(calls);
    }

    let column = |f: &dyn Fn(&EvaluationRecord) -> f64| -> (Vec<f64>, Vec<f64>) {
        (
            runs.iter().map(|r| f(&r.start)).collect(),
            runs.iter().map(|r| f(&r.best)).collect(),
        )
    };
    let mut improvements = Vec::new();
    for (name, f) in [
        (
            "reward",
            &(|r: &EvaluationRecord| r.reward.total) as &dyn Fn(&EvaluationRecord) -> f64,
        ),
        ("pLDDT", &|r: &EvaluationRecord| {
            100.0 * r.metrics.mean_plddt_01
        }),
        ("TM-score", &|r: &EvaluationRecord| r.metrics.tm_score),
        ("RMSD", &|r: &EvaluationRecord| r.metrics.ca_rmsd),
    ] {
        let (before, after) = column(f);
        improvements.push(improvement(name, before, after));
    }

    let pairs: Vec<(Sequence, Sequence)> = runs
        .iter()
        .map(|r| (r.start.sequence.clone(), r.best.sequence.clone()))
        .collect();
    let identities: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| sequence_identity(a, b))
        .collect::<Result<_, _>>()
        .map_err(analysis)?;
    let mean_identity = identities.iter().sum::<f64>() / identities.len() as f64;
    let named: Vec<(String, &Trajectory)> = runs
        .iter()
        .flat_map(|r| {
            r.trajectories
                .iter()
                .map(move |(regime, t)| (format!("{}/{}", r.run_id, regime.name()), t))
        })
        .collect();
    Ok(Report {
        runs: runs.iter().map(|r| r.run_id.clone()).collect(),
        incomplete,
        thresholds,
        success,
        improvements,
        mean_identity,
        positional_bins: positional_update_bins(&pairs).map_err(analysis)?,
        substitutions: substitution_matrix(&pairs).map_err(analysis)?,
        cross_oracle_calls,
        trajectory_csv: trajectory_csv(&named),
    })
}
