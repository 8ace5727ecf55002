//! `optimize` and `baseline`: one logged sweep per dataset case.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use foldsearch_core::io::{load_run, EventBody, LoadedRun, RunLogSink, RunLogWriter, EVENTS_FILE};
use foldsearch_core::search::{best_of_n_sweep, random_baseline, RegimeSummary, Sweep};
use foldsearch_core::seq::StepSizeRegime;
use foldsearch_core::{EvaluationRecord, RewardBreakdown};

use crate::config::{LoadedConfig, RunConfig};
use crate::dataset::{build_oracle, build_proposer, load_cases, Case};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Optimize,
    Baseline,
}

/// Payload of a run log's first event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub mode: Mode,
    pub case_id: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub resume: Option<String>,
    pub parallelism: Option<usize>,
    pub serial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub mean_plddt: f64,
    pub tm_score: f64,
    pub ca_rmsd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub mode: Mode,
    pub log: PathBuf,
    pub seed: u64,
    pub regime: StepSizeRegime,
    pub sequence: String,
    pub reward: RewardBreakdown,
    pub metrics: MetricsSummary,
    /// Oracle calls charged across all regimes, including replayed ones.
    pub spent: usize,
    /// Oracle calls made by this invocation.
    pub oracle_calls: usize,
    pub runs: Vec<RegimeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_is_start: Option<bool>,
}

impl RunSummary {
    #[allow(clippy::too_many_arguments)]
    fn new(
        run_id: String,
        mode: Mode,
        log: PathBuf,
        seed: u64,
        regime: StepSizeRegime,
        best: &EvaluationRecord,
        runs: Vec<RegimeSummary>,
        oracle_calls: usize,
    ) -> Self {
        Self {
            run_id,
            mode,
            log,
            seed,
            regime,
            sequence: best.sequence.to_string(),
            reward: best.reward,
            metrics: MetricsSummary {
                mean_plddt: best.metrics.mean_plddt_01,
                tm_score: best.metrics.tm_score,
                ca_rmsd: best.metrics.ca_rmsd,
            },
            spent: runs.iter().map(|r| r.spent).sum(),
            oracle_calls,
            runs,
            best_is_start: None,
        }
    }
}

fn run_id(mode: Mode, case: &Case, seed: u64) -> String {
    match mode {
        Mode::Optimize => case.run_id(seed),
        Mode::Baseline => format!("{}-random", case.run_id(seed)),
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn logged_header(loaded: &LoadedRun) -> Result<RunHeader, CliError> {
    serde_json::from_value(loaded.config().clone()).map_err(|e| {
        CliError::Config(format!(
            "run {} has an unreadable config event: {e}",
            loaded.run_id
        ))
    })
}

/// Loads the config, taking a missing seed from the log being resumed.
fn resolve_config(
    path: &Path,
    opts: &RunOptions,
) -> Result<(LoadedConfig, Option<(PathBuf, LoadedRun)>), CliError> {
    let loaded = RunConfig::load(path)?;
    let Some(id) = &opts.resume else {
        return Ok((loaded, None));
    };
    let dir = loaded.config.output_dir.join(id);
    let log = load_run(&dir).map_err(|e| io_error(&dir.join(EVENTS_FILE), e))?;
    let header = logged_header(&log)?;
    let config = if loaded.generated_seed {
        let mut c = loaded.config.clone();
        c.search.seed = header.config.search.seed;
        c
    } else {
        loaded.config.clone()
    };
    // The output directory only locates the log, so it may differ.
    let logged = RunConfig {
        output_dir: config.output_dir.clone(),
        ..header.config.clone()
    };
    if config != logged {
        return Err(CliError::Config(format!(
            "{} does not match the configuration logged for run {id}",
            path.display()
        )));
    }
    Ok((
        LoadedConfig {
            config,
            generated_seed: false,
        },
        Some((dir, log)),
    ))
}

pub fn run(mode: Mode, config_path: &Path, opts: &RunOptions) -> Result<Vec<RunSummary>, CliError> {
    let (loaded, resumed) = resolve_config(config_path, opts)?;
    let cfg = &loaded.config;
    if loaded.generated_seed {
        eprintln!(
            "no seed configured; using generated seed {}",
            cfg.search.seed
        );
    }
    let cases = load_cases(cfg)?;
    let seed = cfg.search.seed;
    let selected: Vec<&Case> = match &opts.resume {
        Some(id) => {
            let hit: Vec<&Case> = cases
                .iter()
                .filter(|c| &run_id(mode, c, seed) == id)
                .collect();
            if hit.is_empty() {
                return Err(CliError::Config(
                    format!("no {mode:?} run {id} in this dataset").to_lowercase(),
                ));
            }
            hit
        }
        None => cases.iter().collect(),
    };
    let parallelism = if opts.serial {
        1
    } else {
        opts.parallelism
            .unwrap_or(cfg.search.k * cfg.search.n)
            .max(1)
    };
    let timestamps = !opts.serial;
    let search = cfg.effective_search();

    let mut summaries = Vec::new();
    let mut resumed = resumed;
    for case in selected {
        let id = run_id(mode, case, seed);
        let (mut sink, replay, logged_spend) = match resumed.take() {
            Some((dir, log)) => {
                let header = logged_header(&log)?;
                if header.mode != mode {
                    return Err(CliError::Config(format!(
                        "run {id} was logged by {:?}",
                        header.mode
                    )));
                }
                if let Some(f) = log.final_event() {
                    let mut s = RunSummary::new(
                        id.clone(),
                        mode,
                        dir.join(EVENTS_FILE),
                        seed,
                        f.regime,
                        &f.best,
                        f.runs.clone(),
                        0,
                    );
                    if mode == Mode::Baseline {
                        s.best_is_start = Some(f.best.sequence == case.start);
                    }
                    summaries.push(s);
                    continue;
                }
                let spend: usize = log
                    .ledgers(cfg.search.budget)
                    .values()
                    .map(|l| l.spent)
                    .sum();
                let sink =
                    RunLogSink::resume(&dir, &log, timestamps).map_err(|e| io_error(&dir, e))?;
                (sink, Some(log.replay()), spend)
            }
            None => {
                let dir = cfg.output_dir.join(&id);
                if dir.join(EVENTS_FILE).exists() {
                    return Err(CliError::Config(format!(
                        "{} already exists; pass --resume {id} to continue it",
                        dir.join(EVENTS_FILE).display()
                    )));
                }
                std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
                let mut writer =
                    RunLogWriter::create(&dir, &id, timestamps).map_err(|e| io_error(&dir, e))?;
                let header = RunHeader {
                    mode,
                    case_id: case.case_id.clone(),
                    config: cfg.clone(),
                };
                let payload =
                    serde_json::to_value(&header).map_err(|e| CliError::Internal(e.to_string()))?;
                writer
                    .append(EventBody::Config(payload))
                    .map_err(|e| io_error(&dir, e))?;
                (RunLogSink { writer, skip: 0 }, None, 0)
            }
        };
        let log_path = sink.writer.path().to_path_buf();
        let oracle = build_oracle(&cfg.oracle, case)?;
        let proposer = build_proposer(&cfg.proposer, case)?;
        let sweep = Sweep {
            cfg: &search,
            ctx: &case.ctx,
            oracle: oracle.as_ref(),
            proposer: proposer.as_ref(),
            replay: replay.as_ref(),
            parallelism,
        };
        let (result, best_is_start) = match mode {
            Mode::Optimize => (best_of_n_sweep(sweep, &case.start, &mut sink)?, None),
            Mode::Baseline => {
                let report = random_baseline(sweep, &case.start, &mut sink)?;
                (report.result, Some(report.best_is_start))
            }
        };
        let mut s = RunSummary::new(
            id,
            mode,
            log_path,
            seed,
            result.best_regime,
            &result.best,
            result.summaries(),
            result.spent() - logged_spend,
        );
        s.best_is_start = best_is_start;
        summaries.push(s);
    }
    Ok(summaries)
}
