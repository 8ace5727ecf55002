use std::sync::Arc;

use super::{
    priority_search, record_order, sequential_revision, Engine, EventSink, FinalEvent, RegimeRun,
    RegimeSummary, SearchConfig, SearchError, SearchEvent, SearchOutcome, SweepReplay,
};
use crate::evaluate::{EvaluationRecord, Evaluator, Scorer};
use crate::oracle::Oracle;
use crate::proposer::{Proposer, RandomMutationProposer};
use crate::seq::{ReferenceContext, Sequence, StepSizeRegime};

/// Inputs of a sweep over the configured regimes.
#[derive(Clone, Copy)]
pub struct Sweep<'a> {
    pub cfg: &'a SearchConfig,
    pub ctx: &'a ReferenceContext,
    pub oracle: &'a dyn Oracle,
    pub proposer: &'a dyn Proposer,
    pub replay: Option<&'a SweepReplay>,
    pub parallelism: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub best: Arc<EvaluationRecord>,
    pub best_regime: StepSizeRegime,
    /// One outcome per regime, in configuration order.
    pub outcomes: Vec<SearchOutcome>,
}

impl SweepResult {
    pub fn spent(&self) -> usize {
        self.outcomes.iter().map(|o| o.spent).sum()
    }

    pub fn summaries(&self) -> Vec<RegimeSummary> {
        self.outcomes
            .iter()
            .map(|o| RegimeSummary {
                regime: o.regime,
                spent: o.spent,
                cache_hits: o.cache_hits,
                iterations: o.iterations,
                proposals: o.proposals,
                parse_failures: o.parse_failures,
                regime_violations: o.regime_violations,
                best_total: o.best.reward.total,
            })
            .collect()
    }
}

/// Runs the configured engine once per regime, each with a fresh cache and
/// budget, and keeps the best sequence overall. Regimes run one after the
/// other; `parallelism` applies inside each run.
pub fn best_of_n_sweep(
    sweep: Sweep<'_>,
    start: &Sequence,
    sink: &mut dyn EventSink,
) -> Result<SweepResult, SearchError> {
    let cfg = sweep.cfg;
    cfg.validate()?;
    let mut outcomes = Vec::with_capacity(cfg.regimes.len());
    for &regime in &cfg.regimes {
        let scorer = Scorer::new(sweep.ctx.clone(), cfg.weights, cfg.feedback.clone());
        let replay = sweep.replay.and_then(|r| r.get(&regime));
        let mut evaluator = Evaluator::new(sweep.oracle, scorer, cfg.budget);
        if let Some(r) = replay {
            evaluator = evaluator.with_replay(r.evaluations.iter().cloned());
        }
        let run = RegimeRun {
            cfg,
            regime,
            evaluator: &evaluator,
            proposer: sweep.proposer,
            replay,
            parallelism: sweep.parallelism.max(1),
        };
        let outcome = match cfg.engine {
            Engine::Priority => priority_search(run, start, sink)?,
            Engine::Sequential => sequential_revision(run, start, sink)?,
        };
        outcomes.push(outcome);
    }
    // Ties between regimes go to the lower regime so the winner does not
    // depend on the order regimes were listed in.
    let winner = outcomes
        .iter()
        .min_by(|a, b| record_order(&a.best, &b.best).then_with(|| a.regime.cmp(&b.regime)))
        .expect("at least one regime");
    let result = SweepResult {
        best: winner.best.clone(),
        best_regime: winner.regime,
        outcomes: outcomes.clone(),
    };
    sink.emit(SearchEvent::Final(FinalEvent {
        regime: result.best_regime,
        best: (*result.best).clone(),
        runs: result.summaries(),
    }))
    .map_err(SearchError::Sink)?;
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct BaselineReport {
    pub result: SweepResult,
    /// The start sequence was never beaten.
    pub best_is_start: bool,
}

/// The same sweep with random substitutions at flagged positions in place
/// of the proposer.
pub fn random_baseline(
    sweep: Sweep<'_>,
    start: &Sequence,
    sink: &mut dyn EventSink,
) -> Result<BaselineReport, SearchError> {
    let random = RandomMutationProposer;
    let result = best_of_n_sweep(
        Sweep {
            proposer: &random,
            ..sweep
        },
        start,
        sink,
    )?;
    let best_is_start = result.best.sequence == *start;
    Ok(BaselineReport {
        result,
        best_is_start,
    })
}
