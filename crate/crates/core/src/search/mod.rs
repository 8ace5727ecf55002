//! Search engines that drive a proposer against a budgeted oracle.
//!
//! [`priority_search`] keeps a buffer of every candidate, expands the top K
//! each iteration with N proposals apiece, and reinserts everything.
//! [`sequential_revision`] follows a single chain. [`best_of_n_sweep`] runs
//! one engine per step-size regime and keeps the global best.

mod events;
mod priority;
mod sequential;
mod sweep;

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::{EvalError, EvaluationRecord, Evaluator};
use crate::feedback::{FeedbackConfig, RewardWeights};
use crate::oracle::OracleError;
use crate::prompt::assemble_prompt;
use crate::proposer::{propose, ProposalRecord, ProposalRequest, Proposer, ProposerError};
use crate::seq::{Sequence, StepSizeRegime};

pub use events::{
    EvaluationEvent, EventSink, FinalEvent, IterationSummary, NullSink, ProposalEvent,
    RegimeReplay, RegimeSummary, SearchEvent, SweepReplay, VecSink,
};
pub use priority::priority_search;
pub use sequential::sequential_revision;
pub use sweep::{best_of_n_sweep, random_baseline, BaselineReport, Sweep, SweepResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("oracle failed: {0}")]
    Oracle(OracleError),
    #[error("proposer failed: {0}")]
    Proposer(#[from] ProposerError),
    #[error("evaluation failed: {0}")]
    Eval(EvalError),
    #[error("event sink failed: {0}")]
    Sink(String),
    #[error("invalid search configuration: {0}")]
    Config(String),
}

impl From<EvalError> for SearchError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Oracle(o) => SearchError::Oracle(o),
            other => SearchError::Eval(other),
        }
    }
}

impl SearchError {
    /// Failures of an external service, as opposed to local faults.
    pub fn is_remote(&self) -> bool {
        matches!(
            self,
            SearchError::Oracle(
                OracleError::Remote { .. } | OracleError::Transport(_) | OracleError::Timeout(_)
            ) | SearchError::Proposer(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    #[default]
    WeightedSum,
    RoundRobin,
    Scheduled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Priority,
    Sequential,
}

/// How many candidates go back into the buffer after each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferUpdate {
    /// Every explored candidate and every evaluated proposal.
    #[default]
    Union,
    /// The explored candidates plus the best K proposals (2K in total).
    CapTwoK,
}

/// Weights the scheduled curriculum starts from.
pub const SCHEDULE_START_WEIGHTS: RewardWeights = RewardWeights {
    plddt: 0.2,
    tm: 0.7,
    rmsd: 0.1,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Candidates explored per iteration.
    pub k: usize,
    /// Proposals per explored candidate.
    pub n: usize,
    /// Oracle calls per regime run.
    pub budget: usize,
    pub regimes: Vec<StepSizeRegime>,
    pub weights: RewardWeights,
    pub scheduler: Scheduler,
    pub engine: Engine,
    pub buffer_update: BufferUpdate,
    pub seed: u64,
    pub include_reference: bool,
    /// Reject proposals that break the step-size cap before evaluation.
    pub strict_regime: bool,
    /// Consecutive steps without a new oracle call before giving up.
    pub stall_limit: usize,
    pub feedback: FeedbackConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            k: 3,
            n: 2,
            budget: 25,
            regimes: vec![
                StepSizeRegime::Moderate,
                StepSizeRegime::Aggressive,
                StepSizeRegime::Unconstrained,
            ],
            weights: RewardWeights::default(),
            scheduler: Scheduler::WeightedSum,
            engine: Engine::Priority,
            buffer_update: BufferUpdate::Union,
            seed: 0,
            include_reference: true,
            strict_regime: false,
            stall_limit: 10,
            feedback: FeedbackConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.k == 0 || self.n == 0 || self.budget == 0 {
            return Err(SearchError::Config(
                "k, n and budget must be at least 1".into(),
            ));
        }
        if self.regimes.is_empty() {
            return Err(SearchError::Config(
                "at least one regime is required".into(),
            ));
        }
        if self.stall_limit == 0 {
            return Err(SearchError::Config("stall_limit must be at least 1".into()));
        }
        self.weights
            .validate()
            .map_err(|e| SearchError::Config(e.to_string()))
    }
}

/// A buffer entry. Initial copies of the start sequence carry no
/// evaluation and outrank everything.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: u64,
    pub sequence: Sequence,
    pub evaluation: Option<Arc<EvaluationRecord>>,
    pub parent_id: Option<u64>,
    pub created_iteration: usize,
    pub regime: StepSizeRegime,
}

/// Priority of a candidate; `Maximal` beats every value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Priority {
    Maximal,
    Value(f64),
}

impl Priority {
    fn cmp_value(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Priority::Maximal, Priority::Maximal) => Ordering::Equal,
            (Priority::Maximal, _) => Ordering::Greater,
            (_, Priority::Maximal) => Ordering::Less,
            (Priority::Value(a), Priority::Value(b)) => a.total_cmp(b),
        }
    }
}

/// Objective selection state for computing priorities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerState {
    pub scheduler: Scheduler,
    /// 1-based iteration number.
    pub iteration: usize,
    /// Fraction of the budget spent, in [0, 1].
    pub progress: f64,
    pub final_weights: RewardWeights,
}

/// Score a candidate is ranked by under the active scheduler.
pub fn priority(candidate: &Candidate, state: &SchedulerState) -> Priority {
    let Some(rec) = &candidate.evaluation else {
        return Priority::Maximal;
    };
    let r = &rec.reward;
    Priority::Value(match state.scheduler {
        Scheduler::WeightedSum => r.total,
        Scheduler::RoundRobin => match (state.iteration.max(1) - 1) % 3 {
            0 => r.plddt_component,
            1 => r.tm_component,
            _ => r.rmsd_component,
        },
        Scheduler::Scheduled => {
            r.reweighted(&SCHEDULE_START_WEIGHTS.lerp(&state.final_weights, state.progress))
        }
    })
}

/// Descending-rank comparator: better candidates sort first. Ties go to the
/// most recently created candidate, then to the lexicographically smaller
/// sequence.
pub fn rank(a: &Candidate, b: &Candidate, state: &SchedulerState) -> Ordering {
    priority(b, state)
        .cmp_value(&priority(a, state))
        .then_with(|| b.id.cmp(&a.id))
        .then_with(|| a.sequence.cmp(&b.sequence))
}

/// Best-record order used for final selection: higher reward, then earlier
/// in the budget, then lexicographically smaller.
pub fn record_order(a: &EvaluationRecord, b: &EvaluationRecord) -> Ordering {
    b.reward
        .total
        .total_cmp(&a.reward.total)
        .then_with(|| a.spent_index.cmp(&b.spent_index))
        .then_with(|| a.sequence.cmp(&b.sequence))
}

pub fn best_record<'a, I>(records: I) -> Option<&'a EvaluationRecord>
where
    I: IntoIterator<Item = &'a EvaluationRecord>,
{
    records.into_iter().min_by(|a, b| record_order(a, b))
}

/// Running maximum.
pub fn monotone_filter(series: &[f64]) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    series
        .iter()
        .map(|&x| {
            best = best.max(x);
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub candidate_id: u64,
    pub score: f64,
    pub plddt: f64,
    pub tm: f64,
    pub rmsd: f64,
}

/// One point per oracle call, in budget order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn push(&mut self, iteration: usize, candidate_id: u64, rec: &EvaluationRecord) {
        self.points.push(TrajectoryPoint {
            iteration,
            candidate_id,
            score: rec.reward.total,
            plddt: rec.metrics.mean_plddt_01,
            tm: rec.metrics.tm_score,
            rmsd: rec.metrics.ca_rmsd,
        });
    }

    pub fn scores(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.score).collect()
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        monotone_filter(&self.scores())
    }
}

/// Outcome of one engine run under one regime.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub regime: StepSizeRegime,
    pub best: Arc<EvaluationRecord>,
    pub trajectory: Trajectory,
    /// Every evaluation, in budget order.
    pub buffer: Vec<Arc<EvaluationRecord>>,
    pub spent: usize,
    pub cache_hits: usize,
    pub iterations: usize,
    pub proposals: usize,
    pub parse_failures: usize,
    pub regime_violations: usize,
}

impl SearchOutcome {
    pub fn violation_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.regime_violations as f64 / self.proposals as f64
        }
    }
}

/// Everything one engine run needs besides the start sequence and sink.
#[derive(Clone, Copy)]
pub struct RegimeRun<'a, 'o> {
    pub cfg: &'a SearchConfig,
    pub regime: StepSizeRegime,
    pub evaluator: &'a Evaluator<'o>,
    pub proposer: &'a dyn Proposer,
    pub replay: Option<&'a RegimeReplay>,
    /// Maximum concurrent proposer or oracle calls.
    pub parallelism: usize,
}

impl RegimeRun<'_, '_> {
    /// Runs one proposal per job `(slot, index, parent)`. Logged proposals
    /// are reused when replaying. Output order follows `jobs`.
    pub(crate) fn proposals(
        &self,
        iteration: usize,
        jobs: &[(usize, usize, &Candidate)],
    ) -> Result<Vec<ProposalRecord>, ProposerError> {
        let ctx = &self.evaluator.scorer().ctx;
        let one = |&(slot, index, parent): &(usize, usize, &Candidate)| -> Result<ProposalRecord, ProposerError> {
            if let Some(logged) = self.replay.and_then(|r| r.proposals.get(&(iteration, slot, index))) {
                return Ok(logged.clone());
            }
            let rec = parent.evaluation.as_ref().expect("explored candidates are evaluated");
            let prompt = assemble_prompt(ctx, &parent.sequence, self.regime, &rec.feedback, self.cfg.include_reference);
            let request = ProposalRequest {
                prompt: &prompt,
                parent: &parent.sequence,
                parent_id: parent.id,
                bundle: &rec.feedback,
                regime: self.regime,
                ctx,
                seed: proposal_seed(self.cfg.seed, self.regime, iteration, slot, index),
                attachment: rec.feedback.attachment.as_deref(),
            };
            propose(self.proposer, &request)
        };
        if self.parallelism <= 1 || jobs.len() <= 1 {
            return jobs.iter().map(one).collect();
        }
        let chunk = jobs.len().div_ceil(self.parallelism);
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(one).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("proposer thread panicked"))
                .collect()
        })
    }

    /// Whether a parsed proposal may be sent to the oracle.
    pub(crate) fn admissible(&self, record: &ProposalRecord) -> Option<Sequence> {
        let seq = record.parsed.as_ref()?;
        if seq.len() != self.evaluator.scorer().ctx.desired_length {
            return None;
        }
        if self.cfg.strict_regime && record.regime_violation {
            return None;
        }
        Some(seq.clone())
    }
}

/// Running counters shared by both engines.
#[derive(Default)]
pub(crate) struct Tally {
    pub trajectory: Trajectory,
    pub iterations: usize,
    pub proposals: usize,
    pub parse_failures: usize,
    pub regime_violations: usize,
}

impl Tally {
    pub(crate) fn emit_proposal(
        &mut self,
        sink: &mut dyn EventSink,
        regime: StepSizeRegime,
        iteration: usize,
        slot: usize,
        index: usize,
        record: &ProposalRecord,
    ) -> Result<(), SearchError> {
        self.proposals += 1;
        self.parse_failures += usize::from(record.parsed.is_none());
        self.regime_violations += usize::from(record.regime_violation);
        sink.emit(SearchEvent::Proposal(ProposalEvent {
            regime,
            iteration,
            slot,
            index,
            record: record.clone(),
        }))
        .map_err(SearchError::Sink)
    }

    pub(crate) fn emit_evaluation(
        &mut self,
        sink: &mut dyn EventSink,
        regime: StepSizeRegime,
        iteration: usize,
        candidate_id: u64,
        record: &EvaluationRecord,
    ) -> Result<(), SearchError> {
        self.trajectory.push(iteration, candidate_id, record);
        sink.emit(SearchEvent::Evaluation(EvaluationEvent {
            regime,
            iteration,
            candidate_id,
            record: record.clone(),
        }))
        .map_err(SearchError::Sink)
    }

    pub(crate) fn finish(
        self,
        regime: StepSizeRegime,
        evaluator: &Evaluator<'_>,
    ) -> Result<SearchOutcome, SearchError> {
        let buffer = evaluator.records();
        let best = buffer
            .iter()
            .min_by(|a, b| record_order(a, b))
            .cloned()
            .ok_or_else(|| SearchError::Config("no sequence could be evaluated".into()))?;
        let ledger = evaluator.ledger();
        Ok(SearchOutcome {
            regime,
            best,
            trajectory: self.trajectory,
            buffer,
            spent: ledger.spent,
            cache_hits: ledger.cache_hits,
            iterations: self.iterations,
            proposals: self.proposals,
            parse_failures: self.parse_failures,
            regime_violations: self.regime_violations,
        })
    }
}

/// Best reward among evaluations so far.
pub(crate) fn best_total(evaluator: &Evaluator<'_>) -> f64 {
    evaluator
        .records()
        .iter()
        .map(|r| r.reward.total)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Seed for one proposal, independent of scheduling order.
pub(crate) fn proposal_seed(
    seed: u64,
    regime: StepSizeRegime,
    iteration: usize,
    slot: usize,
    index: usize,
) -> u64 {
    crate::rng::derive_seed(
        seed,
        &[
            regime as u64 + 1,
            iteration as u64,
            slot as u64,
            index as u64,
        ],
    )
}
