use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::evaluate::EvaluationRecord;
use crate::proposer::ProposalRecord;
use crate::seq::StepSizeRegime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationEvent {
    pub regime: StepSizeRegime,
    pub iteration: usize,
    pub candidate_id: u64,
    pub record: EvaluationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalEvent {
    pub regime: StepSizeRegime,
    pub iteration: usize,
    /// Position of the parent among the explored candidates.
    pub slot: usize,
    pub index: usize,
    pub record: ProposalRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub regime: StepSizeRegime,
    pub iteration: usize,
    pub spent: usize,
    pub cache_hits: usize,
    pub best_total: f64,
    /// Highest-priority candidate at the start of the iteration.
    pub exploit_candidate_id: u64,
    pub buffer_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub regime: StepSizeRegime,
    pub spent: usize,
    pub cache_hits: usize,
    pub iterations: usize,
    pub proposals: usize,
    pub parse_failures: usize,
    pub regime_violations: usize,
    pub best_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEvent {
    pub regime: StepSizeRegime,
    pub best: EvaluationRecord,
    pub runs: Vec<RegimeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum SearchEvent {
    Evaluation(EvaluationEvent),
    Proposal(ProposalEvent),
    IterationSummary(IterationSummary),
    Final(FinalEvent),
}

pub trait EventSink {
    fn emit(&mut self, event: SearchEvent) -> Result<(), String>;
}

#[derive(Debug, Default)]
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&mut self, _: SearchEvent) -> Result<(), String> {
        Ok(())
    }
}

/// Keeps every event in memory.
#[derive(Debug, Default)]
pub struct VecSink(pub Vec<SearchEvent>);

impl EventSink for VecSink {
    fn emit(&mut self, event: SearchEvent) -> Result<(), String> {
        self.0.push(event);
        Ok(())
    }
}

/// Logged work of an interrupted regime run, replayed instead of recomputed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegimeReplay {
    pub evaluations: Vec<EvaluationRecord>,
    /// Keyed by `(iteration, slot, index)`.
    pub proposals: HashMap<(usize, usize, usize), ProposalRecord>,
}

pub type SweepReplay = HashMap<StepSizeRegime, RegimeReplay>;

impl RegimeReplay {
    /// Groups logged search events by regime.
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a SearchEvent>) -> SweepReplay {
        let mut out: SweepReplay = HashMap::new();
        for event in events {
            match event {
                SearchEvent::Evaluation(e) => out
                    .entry(e.regime)
                    .or_default()
                    .evaluations
                    .push(e.record.clone()),
                SearchEvent::Proposal(p) => {
                    out.entry(p.regime)
                        .or_default()
                        .proposals
                        .insert((p.iteration, p.slot, p.index), p.record.clone());
                }
                _ => {}
            }
        }
        out
    }
}
