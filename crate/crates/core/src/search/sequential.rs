use super::{
    best_total, Candidate, EventSink, IterationSummary, RegimeRun, SearchError, SearchEvent,
    SearchOutcome, Tally,
};
use crate::seq::Sequence;

/// Single-chain revision: each step proposes one child of the current
/// sequence and moves to it whatever its score. Invalid proposals leave
/// the chain where it is. The final answer is still the best sequence
/// seen, not the last one.
pub fn sequential_revision(
    run: RegimeRun<'_, '_>,
    start: &Sequence,
    sink: &mut dyn EventSink,
) -> Result<SearchOutcome, SearchError> {
    let cfg = run.cfg;
    cfg.validate()?;
    let evaluator = run.evaluator;
    let mut tally = Tally::default();

    let first = evaluator.evaluate(start)?;
    let mut current = Candidate {
        id: 0,
        sequence: start.clone(),
        evaluation: Some(first.record.clone()),
        parent_id: None,
        created_iteration: 0,
        regime: run.regime,
    };
    if first.fresh {
        tally.emit_evaluation(sink, run.regime, 0, 0, &first.record)?;
    }
    let mut stall = 0;

    for iteration in 1.. {
        if evaluator.ledger().exhausted() {
            break;
        }
        tally.iterations = iteration;
        let exploit_candidate_id = current.id;
        let record = run
            .proposals(iteration, &[(0, 0, &current)])?
            .pop()
            .expect("one proposal per job");
        tally.emit_proposal(sink, run.regime, iteration, 0, 0, &record)?;
        let mut fresh = false;
        if let Some(seq) = run.admissible(&record) {
            match evaluator.evaluate(&seq) {
                Ok(ev) => {
                    let id = iteration as u64;
                    if ev.fresh {
                        fresh = true;
                        tally.emit_evaluation(sink, run.regime, iteration, id, &ev.record)?;
                    }
                    current = Candidate {
                        id,
                        sequence: seq,
                        evaluation: Some(ev.record),
                        parent_id: Some(current.id),
                        created_iteration: iteration,
                        regime: run.regime,
                    };
                }
                Err(e) if e.is_budget_exhausted() => {}
                Err(e) => return Err(e.into()),
            }
        }

        let ledger = evaluator.ledger();
        sink.emit(SearchEvent::IterationSummary(IterationSummary {
            regime: run.regime,
            iteration,
            spent: ledger.spent,
            cache_hits: ledger.cache_hits,
            best_total: best_total(evaluator),
            exploit_candidate_id,
            buffer_size: 1,
        }))
        .map_err(SearchError::Sink)?;

        stall = if fresh { 0 } else { stall + 1 };
        if stall >= cfg.stall_limit {
            break;
        }
    }
    tally.finish(run.regime, evaluator)
}
