use super::{
    best_total, rank, BufferUpdate, Candidate, EventSink, IterationSummary, RegimeRun,
    SchedulerState, SearchError, SearchEvent, SearchOutcome, Tally,
};
use crate::seq::Sequence;

/// Buffered best-first search under one step-size regime.
///
/// The buffer starts with K unevaluated copies of `start`. Each iteration
/// takes the K highest-priority candidates, evaluates them, asks for N
/// proposals from each and evaluates the proposals. Explored candidates go
/// back into the buffer together with the proposals, so a candidate can be
/// expanded again later. The run ends when the budget is spent or after
/// `stall_limit` iterations in a row without a new oracle call.
pub fn priority_search(
    run: RegimeRun<'_, '_>,
    start: &Sequence,
    sink: &mut dyn EventSink,
) -> Result<SearchOutcome, SearchError> {
    let cfg = run.cfg;
    cfg.validate()?;
    let evaluator = run.evaluator;
    let mut tally = Tally::default();
    let mut next_id = 0u64;
    let mut buffer: Vec<Candidate> = (0..cfg.k)
        .map(|_| {
            next_id += 1;
            Candidate {
                id: next_id - 1,
                sequence: start.clone(),
                evaluation: None,
                parent_id: None,
                created_iteration: 0,
                regime: run.regime,
            }
        })
        .collect();
    let mut stall = 0;

    for iteration in 1.. {
        if evaluator.ledger().exhausted() || buffer.is_empty() {
            break;
        }
        let ledger = evaluator.ledger();
        let state = SchedulerState {
            scheduler: cfg.scheduler,
            iteration,
            progress: ledger.spent as f64 / ledger.limit as f64,
            final_weights: cfg.weights,
        };
        buffer.sort_by(|a, b| rank(a, b, &state));
        let take = cfg.k.min(buffer.len());
        let selected: Vec<Candidate> = buffer.drain(..take).collect();
        let exploit_candidate_id = selected[0].id;
        tally.iterations = iteration;
        let mut fresh = 0;

        let seqs: Vec<Sequence> = selected.iter().map(|c| c.sequence.clone()).collect();
        let mut explored = Vec::with_capacity(selected.len());
        for (mut cand, result) in selected
            .into_iter()
            .zip(evaluator.evaluate_batch(&seqs, run.parallelism))
        {
            match result {
                Ok(ev) => {
                    if ev.fresh {
                        fresh += 1;
                        tally.emit_evaluation(sink, run.regime, iteration, cand.id, &ev.record)?;
                    }
                    cand.evaluation = Some(ev.record);
                    explored.push(cand);
                }
                Err(e) if e.is_budget_exhausted() => {}
                Err(e) => return Err(e.into()),
            }
        }

        let jobs: Vec<(usize, usize, &Candidate)> = explored
            .iter()
            .enumerate()
            .flat_map(|(slot, c)| (0..cfg.n).map(move |index| (slot, index, c)))
            .collect();
        let records = run.proposals(iteration, &jobs)?;
        let mut children = Vec::new();
        for (&(slot, index, parent), record) in jobs.iter().zip(&records) {
            tally.emit_proposal(sink, run.regime, iteration, slot, index, record)?;
            if let Some(seq) = run.admissible(record) {
                children.push((parent.id, seq));
            }
        }

        let seqs: Vec<Sequence> = children.iter().map(|(_, s)| s.clone()).collect();
        let mut proposed = Vec::with_capacity(children.len());
        for ((parent_id, seq), result) in children
            .into_iter()
            .zip(evaluator.evaluate_batch(&seqs, run.parallelism))
        {
            match result {
                Ok(ev) => {
                    let id = next_id;
                    next_id += 1;
                    if ev.fresh {
                        fresh += 1;
                        tally.emit_evaluation(sink, run.regime, iteration, id, &ev.record)?;
                    }
                    proposed.push(Candidate {
                        id,
                        sequence: seq,
                        evaluation: Some(ev.record),
                        parent_id: Some(parent_id),
                        created_iteration: iteration,
                        regime: run.regime,
                    });
                }
                Err(e) if e.is_budget_exhausted() => {}
                Err(e) => return Err(e.into()),
            }
        }

        if cfg.buffer_update == BufferUpdate::CapTwoK {
            proposed.sort_by(|a, b| rank(a, b, &state));
            proposed.truncate(cfg.k);
        }
        buffer.extend(explored);
        buffer.extend(proposed);

        let ledger = evaluator.ledger();
        sink.emit(SearchEvent::IterationSummary(IterationSummary {
            regime: run.regime,
            iteration,
            spent: ledger.spent,
            cache_hits: ledger.cache_hits,
            best_total: best_total(evaluator),
            exploit_candidate_id,
            buffer_size: buffer.len(),
        }))
        .map_err(SearchError::Sink)?;

        stall = if fresh == 0 { stall + 1 } else { 0 };
        if stall >= cfg.stall_limit {
            break;
        }
    }
    tally.finish(run.regime, evaluator)
}
