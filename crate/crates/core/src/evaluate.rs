//! Budgeted, cached evaluation of sequences: oracle call, metrics, reward
//! and feedback in one [`EvaluationRecord`].
//!
//! Only the first evaluation of a sequence spends budget. Concurrent
//! requests for the same sequence share one oracle call.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feedback::{
    build_feedback, FeedbackBundle, FeedbackConfig, RewardBreakdown, RewardWeights,
};
use crate::oracle::{Oracle, OracleError, OracleResult};
use crate::seq::{ReferenceContext, Sequence};
use crate::structure::{fidelity_metrics, FidelityMetrics, StructureError, SuperpositionPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("sequence has {got} residues, target has {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("structure error: {0}")]
    Structure(#[from] StructureError),
    #[error("replayed evaluation of {0} does not match the log")]
    ReplayDivergence(String),
}

impl EvalError {
    pub fn is_budget_exhausted(&self) -> bool {
        matches!(self, EvalError::Oracle(OracleError::BudgetExhausted { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub limit: usize,
    pub spent: usize,
    pub cache_hits: usize,
}

impl BudgetLedger {
    pub fn new(limit: usize) -> Self {
        Self {
            limit,
            spent: 0,
            cache_hits: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.limit - self.spent
    }

    pub fn exhausted(&self) -> bool {
        self.spent >= self.limit
    }
}

/// Everything learned from one oracle call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub sequence: Sequence,
    pub metrics: FidelityMetrics,
    pub reward: RewardBreakdown,
    pub feedback: FeedbackBundle,
    pub oracle_id: String,
    /// Position of this call in the run's budget, starting at 0.
    pub spent_index: usize,
}

/// Turns oracle output into metrics, reward and feedback.
#[derive(Debug, Clone)]
pub struct Scorer {
    pub ctx: ReferenceContext,
    pub weights: RewardWeights,
    pub feedback: FeedbackConfig,
    pub policy: SuperpositionPolicy,
}

impl Scorer {
    pub fn new(ctx: ReferenceContext, weights: RewardWeights, feedback: FeedbackConfig) -> Self {
        Self {
            ctx,
            weights,
            feedback,
            policy: SuperpositionPolicy::BestTm,
        }
    }

    pub fn check_length(&self, seq: &Sequence) -> Result<(), EvalError> {
        if seq.len() != self.ctx.desired_length {
            return Err(EvalError::LengthMismatch {
                got: seq.len(),
                expected: self.ctx.desired_length,
            });
        }
        Ok(())
    }

    pub fn metrics(&self, result: &OracleResult) -> Result<FidelityMetrics, EvalError> {
        Ok(fidelity_metrics(
            result.chosen(),
            &self.ctx.reference_structure,
            self.policy,
        )?)
    }

    pub fn score(
        &self,
        seq: &Sequence,
        result: &OracleResult,
        spent_index: usize,
    ) -> Result<EvaluationRecord, EvalError> {
        let metrics = self.metrics(result)?;
        let feedback = build_feedback(&self.ctx, seq, &metrics, &self.weights, &self.feedback);
        Ok(EvaluationRecord {
            sequence: seq.clone(),
            reward: feedback.reward,
            metrics,
            feedback,
            oracle_id: result.oracle_id.clone(),
            spent_index,
        })
    }
}

/// Outcome of one evaluation request.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub record: Arc<EvaluationRecord>,
    /// True when this request spent budget.
    pub fresh: bool,
}

type Cell = Arc<OnceLock<Result<Arc<EvaluationRecord>, EvalError>>>;

struct State {
    ledger: BudgetLedger,
    cache: HashMap<String, Cell>,
}

enum Slot {
    Done(Result<Evaluated, EvalError>),
    Wait(Cell),
    Own(Cell, usize),
}

pub struct Evaluator<'o> {
    oracle: &'o dyn Oracle,
    scorer: Scorer,
    state: Mutex<State>,
    replay: HashMap<String, EvaluationRecord>,
}

impl<'o> Evaluator<'o> {
    pub fn new(oracle: &'o dyn Oracle, scorer: Scorer, budget: usize) -> Self {
        Self {
            oracle,
            scorer,
            state: Mutex::new(State {
                ledger: BudgetLedger::new(budget),
                cache: HashMap::new(),
            }),
            replay: HashMap::new(),
        }
    }

    /// Previously logged evaluations. They still spend budget when first
    /// requested, but the oracle is not called.
    pub fn with_replay(mut self, records: impl IntoIterator<Item = EvaluationRecord>) -> Self {
        self.replay = records
            .into_iter()
            .map(|r| (r.sequence.as_str().to_string(), r))
            .collect();
        self
    }

    pub fn scorer(&self) -> &Scorer {
        &self.scorer
    }

    pub fn ledger(&self) -> BudgetLedger {
        self.state.lock().expect("evaluator lock").ledger
    }

    pub fn evaluate(&self, seq: &Sequence) -> Result<Evaluated, EvalError> {
        self.evaluate_batch(std::slice::from_ref(seq), 1)
            .pop()
            .expect("one result per input")
    }

    /// Evaluates `seqs` with up to `parallelism` concurrent oracle calls.
    ///
    /// Budget is reserved in input order before any call is made, so the
    /// set of evaluated sequences and their `spent_index` values do not
    /// depend on `parallelism`.
    pub fn evaluate_batch(
        &self,
        seqs: &[Sequence],
        parallelism: usize,
    ) -> Vec<Result<Evaluated, EvalError>> {
        let mut slots = Vec::with_capacity(seqs.len());
        {
            let mut state = self.state.lock().expect("evaluator lock");
            for seq in seqs {
                if let Err(e) = self.scorer.check_length(seq) {
                    slots.push(Slot::Done(Err(e)));
                    continue;
                }
                if let Some(cell) = state.cache.get(seq.as_str()) {
                    let cell = cell.clone();
                    state.ledger.cache_hits += 1;
                    slots.push(Slot::Wait(cell));
                } else if state.ledger.exhausted() {
                    slots.push(Slot::Done(Err(OracleError::BudgetExhausted {
                        limit: state.ledger.limit,
                    }
                    .into())));
                } else {
                    let index = state.ledger.spent;
                    state.ledger.spent += 1;
                    let cell: Cell = Arc::default();
                    state.cache.insert(seq.as_str().to_string(), cell.clone());
                    slots.push(Slot::Own(cell, index));
                }
            }
        }

        let jobs: Vec<(usize, &Cell, usize)> = slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                Slot::Own(cell, index) => Some((i, cell, *index)),
                _ => None,
            })
            .collect();
        let run = |&(i, cell, index): &(usize, &Cell, usize)| {
            let out = self.compute(&seqs[i], index).map(Arc::new);
            let _ = cell.set(out);
        };
        if parallelism <= 1 || jobs.len() <= 1 {
            jobs.iter().for_each(run);
        } else {
            let next = AtomicUsize::new(0);
            std::thread::scope(|scope| {
                for _ in 0..parallelism.min(jobs.len()) {
                    scope.spawn(|| loop {
                        let j = next.fetch_add(1, Ordering::Relaxed);
                        match jobs.get(j) {
                            Some(job) => run(job),
                            None => break,
                        }
                    });
                }
            });
        }

        slots
            .into_iter()
            .map(|slot| match slot {
                Slot::Done(r) => r,
                Slot::Own(cell, _) => cell.wait().clone().map(|record| Evaluated {
                    record,
                    fresh: true,
                }),
                Slot::Wait(cell) => cell.wait().clone().map(|record| Evaluated {
                    record,
                    fresh: false,
                }),
            })
            .collect()
    }

    fn compute(&self, seq: &Sequence, spent_index: usize) -> Result<EvaluationRecord, EvalError> {
        if let Some(logged) = self.replay.get(seq.as_str()) {
            if logged.spent_index != spent_index {
                return Err(EvalError::ReplayDivergence(seq.to_string()));
            }
            return Ok(logged.clone());
        }
        let result = self.oracle.predict(seq)?;
        self.scorer.score(seq, &result, spent_index)
    }

    /// Successful evaluations, in budget order.
    pub fn records(&self) -> Vec<Arc<EvaluationRecord>> {
        let state = self.state.lock().expect("evaluator lock");
        let mut out: Vec<_> = state
            .cache
            .values()
            .filter_map(|c| c.get().and_then(|r| r.as_ref().ok()).cloned())
            .collect();
        out.sort_by_key(|r| r.spent_index);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{generate_reference_trace, SyntheticOracle};
    use crate::rng::random_sequence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::atomic::AtomicUsize;

    struct Counting<O> {
        inner: O,
        calls: AtomicUsize,
    }

    impl<O: Oracle> Oracle for Counting<O> {
        fn predict(&self, seq: &Sequence) -> Result<OracleResult, OracleError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(2));
            self.inner.predict(seq)
        }
        fn id(&self) -> String {
            self.inner.id()
        }
    }

    fn setup(len: usize) -> (Sequence, Counting<SyntheticOracle>, Scorer) {
        let target = random_sequence(&mut ChaCha8Rng::seed_from_u64(1), len);
        let trace = generate_reference_trace(len);
        let oracle = SyntheticOracle::new(target.clone(), trace.clone(), 2);
        let ctx = ReferenceContext::new(Some(target.clone()), trace, vec![]).unwrap();
        let scorer = Scorer::new(ctx, RewardWeights::default(), FeedbackConfig::default());
        (
            target,
            Counting {
                inner: oracle,
                calls: AtomicUsize::new(0),
            },
            scorer,
        )
    }

    #[test]
    fn cache_hits_are_free() {
        let (target, oracle, scorer) = setup(20);
        let ev = Evaluator::new(&oracle, scorer, 5);
        let a = ev.evaluate(&target).unwrap();
        let b = ev.evaluate(&target).unwrap();
        assert!(a.fresh && !b.fresh);
        assert_eq!(a.record, b.record);
        assert_eq!(ev.ledger().spent, 1);
        assert_eq!(ev.ledger().cache_hits, 1);
        assert_eq!(oracle.calls.load(Ordering::SeqCst), 1);
        let rec = &a.record;
        assert!((rec.metrics.tm_score - 1.0).abs() < 1e-12);
        assert!(rec.metrics.ca_rmsd < 1e-9);
    }

    #[test]
    fn budget_exhaustion() {
        let (target, oracle, scorer) = setup(20);
        let ev = Evaluator::new(&oracle, scorer, 1);
        ev.evaluate(&target).unwrap();
        let other = target.with_substitutions(&[(
            0,
            if target.as_bytes()[0] == b'A' {
                b'C'
            } else {
                b'A'
            },
        )]);
        let err = ev.evaluate(&other).unwrap_err();
        assert!(err.is_budget_exhausted());
        // cached sequences stay available
        assert!(ev.evaluate(&target).is_ok());
        assert_eq!(ev.ledger().spent, 1);
    }

    #[test]
    fn length_mismatch_spends_nothing() {
        let (_, oracle, scorer) = setup(20);
        let ev = Evaluator::new(&oracle, scorer, 3);
        let short = Sequence::new("MKT").unwrap();
        assert!(matches!(
            ev.evaluate(&short),
            Err(EvalError::LengthMismatch {
                got: 3,
                expected: 20
            })
        ));
        assert_eq!(ev.ledger().spent, 0);
    }

    #[test]
    fn concurrent_duplicates_share_one_call() {
        let (target, oracle, scorer) = setup(30);
        let ev = Evaluator::new(&oracle, scorer, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let distinct: Vec<Sequence> = (0..6)
            .map(|_| crate::rng::mutate_at_distance(&mut rng, &target, 3))
            .collect();
        std::thread::scope(|s| {
            for t in 0..4 {
                let ev = &ev;
                let distinct = &distinct;
                s.spawn(move || {
                    let mut batch: Vec<Sequence> =
                        distinct.iter().cycle().skip(t).take(9).cloned().collect();
                    batch.reverse();
                    for r in ev.evaluate_batch(&batch, 3) {
                        r.unwrap();
                    }
                });
            }
        });
        assert_eq!(ev.ledger().spent, 6);
        assert_eq!(oracle.calls.load(Ordering::SeqCst), 6);
        let idx: Vec<usize> = ev.records().iter().map(|r| r.spent_index).collect();
        assert_eq!(idx, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn batch_is_parallelism_invariant() {
        let (target, oracle, scorer) = setup(30);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut batch: Vec<Sequence> = (0..8)
            .map(|_| crate::rng::mutate_at_distance(&mut rng, &target, 4))
            .collect();
        batch.push(batch[2].clone());
        let serial = Evaluator::new(&oracle, scorer.clone(), 6);
        let parallel = Evaluator::new(&oracle, scorer, 6);
        let a: Vec<_> = serial
            .evaluate_batch(&batch, 1)
            .into_iter()
            .map(|r| r.ok().map(|e| e.record))
            .collect();
        let b: Vec<_> = parallel
            .evaluate_batch(&batch, 4)
            .into_iter()
            .map(|r| r.ok().map(|e| e.record))
            .collect();
        assert_eq!(a, b);
        assert_eq!(serial.ledger(), parallel.ledger());
        assert_eq!(serial.ledger().spent, 6);
    }
}
