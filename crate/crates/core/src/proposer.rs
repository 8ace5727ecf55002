//! Generative proposers: the interface, proposal bookkeeping and two
//! desk-scale doubles (a guided mock and the random-mutation baseline).

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feedback::FeedbackBundle;
use crate::rng::random_residue_except;
use crate::seq::{
    hamming_edits, parse_sequence, EditCount, ReferenceContext, Sequence, StepSizeRegime,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProposerError {
    #[error("remote error: HTTP {status}: {body}")]
    Remote { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("timed out after {0} s")]
    Timeout(u64),
}

/// Inputs available to a proposer for one step.
#[derive(Debug, Clone, Copy)]
pub struct ProposalRequest<'a> {
    pub prompt: &'a str,
    pub parent: &'a Sequence,
    pub parent_id: u64,
    pub bundle: &'a FeedbackBundle,
    pub regime: StepSizeRegime,
    pub ctx: &'a ReferenceContext,
    /// Seed for this proposal only.
    pub seed: u64,
    pub attachment: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposerOutput {
    pub raw: String,
    pub reasoning: Option<String>,
}

impl ProposerOutput {
    pub fn text(raw: impl Into<String>) -> Self {
        Self {
            raw: raw.into(),
            reasoning: None,
        }
    }
}

pub trait Proposer: Send + Sync {
    fn propose(&self, request: &ProposalRequest<'_>) -> Result<ProposerOutput, ProposerError>;

    fn id(&self) -> String;
}

impl<T: Proposer + ?Sized> Proposer for Box<T> {
    fn propose(&self, request: &ProposalRequest<'_>) -> Result<ProposerOutput, ProposerError> {
        (**self).propose(request)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

/// What a proposer produced and how it relates to its parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub raw_output: String,
    pub parsed: Option<Sequence>,
    pub parse_error: Option<String>,
    pub reasoning: Option<String>,
    pub parent_id: u64,
    pub regime: StepSizeRegime,
    pub edit_count: Option<EditCount>,
    pub regime_violation: bool,
}

impl ProposalRecord {
    pub fn from_output(
        output: ProposerOutput,
        parent: &Sequence,
        parent_id: u64,
        regime: StepSizeRegime,
    ) -> Self {
        let (parsed, parse_error) = match parse_sequence(&output.raw) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let edit_count = parsed.as_ref().map(|s| hamming_edits(parent, s));
        Self {
            raw_output: output.raw,
            parsed,
            parse_error,
            reasoning: output.reasoning,
            parent_id,
            regime,
            edit_count,
            regime_violation: edit_count.is_some_and(|e| regime.is_violated_by(e)),
        }
    }
}

/// Calls the proposer and records the outcome. Misbehaving output is
/// recorded, never raised; only transport failures are errors.
pub fn propose(
    proposer: &dyn Proposer,
    request: &ProposalRequest<'_>,
) -> Result<ProposalRecord, ProposerError> {
    let output = proposer.propose(request)?;
    Ok(ProposalRecord::from_output(
        output,
        request.parent,
        request.parent_id,
        request.regime,
    ))
}

/// Mock of a competent optimizer that secretly knows the target sequence.
///
/// It fixes up to `max_edits` mismatched positions, inside the flagged
/// ranges first. With probability `p_noise` an edit picks a random residue
/// instead. Ligand sites are never touched.
#[derive(Debug, Clone)]
pub struct GuidedMockProposer {
    pub hidden_target: Sequence,
    pub p_noise: f64,
}

impl GuidedMockProposer {
    pub fn new(hidden_target: Sequence, p_noise: f64) -> Self {
        Self {
            hidden_target,
            p_noise,
        }
    }

    pub fn step(
        &self,
        parent: &Sequence,
        bundle: &FeedbackBundle,
        ctx: &ReferenceContext,
        regime: StepSizeRegime,
        rng: &mut impl Rng,
    ) -> Sequence {
        let target = self.hidden_target.as_bytes();
        let current = parent.as_bytes();
        let flagged: HashSet<usize> = bundle
            .flagged_positions()
            .into_iter()
            .map(|p| p - 1)
            .collect();
        let protected: HashSet<usize> = ctx.ligand_site_residues.iter().map(|p| p - 1).collect();
        let (mut inside, mut outside): (Vec<usize>, Vec<usize>) =
            (0..current.len().min(target.len()))
                .filter(|i| current[*i] != target[*i] && !protected.contains(i))
                .partition(|i| flagged.contains(i));
        inside.shuffle(rng);
        outside.shuffle(rng);
        let cap = match regime.max_edits() {
            Some(cap) => cap,
            None if !inside.is_empty() => inside.len(),
            None => outside.len(),
        };
        let edits: Vec<(usize, u8)> = inside
            .into_iter()
            .chain(outside)
            .take(cap)
            .map(|i| {
                let r = if rng.random_bool(self.p_noise.clamp(0.0, 1.0)) {
                    random_residue_except(rng, current[i])
                } else {
                    target[i]
                };
                (i, r)
            })
            .collect();
        parent.with_substitutions(&edits)
    }
}

impl Proposer for GuidedMockProposer {
    fn propose(&self, req: &ProposalRequest<'_>) -> Result<ProposerOutput, ProposerError> {
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let child = self.step(req.parent, req.bundle, req.ctx, req.regime, &mut rng);
        Ok(ProposerOutput::text(child.as_str()))
    }

    fn id(&self) -> String {
        format!("guided-mock(p_noise={})", self.p_noise)
    }
}

/// Edits per step for the random baseline under an unconstrained regime.
pub const RANDOM_UNCONSTRAINED_EDITS: usize = 10;

/// Random substitutions restricted to the flagged low-pLDDT and
/// high-deviation residues (anywhere when nothing is flagged).
#[derive(Debug, Clone, Default)]
pub struct RandomMutationProposer;

impl RandomMutationProposer {
    pub fn step(
        &self,
        parent: &Sequence,
        bundle: &FeedbackBundle,
        regime: StepSizeRegime,
        rng: &mut impl Rng,
    ) -> Sequence {
        let len = parent.len();
        let n = regime
            .max_edits()
            .unwrap_or(RANDOM_UNCONSTRAINED_EDITS)
            .min(len);
        let flagged: Vec<usize> = bundle
            .flagged_positions()
            .into_iter()
            .map(|p| p - 1)
            .filter(|&i| i < len)
            .collect();
        let mut positions: Vec<usize> = if flagged.is_empty() {
            rand::seq::index::sample(rng, len, n).into_vec()
        } else if flagged.len() >= n {
            flagged.choose_multiple(rng, n).copied().collect()
        } else {
            let chosen: HashSet<usize> = flagged.iter().copied().collect();
            let mut rest: Vec<usize> = (0..len).filter(|i| !chosen.contains(i)).collect();
            rest.shuffle(rng);
            flagged
                .iter()
                .copied()
                .chain(rest.into_iter().take(n - flagged.len()))
                .collect()
        };
        positions.sort_unstable();
        let current = parent.as_bytes();
        let edits: Vec<(usize, u8)> = positions
            .into_iter()
            .map(|i| (i, random_residue_except(rng, current[i])))
            .collect();
        parent.with_substitutions(&edits)
    }
}

impl Proposer for RandomMutationProposer {
    fn propose(&self, req: &ProposalRequest<'_>) -> Result<ProposerOutput, ProposerError> {
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        Ok(ProposerOutput::text(
            self.step(req.parent, req.bundle, req.regime, &mut rng)
                .as_str(),
        ))
    }

    fn id(&self) -> String {
        "random-mutation".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{build_feedback, FeedbackConfig, RewardWeights};
    use crate::oracle::generate_reference_trace;
    use crate::rng::{mutate_at_distance, random_sequence};
    use crate::seq::ResidueRange;
    use crate::structure::FidelityMetrics;

    fn bundle_with(len: usize, low_plddt: Vec<ResidueRange>) -> (ReferenceContext, FeedbackBundle) {
        let ctx = ReferenceContext::new(None, generate_reference_trace(len), vec![]).unwrap();
        let seq = random_sequence(&mut ChaCha8Rng::seed_from_u64(0), len);
        let metrics = FidelityMetrics {
            mean_plddt_01: 0.9,
            tm_score: 0.9,
            ca_rmsd: 1.0,
            per_residue_deviation: vec![0.0; len],
            per_residue_plddt: vec![90.0; len],
        };
        let mut b = build_feedback(
            &ctx,
            &seq,
            &metrics,
            &RewardWeights::default(),
            &FeedbackConfig::default(),
        );
        b.low_plddt_ranges = low_plddt;
        (ctx, b)
    }

    fn record(parent: &Sequence, child: &str, regime: StepSizeRegime) -> ProposalRecord {
        ProposalRecord::from_output(ProposerOutput::text(child), parent, 0, regime)
    }

    #[test]
    fn proposal_records() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let parent = random_sequence(&mut rng, 40);
        let one = mutate_at_distance(&mut rng, &parent, 1);
        let r = record(&parent, one.as_str(), StepSizeRegime::Conservative);
        assert_eq!(r.edit_count, Some(EditCount::Count(1)));
        assert!(!r.regime_violation);

        let many = mutate_at_distance(&mut rng, &parent, 15);
        assert!(record(&parent, many.as_str(), StepSizeRegime::Aggressive).regime_violation);
        assert!(!record(&parent, many.as_str(), StepSizeRegime::Unconstrained).regime_violation);

        let fenced = format!("```\n{}\n```", one);
        assert_eq!(
            record(&parent, &fenced, StepSizeRegime::Moderate).parsed,
            Some(one)
        );

        let refusal = record(
            &parent,
            "I'm sorry, I cannot do that.",
            StepSizeRegime::Moderate,
        );
        assert!(refusal.parsed.is_none() && refusal.parse_error.is_some());
        assert!(!refusal.regime_violation);

        let short = record(&parent, "MKT", StepSizeRegime::Unconstrained);
        assert_eq!(short.edit_count, Some(EditCount::LengthMismatch(40, 3)));
        assert!(short.regime_violation);
    }

    #[test]
    fn guided_single_forced_edit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = random_sequence(&mut rng, 30);
        let parent = mutate_at_distance(&mut rng, &target, 1);
        let (ctx, bundle) = bundle_with(30, vec![]);
        let mock = GuidedMockProposer::new(target.clone(), 0.0);
        for regime in StepSizeRegime::ALL {
            assert_eq!(mock.step(&parent, &bundle, &ctx, regime, &mut rng), target);
        }
    }

    #[test]
    fn guided_prefers_flagged_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let target = random_sequence(&mut rng, 50);
        let parent = mutate_at_distance(&mut rng, &target, 20);
        let mismatched: Vec<usize> = (0..50)
            .filter(|&i| parent.as_bytes()[i] != target.as_bytes()[i])
            .collect();
        let flagged_pos = mismatched[5];
        let (ctx, bundle) = bundle_with(
            50,
            vec![ResidueRange::new(flagged_pos + 1, flagged_pos + 1)],
        );
        let mock = GuidedMockProposer::new(target.clone(), 0.0);
        let child = mock.step(
            &parent,
            &bundle,
            &ctx,
            StepSizeRegime::Conservative,
            &mut rng,
        );
        assert_eq!(
            child.as_bytes()[flagged_pos],
            target.as_bytes()[flagged_pos]
        );
        assert_eq!(hamming_edits(&parent, &child).count(), Some(2));
    }

    #[test]
    fn guided_respects_ligand_sites() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let target = random_sequence(&mut rng, 20);
        let parent = mutate_at_distance(&mut rng, &target, 20);
        let (mut ctx, bundle) = bundle_with(20, vec![]);
        ctx.ligand_site_residues = vec![3, 7];
        let mock = GuidedMockProposer::new(target, 0.0);
        let child = mock.step(
            &parent,
            &bundle,
            &ctx,
            StepSizeRegime::Unconstrained,
            &mut rng,
        );
        assert_eq!(child.as_bytes()[2], parent.as_bytes()[2]);
        assert_eq!(child.as_bytes()[6], parent.as_bytes()[6]);
        assert_eq!(hamming_edits(&parent, &child).count(), Some(18));
    }

    #[test]
    fn guided_noise_free_never_moves_away() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let target = random_sequence(&mut rng, 60);
        let mut current = mutate_at_distance(&mut rng, &target, 30);
        let (ctx, bundle) = bundle_with(60, vec![ResidueRange::new(10, 25)]);
        let mock = GuidedMockProposer::new(target.clone(), 0.0);
        let mut last = 30;
        while last > 0 {
            current = mock.step(&current, &bundle, &ctx, StepSizeRegime::Moderate, &mut rng);
            let now = hamming_edits(&current, &target).count().unwrap();
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn random_mutations_stay_in_flagged_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let parent = random_sequence(&mut rng, 30);
        let (_, bundle) = bundle_with(30, vec![ResidueRange::new(5, 7)]);
        for _ in 0..50 {
            let child = RandomMutationProposer.step(
                &parent,
                &bundle,
                StepSizeRegime::Conservative,
                &mut rng,
            );
            let changed: Vec<usize> = (0..30)
                .filter(|&i| child.as_bytes()[i] != parent.as_bytes()[i])
                .collect();
            assert_eq!(changed.len(), 2);
            assert!(changed.iter().all(|i| (4..7).contains(i)));
        }
    }

    #[test]
    fn random_mutations_anywhere_when_unflagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let parent = random_sequence(&mut rng, 30);
        let (_, bundle) = bundle_with(30, vec![]);
        let child =
            RandomMutationProposer.step(&parent, &bundle, StepSizeRegime::Unconstrained, &mut rng);
        assert_eq!(
            hamming_edits(&parent, &child).count(),
            Some(RANDOM_UNCONSTRAINED_EDITS)
        );
        let (_, small) = bundle_with(30, vec![ResidueRange::new(1, 3)]);
        let child =
            RandomMutationProposer.step(&parent, &small, StepSizeRegime::Moderate, &mut rng);
        assert_eq!(hamming_edits(&parent, &child).count(), Some(5));
        assert!((0..3).all(|i| child.as_bytes()[i] != parent.as_bytes()[i]));
    }

    #[test]
    fn proposers_are_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let target = random_sequence(&mut rng, 40);
        let parent = mutate_at_distance(&mut rng, &target, 12);
        let (ctx, bundle) = bundle_with(40, vec![ResidueRange::new(1, 20)]);
        let req = ProposalRequest {
            prompt: "p",
            parent: &parent,
            parent_id: 3,
            bundle: &bundle,
            regime: StepSizeRegime::Moderate,
            ctx: &ctx,
            seed: 99,
            attachment: None,
        };
        let guided = GuidedMockProposer::new(target, 0.3);
        assert_eq!(guided.propose(&req).unwrap(), guided.propose(&req).unwrap());
        assert_eq!(
            RandomMutationProposer.propose(&req).unwrap(),
            RandomMutationProposer.propose(&req).unwrap()
        );
        let rec = propose(&guided, &req).unwrap();
        assert_eq!(rec.parent_id, 3);
        assert_eq!(rec.regime, StepSizeRegime::Moderate);
    }
}
