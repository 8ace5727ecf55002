//! `evaluate`: score one sequence against a reference structure.

use std::path::Path;

use serde::Serialize;

use foldsearch_core::evaluate::EvalError;
use foldsearch_core::io::{parse_fasta, parse_pdb_ca_detailed};
use foldsearch_core::oracle::OracleError;
use foldsearch_core::seq::ReferenceContext;
use foldsearch_core::{
    Evaluator, FeedbackConfig, FidelityMetrics, RewardBreakdown, RewardWeights, Scorer,
};

use crate::config::{OracleKind, OracleSpec};
use crate::dataset::{build_oracle, Case};
use crate::error::CliError;

/// Noise seed of the synthetic oracle used by `evaluate`.
pub const EVALUATE_NOISE_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateOutput {
    pub header: String,
    pub sequence: String,
    pub length: usize,
    pub oracle_id: String,
    pub metrics: FidelityMetrics,
    pub reward: RewardBreakdown,
}

pub(crate) fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::Oracle(
            o @ (OracleError::Remote { .. } | OracleError::Transport(_) | OracleError::Timeout(_)),
        ) => CliError::Remote(o.to_string()),
        EvalError::Oracle(o @ OracleError::SchemaViolation(_)) => CliError::Remote(o.to_string()),
        e @ EvalError::LengthMismatch { .. } => CliError::Config(e.to_string()),
        e => CliError::Internal(e.to_string()),
    }
}

pub fn evaluate(
    sequence_fasta: &Path,
    reference_pdb: &Path,
    oracle: OracleKind,
) -> Result<EvaluateOutput, CliError> {
    let read =
        |p: &Path| std::fs::read(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())));
    let records = parse_fasta(&read(sequence_fasta)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", sequence_fasta.display())))?;
    let record = records.into_iter().next().ok_or_else(|| {
        CliError::Config(format!("{}: no FASTA records", sequence_fasta.display()))
    })?;
    let pdb = parse_pdb_ca_detailed(&read(reference_pdb)?, false)
        .map_err(|e| CliError::Config(format!("{}: {e}", reference_pdb.display())))?;
    if record.sequence.len() != pdb.model.len() {
        return Err(CliError::Config(format!(
            "length mismatch: sequence has {} residues, reference has {}",
            record.sequence.len(),
            pdb.model.len()
        )));
    }
    let ctx = ReferenceContext::new(pdb.sequence.clone(), pdb.model, vec![])
        .map_err(|e| CliError::Config(e.to_string()))?;
    let case = Case {
        case_id: record.header.clone(),
        ctx: ctx.clone(),
        start: record.sequence.clone(),
        target: pdb.sequence,
        default_noise_seed: EVALUATE_NOISE_SEED,
    };
    let spec = OracleSpec {
        kind: oracle,
        endpoint: None,
        seed: None,
        num_models: None,
        plddt_noise: None,
        timeout_s: None,
    };
    let oracle = build_oracle(&spec, &case)?;
    let scorer = Scorer::new(ctx, RewardWeights::default(), FeedbackConfig::default());
    let evaluator = Evaluator::new(oracle.as_ref(), scorer, 1);
    let rec = evaluator
        .evaluate(&record.sequence)
        .map_err(eval_error)?
        .record;
    Ok(EvaluateOutput {
        header: record.header,
        sequence: rec.sequence.to_string(),
        length: rec.sequence.len(),
        oracle_id: rec.oracle_id.clone(),
        metrics: rec.metrics.clone(),
        reward: rec.reward,
    })
}
