//! Browser bindings for a static demo page.
//!
//! Each export takes plain values and returns a JSON string (or the prompt
//! text), so the page needs no extra glue. The `*_json` functions hold the
//! logic and are usable from native code and tests.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use foldsearch_core::io::parse_pdb_ca;
use foldsearch_core::prompt::assemble_prompt;
use foldsearch_core::search::{best_of_n_sweep, monotone_filter, Engine, NullSink, Sweep};
use foldsearch_core::structure::{per_residue_deviation, tm_score, SuperpositionPolicy};
use foldsearch_core::{
    Evaluator, FeedbackConfig, GuidedMockProposer, RewardWeights, Scorer, SearchConfig,
    StepSizeRegime, SyntheticCase, SyntheticParams,
};

const MAX_LENGTH: usize = 400;

fn case(length: usize, distance: usize, seed: u64) -> Result<SyntheticCase, String> {
    if !(5..=MAX_LENGTH).contains(&length) {
        return Err(format!("length must be between 5 and {MAX_LENGTH}"));
    }
    if distance > length {
        return Err("start distance exceeds the length".into());
    }
    Ok(SyntheticCase::generate(
        length,
        distance,
        seed,
        SyntheticParams::default(),
    ))
}

/// TM-score, RMSD and per-residue deviation of one CA trace against another.
pub fn compare_structures_json(predicted_pdb: &str, reference_pdb: &str) -> Result<String, String> {
    let pred =
        parse_pdb_ca(predicted_pdb.as_bytes(), false).map_err(|e| format!("predicted: {e}"))?;
    let reference =
        parse_pdb_ca(reference_pdb.as_bytes(), false).map_err(|e| format!("reference: {e}"))?;
    let tm = tm_score(&pred, &reference).map_err(|e| e.to_string())?;
    let deviation = per_residue_deviation(&pred, &reference, SuperpositionPolicy::BestTm)
        .map_err(|e| e.to_string())?;
    let rmsd = foldsearch_core::structure::ca_rmsd(&pred, &reference).map_err(|e| e.to_string())?;
    Ok(json!({
        "length": reference.len(),
        "tm_score": tm.score,
        "d0": tm.d0,
        "ca_rmsd": rmsd,
        "per_residue_deviation": deviation,
    })
    .to_string())
}

/// Runs a full sweep on a synthetic case with the guided mock proposer.
pub fn run_search_json(
    length: usize,
    distance: usize,
    seed: u64,
    budget: usize,
    sequential: bool,
) -> Result<String, String> {
    let case = case(length, distance, seed)?;
    let cfg = SearchConfig {
        seed,
        budget,
        engine: if sequential {
            Engine::Sequential
        } else {
            Engine::Priority
        },
        ..SearchConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let proposer = GuidedMockProposer::new(case.target.clone(), 0.1);
    let sweep = Sweep {
        cfg: &cfg,
        ctx: &case.ctx,
        oracle: &case.oracle,
        proposer: &proposer,
        replay: None,
        parallelism: 1,
    };
    let result = best_of_n_sweep(sweep, &case.start, &mut NullSink).map_err(|e| e.to_string())?;
    let regimes: Vec<Value> = result
        .outcomes
        .iter()
        .map(|o| {
            let scores = o.trajectory.scores();
            json!({
                "regime": o.regime,
                "best": o.best.reward.total,
                "scores": scores,
                "filtered": monotone_filter(&scores),
            })
        })
        .collect();
    Ok(json!({
        "target": case.target.as_str(),
        "start": case.start.as_str(),
        "best": result.best.sequence.as_str(),
        "best_regime": result.best_regime,
        "reward": result.best.reward.total,
        "tm_score": result.best.metrics.tm_score,
        "ca_rmsd": result.best.metrics.ca_rmsd,
        "spent": result.spent(),
        "regimes": regimes,
    })
    .to_string())
}

/// The prompt a proposer would receive for the start sequence of a case.
pub fn render_prompt_text(
    length: usize,
    distance: usize,
    seed: u64,
    regime: &str,
) -> Result<String, String> {
    let regime: StepSizeRegime = regime.parse()?;
    let case = case(length, distance, seed)?;
    let scorer = Scorer::new(
        case.ctx.clone(),
        RewardWeights::default(),
        FeedbackConfig::default(),
    );
    let evaluator = Evaluator::new(&case.oracle, scorer, 1);
    let start = evaluator
        .evaluate(&case.start)
        .map_err(|e| e.to_string())?
        .record;
    Ok(assemble_prompt(
        &case.ctx,
        &case.start,
        regime,
        &start.feedback,
        true,
    ))
}

#[wasm_bindgen]
pub fn compare_structures(predicted_pdb: &str, reference_pdb: &str) -> Result<String, JsError> {
    compare_structures_json(predicted_pdb, reference_pdb).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn run_search(
    length: usize,
    distance: usize,
    seed: u32,
    budget: usize,
    sequential: bool,
) -> Result<String, JsError> {
    run_search_json(length, distance, seed.into(), budget, sequential).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn render_prompt(
    length: usize,
    distance: usize,
    seed: u32,
    regime: &str,
) -> Result<String, JsError> {
    render_prompt_text(length, distance, seed.into(), regime).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HELIX: &str = include_str!("../../../demo/helix.pdb");

    #[test]
    fn self_comparison() {
        let v: Value =
            serde_json::from_str(&compare_structures_json(HELIX, HELIX).unwrap()).unwrap();
        assert!((v["tm_score"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!(v["ca_rmsd"].as_f64().unwrap() < 1e-9);
        assert_eq!(v["per_residue_deviation"].as_array().unwrap().len(), 48);
    }

    #[test]
    fn search_stays_within_budget() {
        let v: Value =
            serde_json::from_str(&run_search_json(60, 12, 3, 10, false).unwrap()).unwrap();
        assert!(v["spent"].as_u64().unwrap() <= 30);
        assert_eq!(v["regimes"].as_array().unwrap().len(), 3);
        assert!(run_search_json(3, 1, 0, 10, false).is_err());
    }

    #[test]
    fn prompt_has_four_sections() {
        let p = render_prompt_text(40, 8, 1, "moderate").unwrap();
        assert!(p.starts_with("#Instruction"));
        assert!(p.contains("#Feedback"));
        assert!(render_prompt_text(40, 8, 1, "gentle").is_err());
    }
}
