//! Design cases named by a run configuration, and the oracles and
//! proposers built for them.

use std::time::Duration;

use foldsearch_core::io::DatasetManifest;
use foldsearch_core::oracle::{Oracle, SyntheticOracle, SyntheticParams};
use foldsearch_core::proposer::{GuidedMockProposer, Proposer, RandomMutationProposer};
use foldsearch_core::rng::mix_seed;
use foldsearch_core::seq::{ReferenceContext, Sequence};
use foldsearch_core::SyntheticCase;
use foldsearch_remote::{ChatProposer, HttpConfig, RemoteFoldOracle};

use crate::config::{DatasetSpec, OracleKind, OracleSpec, ProposerKind, ProposerSpec, RunConfig};
use crate::error::CliError;

pub const DEFAULT_GUIDED_NOISE: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Case {
    pub case_id: String,
    pub ctx: ReferenceContext,
    pub start: Sequence,
    /// Sequence a synthetic oracle or guided mock is keyed to.
    pub target: Option<Sequence>,
    /// Noise seed a synthetic oracle uses unless the config names one.
    pub default_noise_seed: u64,
}

impl Case {
    pub fn run_id(&self, seed: u64) -> String {
        format!("{}-s{seed}", self.case_id)
    }
}

/// Resolves the dataset to cases. Reads manifest and structure files.
pub fn load_cases(cfg: &RunConfig) -> Result<Vec<Case>, CliError> {
    match &cfg.dataset {
        DatasetSpec::Synthetic(d) => {
            let seed = d.seed.unwrap_or(cfg.search.seed);
            let case = SyntheticCase::generate(
                d.length,
                d.start_distance,
                seed,
                SyntheticParams::default(),
            );
            Ok(vec![Case {
                case_id: d.case_id.clone(),
                ctx: case.ctx,
                start: case.start,
                target: Some(case.target),
                default_noise_seed: case.oracle.noise_seed,
            }])
        }
        DatasetSpec::Manifest(path) => {
            let manifest =
                DatasetManifest::load(path).map_err(|e| CliError::Config(e.to_string()))?;
            manifest
                .entries
                .iter()
                .map(|e| {
                    Ok(Case {
                        case_id: e.case_id.clone(),
                        ctx: e.context().map_err(|e| CliError::Config(e.to_string()))?,
                        start: e.start_sequence.clone(),
                        target: e.native_sequence.clone(),
                        default_noise_seed: mix_seed(cfg.search.seed, 3),
                    })
                })
                .collect()
        }
    }
}

pub fn build_oracle(spec: &OracleSpec, case: &Case) -> Result<Box<dyn Oracle>, CliError> {
    match spec.kind {
        OracleKind::Synthetic => {
            let target = case.target.clone().ok_or_else(|| {
                CliError::Config(format!(
                    "case {}: a synthetic oracle needs a native sequence to key to",
                    case.case_id
                ))
            })?;
            let defaults = SyntheticParams::default();
            let params = SyntheticParams {
                plddt_noise: spec.plddt_noise.unwrap_or(defaults.plddt_noise),
                num_models: spec.num_models.unwrap_or(defaults.num_models),
                ..defaults
            };
            let seed = spec.seed.unwrap_or(case.default_noise_seed);
            let trace = case.ctx.reference_structure.clone();
            Ok(Box::new(
                SyntheticOracle::new(target, trace, seed).with_params(params),
            ))
        }
        OracleKind::Remote => {
            let endpoint = spec
                .endpoint
                .clone()
                .or_else(|| env("FOLD_ENDPOINT_URL"))
                .ok_or_else(|| CliError::Config("oracle.endpoint: not set".into()))?;
            let mut http = HttpConfig::new(endpoint);
            http.api_key = env("FOLD_API_KEY");
            let timeout = match (spec.timeout_s, env("FOLD_TIMEOUT_S")) {
                (Some(t), _) => t,
                (None, Some(raw)) => raw
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config("FOLD_TIMEOUT_S must be whole seconds".into()))?,
                (None, None) => 600,
            };
            http.timeout = Duration::from_secs(timeout);
            Ok(Box::new(RemoteFoldOracle::new(
                http,
                spec.num_models.unwrap_or(1),
            )))
        }
    }
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

pub fn build_proposer(spec: &ProposerSpec, case: &Case) -> Result<Box<dyn Proposer>, CliError> {
    match spec.kind {
        ProposerKind::Random => Ok(Box::new(RandomMutationProposer)),
        ProposerKind::GuidedMock => {
            let target = case.target.clone().ok_or_else(|| {
                CliError::Config(format!(
                    "case {}: the guided mock needs a native sequence",
                    case.case_id
                ))
            })?;
            Ok(Box::new(GuidedMockProposer::new(
                target,
                spec.p_noise.unwrap_or(DEFAULT_GUIDED_NOISE),
            )))
        }
        ProposerKind::Chat => {
            let endpoint = spec
                .endpoint
                .clone()
                .or_else(|| env("LLM_ENDPOINT_URL"))
                .ok_or_else(|| CliError::Config("proposer.endpoint: not set".into()))?;
            let model = spec
                .model
                .clone()
                .or_else(|| env("LLM_MODEL"))
                .ok_or_else(|| CliError::Config("proposer.model: not set".into()))?;
            let mut http = HttpConfig::new(endpoint);
            http.api_key = env("LLM_API_KEY");
            Ok(Box::new(ChatProposer::new(http, model)))
        }
    }
}
