use std::time::Instant;

use serde::{Deserialize, Serialize};

use foldsearch_core::oracle::{Oracle, OracleError, OracleResult};
use foldsearch_core::seq::Sequence;
use foldsearch_core::structure::StructureModel;

use crate::http::{CallError, Client, HttpConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRequest {
    pub sequence: String,
    pub num_models: usize,
    pub use_msa: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub ca_coords: Vec<[f64; 3]>,
    pub plddt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResponse {
    pub models: Vec<FoldModel>,
    pub oracle_id: String,
}

impl FoldResponse {
    /// Checks the response against the request and converts it.
    pub fn into_result(
        self,
        seq: &Sequence,
        wall_time_ms: u64,
    ) -> Result<OracleResult, OracleError> {
        if self.models.is_empty() {
            return Err(OracleError::SchemaViolation(
                "response has no models".into(),
            ));
        }
        let mut models = Vec::with_capacity(self.models.len());
        for (i, m) in self.models.into_iter().enumerate() {
            if m.plddt.len() != m.ca_coords.len() {
                return Err(OracleError::SchemaViolation(format!(
                    "model {i}: {} pLDDT values for {} coordinates",
                    m.plddt.len(),
                    m.ca_coords.len()
                )));
            }
            if m.ca_coords.len() != seq.len() {
                return Err(OracleError::SchemaViolation(format!(
                    "model {i}: {} residues for a {}-residue sequence",
                    m.ca_coords.len(),
                    seq.len()
                )));
            }
            let model = StructureModel {
                ca_coords: m.ca_coords,
                plddt: Some(m.plddt),
                source_id: format!("{}#{i}", self.oracle_id),
            };
            model
                .validate()
                .map_err(|e| OracleError::SchemaViolation(format!("model {i}: {e}")))?;
            models.push(model);
        }
        let mut result = OracleResult::new(models, self.oracle_id)?;
        result.wall_time_ms = wall_time_ms;
        Ok(result)
    }
}

/// Oracle backed by a folding service. MSAs are never requested.
pub struct RemoteFoldOracle {
    client: Client,
    pub num_models: usize,
}

impl RemoteFoldOracle {
    pub fn new(cfg: HttpConfig, num_models: usize) -> Self {
        Self {
            client: Client::new(cfg),
            num_models: num_models.max(1),
        }
    }

    /// Configures from `FOLD_ENDPOINT_URL`, `FOLD_API_KEY` and `FOLD_TIMEOUT_S`.
    pub fn from_env(num_models: usize) -> Result<Self, String> {
        Ok(Self::new(
            HttpConfig::from_env("FOLD", Some("FOLD_TIMEOUT_S"))?,
            num_models,
        ))
    }

    pub fn config(&self) -> &HttpConfig {
        &self.client.cfg
    }
}

impl Oracle for RemoteFoldOracle {
    fn predict(&self, seq: &Sequence) -> Result<OracleResult, OracleError> {
        let request = FoldRequest {
            sequence: seq.to_string(),
            num_models: self.num_models,
            use_msa: false,
        };
        let started = Instant::now();
        let text = self.client.post_json(&request).map_err(|e| match e {
            CallError::Status { status, body } => OracleError::Remote { status, body },
            CallError::Transport(t) => OracleError::Transport(t),
            CallError::Timeout(s) => OracleError::Timeout(s),
        })?;
        let response: FoldResponse =
            serde_json::from_str(&text).map_err(|e| OracleError::SchemaViolation(e.to_string()))?;
        response.into_result(seq, started.elapsed().as_millis() as u64)
    }

    fn id(&self) -> String {
        format!("remote:{}", self.client.cfg.endpoint)
    }
}
