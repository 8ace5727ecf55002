use serde::{Deserialize, Serialize};
use serde_json::Value;

use foldsearch_core::prompt::SYSTEM_MESSAGE;
use foldsearch_core::proposer::{ProposalRequest, Proposer, ProposerError, ProposerOutput};

use crate::http::{CallError, Client, HttpConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(model: &str, prompt: &str, seed: Option<u64>) -> Self {
        Self {
            model: model.to_string(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: SYSTEM_MESSAGE.into(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: prompt.into(),
                },
            ],
            seed,
        }
    }
}

/// The parts of a chat-completion reply we use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub content: String,
    pub reasoning: Option<String>,
}

impl ChatResponse {
    /// `reasoning_pointer` is a JSON pointer into the reply, e.g.
    /// `/choices/0/message/reasoning_content`.
    pub fn parse(text: &str, reasoning_pointer: Option<&str>) -> Result<Self, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| format!("reply is not JSON: {e}"))?;
        let content = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or("reply has no choices[0].message.content")?
            .to_string();
        let reasoning = reasoning_pointer
            .and_then(|p| v.pointer(p))
            .and_then(Value::as_str)
            .map(str::to_string);
        Ok(Self { content, reasoning })
    }
}

pub const DEFAULT_REASONING_POINTER: &str = "/choices/0/message/reasoning_content";

/// Proposer backed by an OpenAI-style chat-completion endpoint.
///
/// Whatever text comes back is handed to the sequence parser as is, so a
/// refusal becomes a recorded parse failure rather than an error.
pub struct ChatProposer {
    client: Client,
    pub model: String,
    pub reasoning_pointer: Option<String>,
    /// Forward the per-proposal seed. Not every endpoint accepts it.
    pub send_seed: bool,
}

impl ChatProposer {
    pub fn new(cfg: HttpConfig, model: impl Into<String>) -> Self {
        Self {
            client: Client::new(cfg),
            model: model.into(),
            reasoning_pointer: Some(DEFAULT_REASONING_POINTER.into()),
            send_seed: false,
        }
    }

    /// Configures from `LLM_ENDPOINT_URL`, `LLM_API_KEY` and `LLM_MODEL`.
    pub fn from_env() -> Result<Self, String> {
        let cfg = HttpConfig::from_env("LLM", None)?;
        let model = std::env::var("LLM_MODEL").map_err(|_| "LLM_MODEL is not set".to_string())?;
        Ok(Self::new(cfg, model))
    }

    pub fn config(&self) -> &HttpConfig {
        &self.client.cfg
    }
}

impl Proposer for ChatProposer {
    fn propose(&self, request: &ProposalRequest<'_>) -> Result<ProposerOutput, ProposerError> {
        let body = ChatRequest::new(
            &self.model,
            request.prompt,
            self.send_seed.then_some(request.seed),
        );
        let text = self.client.post_json(&body).map_err(|e| match e {
            CallError::Status { status, body } => ProposerError::Remote { status, body },
            CallError::Transport(t) => ProposerError::Transport(t),
            CallError::Timeout(s) => ProposerError::Timeout(s),
        })?;
        let reply =
            ChatResponse::parse(&text, self.reasoning_pointer.as_deref()).map_err(|msg| {
                ProposerError::Remote {
                    status: 200,
                    body: msg,
                }
            })?;
        Ok(ProposerOutput {
            raw: reply.content,
            reasoning: reply.reasoning,
        })
    }

    fn id(&self) -> String {
        format!("chat:{}", self.model)
    }
}
