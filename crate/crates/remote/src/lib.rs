//! HTTP adapters: a folding-service oracle and a chat-completion proposer.
//!
//! Both post JSON with bounded retries. Server errors (5xx, 429) and
//! transport failures are retried with exponential backoff; other 4xx
//! responses fail at once.

mod chat;
mod fold;
mod http;

pub use chat::{ChatMessage, ChatProposer, ChatRequest, ChatResponse, DEFAULT_REASONING_POINTER};
pub use fold::{FoldModel, FoldRequest, FoldResponse, RemoteFoldOracle};
pub use http::{CallError, HttpConfig, DEFAULT_ATTEMPTS};
