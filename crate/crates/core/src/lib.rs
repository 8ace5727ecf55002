//! Feedback-guided sequence search against a structure oracle.
//!
//! A proposer suggests edits to a protein sequence, an oracle folds it, and
//! the predicted structure is scored against a reference. Per-residue
//! confidence and deviation are turned into text feedback that the next
//! proposal sees.

pub mod analysis;
pub mod evaluate;
pub mod feedback;
pub mod io;
pub mod oracle;
pub mod prompt;
pub mod proposer;
pub mod rng;
pub mod search;
pub mod seq;
pub mod structure;

pub use evaluate::{EvaluationRecord, Evaluator, Scorer};
pub use feedback::{FeedbackBundle, FeedbackConfig, RewardBreakdown, RewardWeights};
pub use oracle::{
    Oracle, OracleError, OracleResult, SyntheticCase, SyntheticOracle, SyntheticParams,
};
pub use proposer::{GuidedMockProposer, Proposer, RandomMutationProposer};
pub use search::{SearchConfig, SearchError};
pub use seq::{ReferenceContext, Sequence, StepSizeRegime};
pub use structure::{FidelityMetrics, StructureModel};
