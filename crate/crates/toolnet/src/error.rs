//! Error types shared across the crate.
//!
//! Every fallible operation returns [`Result`]. Variants are deliberately
//! fine-grained so that callers (and the CLI) can distinguish validation
//! failures from I/O failures without string matching.

use crate::graph::ToolId;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, ToolNetError>;

/// All errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum ToolNetError {
    /// A tool id appeared more than once in a tool set.
    #[error("duplicate tool id: {0}")]
    DuplicateToolId(ToolId),

    /// A tool id collided with one of the reserved node names.
    #[error("reserved tool id: {0:?} (\"start\" and \"end\" are reserved)")]
    ReservedToolId(String),

    /// A tool id was empty.
    #[error("tool ids must be non-empty")]
    EmptyToolId,

    /// A graph was requested over zero tools.
    #[error("tool set must contain at least one tool")]
    EmptyToolSet,

    /// A node referenced by name does not exist in the graph.
    #[error("unknown node: {0}")]
    UnknownNode(String),

    /// Successor listing was requested for the terminal node.
    #[error("\"end\" has no successors")]
    EndHasNoSuccessors,

    /// A trajectory corpus was empty (possibly after outcome filtering).
    #[error("corpus is empty after filtering")]
    EmptyCorpus,

    /// A trajectory step referenced a tool outside the tool list.
    #[error("trajectory {trajectory:?} uses unknown tool: {tool}")]
    UnknownToolInCorpus { trajectory: String, tool: ToolId },

    /// A trajectory violated its structural rules (e.g. no steps).
    #[error("invalid trajectory {0:?}: trajectories must contain at least one step")]
    InvalidTrajectory(String),

    /// The score-mapping slope must be strictly positive.
    #[error("alpha must be > 0, got {0}")]
    NonPositiveAlpha(f64),

    /// The prior-interpolation factor must lie in [0, 1].
    #[error("beta must be within [0, 1], got {0}")]
    InvalidBeta(f64),

    /// An evaluator report scored a tool that is not in the graph.
    #[error("evaluator report references unknown tool: {0}")]
    UnknownToolInReport(ToolId),

    /// An evaluator score fell outside the permitted integer range.
    #[error("score {score} for tool {tool} is outside [-3, 3]")]
    ScoreOutOfRange { tool: ToolId, score: i64 },

    /// An evaluator report scored the same tool twice.
    #[error("evaluator report scores tool {0} more than once")]
    DuplicateToolInReport(ToolId),

    /// Start-set selection found no active tools to rank.
    #[error("no active tools available")]
    NoActiveTools,

    /// A session was started with an empty start set.
    #[error("start set is empty")]
    EmptyStartSet,

    /// A configuration value was structurally invalid.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A scenario specification was inconsistent.
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),

    /// Two scenario specs that must differ only in mode did not.
    #[error("scenario specs mismatch: {0}")]
    SpecMismatch(String),

    /// A persisted graph declared a format version this build cannot read.
    #[error("unsupported graph format version: {0}")]
    UnsupportedFormatVersion(u32),

    /// A persisted graph violated structural rules on load.
    #[error("invalid graph file: {0}")]
    InvalidGraphFile(String),

    /// Underlying filesystem failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Underlying JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
