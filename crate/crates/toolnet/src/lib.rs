//! Weighted directed tool-transition graphs for tool-using agents.
//!
//! The crate models a tool library as a graph whose edge weights estimate
//! "after tool *i*, tool *j* is a good next call". It provides:
//!
//! - [`graph`]: the graph itself — construction over a tool registry,
//!   successor queries, activity toggles, audits, canonical serialization;
//! - [`construction`]: building weights from recorded trajectories and
//!   revising them from per-trajectory evaluator feedback;
//! - [`retrieval`]: a deterministic lexical embedder for picking the tools a
//!   session may start from;
//! - [`navigation`]: the session loop that walks the graph, renders scored
//!   tool menus for a pluggable policy, and accounts tokens;
//! - [`simulation`]: a deterministic harness that closes the loop
//!   (session, evaluation, update) with scripted/greedy/stochastic agents
//!   and synthetic tool behaviors, plus corpus statistics and token-usage
//!   comparisons;
//! - [`export`]: DOT rendering for visual inspection.

pub mod construction;
pub mod error;
pub mod export;
pub mod graph;
pub mod navigation;
pub mod retrieval;
pub mod simulation;

pub use construction::{
    apply_evaluation, evaluate_trajectory_oracle, f_map, load_trajectories, read_trajectories,
    save_trajectories, static_construct, write_trajectories, EvaluatorReport, OracleRubric,
    Outcome, Step, ToolScore, Trajectory,
};
pub use error::{Result, ToolNetError};
pub use export::graph_to_dot;
pub use graph::{
    format_weight, DegreeEntry, DegreeReport, EdgeWeights, NodeRef, ToolDef, ToolGraph, ToolId,
    ToolNode, UpdateParams,
};
pub use navigation::{
    count_tokens, format_tool_context, menu_options, run_session, ContextOption, Environment,
    Policy, PolicyDecision, SessionConfig, SessionContext, SessionResult, WeightFormat,
    FINISH_NAME,
};
pub use retrieval::{
    cosine_similarity, parse_registry, read_registry, select_start_set, tfidf_embed,
    EmbeddingProvider, StartSet, TfIdfEmbedder,
};
pub use simulation::{
    analyze_corpus, compare_token_usage, evaluate_assertions, run_scenario,
    run_scenario_with_prior, AgentSpec, ScenarioAssertion, ScenarioMode, ScenarioOutcome,
    ScenarioSpec, ScoreTrace, SparsityReport, StartMode, TokenComparison, ToolBehavior, ToolSpec,
    TopTool, TracePoint,
};
