//! Deterministic scenario harness.
//!
//! A scenario bundles a synthetic tool registry, a scripted or heuristic
//! agent, an oracle evaluator, and run parameters into one JSON-loadable
//! spec. Running it executes `iterations` sessions; in `toolnet` mode each
//! session's trajectory is scored by the oracle and folded back into the
//! graph, while `full_list` mode offers every active tool at every step
//! with no scores and never updates anything — the baseline a routed graph
//! is compared against.
//!
//! All randomness flows from the spec's `seed` through two independent
//! ChaCha8 streams (one for environments, one salted for policies), and
//! only `next_u64` plus modular reduction is used, so results are
//! reproducible across platforms and releases. Two runs of the same spec
//! produce byte-identical traces, session logs, and final graphs.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::construction::{
    apply_evaluation, evaluate_trajectory_oracle, OracleRubric, Trajectory,
};
use crate::error::{Result, ToolNetError};
use crate::graph::{format_weight, ToolDef, ToolGraph, ToolId, UpdateParams};
use crate::navigation::{
    run_session, ContextOption, Environment, Policy, PolicyDecision, SessionConfig,
    SessionContext, SessionResult, WeightFormat, FINISH_NAME,
};
use crate::retrieval::{select_start_set, tfidf_embed, StartSet, TfIdfEmbedder};

/// Policies draw from a stream salted with this constant so environment
/// and policy randomness never interleave.
const POLICY_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Maximum number of tools listed in a sparsity report.
pub const TOP_TOOLS_LIMIT: usize = 10;

/// How a synthetic tool responds when executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToolBehavior {
    /// Always returns a relevant answer.
    AnswerRelevant,
    /// Always returns the unhelpful string `"Nothing Found"`.
    NoisyNothingFound,
    /// Returns a seeded random number as text.
    NoisyRandomNumber,
    /// Relevant until the given iteration, then permanently returns
    /// `"ERROR: tool unavailable"`; its oracle base score also becomes -2
    /// from that iteration on.
    CrashesAt { iteration: u64 },
}

/// One synthetic tool in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub id: ToolId,
    pub description: String,
    #[serde(default)]
    pub category: Option<String>,
    pub behavior: ToolBehavior,
}

impl ToolSpec {
    /// The registry entry for this tool.
    pub fn to_def(&self) -> ToolDef {
        ToolDef {
            id: self.id.clone(),
            description: self.description.clone(),
            category: self.category.clone(),
        }
    }
}

/// The scripted or heuristic agent driving each session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    /// Session `i` follows `script[i % script.len()]` entry by entry, then
    /// chooses `Finish`. An entry not currently offered is skipped via the
    /// session's retry, moving on to the next entry.
    Scripted { script: Vec<Vec<ToolId>> },
    /// Picks the highest-weight offered tool (first listed on ties) for
    /// `tool_steps` steps, then `Finish`. Fully deterministic.
    WeightGreedy { tool_steps: usize },
    /// Like `weight_greedy`, but with probability `epsilon` picks a
    /// uniformly random offered tool instead.
    EpsilonGreedy { epsilon: f64, tool_steps: usize },
}

/// How the step-one start set is formed in `toolnet` mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StartMode {
    /// Every active tool, ranked by the graph's start row.
    #[default]
    AllActive,
    /// Top-k tools by tf-idf similarity between the scenario query and
    /// tool descriptions.
    TopK { k: usize },
}

/// Whether sessions are routed through the graph or shown everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    /// Graph-routed options, rendered scores, oracle updates after every
    /// session.
    Toolnet,
    /// Every active tool at every step, scoreless, no updates.
    FullList,
}

/// A post-run check; failures are reported, not errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioAssertion {
    /// The tool's final accumulated score must be at least `min`.
    FinalScoreAtLeast { tool: ToolId, min: i64 },
    /// The tool's final accumulated score must be at most `max`.
    FinalScoreAtMost { tool: ToolId, max: i64 },
    /// The winner's final mean inbound weight must strictly exceed the
    /// loser's.
    MeanInboundExceeds { winner: ToolId, loser: ToolId },
}

fn default_query() -> String {
    "complete the task".to_string()
}

fn default_max_steps() -> usize {
    crate::navigation::DEFAULT_MAX_STEPS
}

fn default_context_capacity() -> usize {
    crate::navigation::DEFAULT_CONTEXT_CAPACITY
}

/// A complete simulation scenario, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub tools: Vec<ToolSpec>,
    pub agent: AgentSpec,
    #[serde(default)]
    pub evaluator: OracleRubric,
    pub iterations: u64,
    #[serde(default)]
    pub seed: u64,
    pub mode: ScenarioMode,
    #[serde(default = "default_query")]
    pub query: String,
    #[serde(default)]
    pub start: StartMode,
    #[serde(default)]
    pub params: UpdateParams,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_context_capacity")]
    pub context_capacity: usize,
    #[serde(default)]
    pub weight_format: WeightFormat,
    #[serde(default)]
    pub assertions: Vec<ScenarioAssertion>,
}

impl ScenarioSpec {
    /// Parses a scenario from a JSON file. Validation happens when the
    /// scenario is run.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks spec-level consistency before running.
    pub fn validate(&self) -> Result<()> {
        if self.tools.is_empty() {
            return Err(ToolNetError::InvalidSpec(
                "scenario needs at least one tool".to_string(),
            ));
        }
        let mut seen: BTreeSet<&ToolId> = BTreeSet::new();
        for tool in &self.tools {
            if !seen.insert(&tool.id) {
                return Err(ToolNetError::InvalidSpec(format!(
                    "duplicate tool id {:?} in scenario",
                    tool.id.as_str()
                )));
            }
            if let ToolBehavior::CrashesAt { iteration } = tool.behavior {
                if iteration == 0 {
                    return Err(ToolNetError::InvalidSpec(format!(
                        "tool {:?} cannot crash at iteration 0; iterations start at 1",
                        tool.id.as_str()
                    )));
                }
            }
        }
        match &self.agent {
            AgentSpec::Scripted { script } => {
                if script.is_empty() {
                    return Err(ToolNetError::InvalidSpec(
                        "scripted agent needs at least one script line".to_string(),
                    ));
                }
            }
            AgentSpec::WeightGreedy { .. } => {}
            AgentSpec::EpsilonGreedy { epsilon, .. } => {
                if !(0.0..=1.0).contains(epsilon) || epsilon.is_nan() {
                    return Err(ToolNetError::InvalidSpec(format!(
                        "epsilon must lie in [0, 1], got {epsilon}"
                    )));
                }
            }
        }
        if let StartMode::TopK { k } = self.start {
            if k == 0 {
                return Err(ToolNetError::InvalidSpec(
                    "top-k start mode needs k of at least 1".to_string(),
                ));
            }
        }
        if self.context_capacity == 0 {
            return Err(ToolNetError::InvalidSpec(
                "context capacity must be at least 1".to_string(),
            ));
        }
        self.params.validate()?;
        for assertion in &self.assertions {
            let referenced: Vec<&ToolId> = match assertion {
                ScenarioAssertion::FinalScoreAtLeast { tool, .. }
                | ScenarioAssertion::FinalScoreAtMost { tool, .. } => vec![tool],
                ScenarioAssertion::MeanInboundExceeds { winner, loser } => {
                    vec![winner, loser]
                }
            };
            for tool in referenced {
                if !seen.contains(tool) {
                    return Err(ToolNetError::InvalidSpec(format!(
                        "assertion references unknown tool {:?}",
                        tool.as_str()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One tool's state after one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub accumulated_score: i64,
    pub mean_inbound_weight: f64,
}

/// Per-tool time series over a scenario run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTrace {
    /// One series per tool, indexed 0..iterations.
    pub series: BTreeMap<ToolId, Vec<TracePoint>>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ScoreTrace {
    /// Renders the trace as CSV with header
    /// `iteration,tool_id,accumulated_score,mean_inbound_weight`, rows
    /// sorted by iteration then tool id, weights in the library's
    /// 12-significant-digit decimal form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,tool_id,accumulated_score,mean_inbound_weight\n");
        let len = self.series.values().map(Vec::len).max().unwrap_or(0);
        for i in 0..len {
            for (tool, points) in &self.series {
                if let Some(p) = points.get(i) {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        p.iteration,
                        csv_field(tool.as_str()),
                        p.accumulated_score,
                        format_weight(p.mean_inbound_weight)
                    ));
                }
            }
        }
        out
    }
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    /// Per-tool score and inbound-weight series.
    pub trace: ScoreTrace,
    /// One result per iteration, in order.
    pub sessions: Vec<SessionResult>,
    /// The graph after the final iteration (untouched in full-list mode).
    pub graph: ToolGraph,
    /// Total accounted tokens across all sessions.
    pub total_tokens: u64,
}

struct ScenarioEnv {
    behaviors: BTreeMap<ToolId, ToolBehavior>,
    query: String,
    iteration: u64,
    rng: ChaCha8Rng,
}

impl Environment for ScenarioEnv {
    fn initial_observation(&mut self) -> String {
        self.query.clone()
    }

    fn execute(&mut self, tool: &ToolId, _arguments: &str) -> String {
        match self.behaviors.get(tool) {
            Some(ToolBehavior::AnswerRelevant) => {
                format!("Result: {tool} answered the request")
            }
            Some(ToolBehavior::NoisyNothingFound) => "Nothing Found".to_string(),
            Some(ToolBehavior::NoisyRandomNumber) => {
                format!("{}", self.rng.next_u64() % 1_000_000)
            }
            Some(ToolBehavior::CrashesAt { iteration }) => {
                if self.iteration >= *iteration {
                    "ERROR: tool unavailable".to_string()
                } else {
                    format!("Result: {tool} answered the request")
                }
            }
            None => "ERROR: tool unavailable".to_string(),
        }
    }
}

fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64) * (1.0 / ((1u64 << 53) as f64))
}

struct ScenarioPolicy {
    agent: AgentSpec,
    line: usize,
    cursor: usize,
    taken: usize,
    rng: ChaCha8Rng,
}

impl ScenarioPolicy {
    fn new(agent: &AgentSpec, seed: u64) -> Self {
        ScenarioPolicy {
            agent: agent.clone(),
            line: 0,
            cursor: 0,
            taken: 0,
            rng: ChaCha8Rng::seed_from_u64(seed ^ POLICY_SEED_SALT),
        }
    }

    fn begin_session(&mut self, iteration: u64) {
        self.cursor = 0;
        self.taken = 0;
        if let AgentSpec::Scripted { script } = &self.agent {
            self.line = ((iteration - 1) % script.len() as u64) as usize;
        }
    }

    fn pick_weighted(&mut self, options: &[ContextOption], tool_steps: usize, epsilon: f64) -> String {
        let finish = options.iter().position(|o| o.name == FINISH_NAME);
        let tools: Vec<usize> = options
            .iter()
            .enumerate()
            .filter(|(_, o)| o.name != FINISH_NAME)
            .map(|(i, _)| i)
            .collect();
        if self.taken >= tool_steps {
            if let Some(f) = finish {
                return options[f].name.clone();
            }
        }
        if tools.is_empty() {
            return options[finish.unwrap_or(0)].name.clone();
        }
        let pick = if epsilon > 0.0 && uniform_f64(&mut self.rng) < epsilon {
            tools[(self.rng.next_u64() % tools.len() as u64) as usize]
        } else {
            // First strict maximum wins, so ties keep presentation order.
            let mut best = tools[0];
            for &i in &tools[1..] {
                let w = options[i].weight.unwrap_or(f64::NEG_INFINITY);
                let best_w = options[best].weight.unwrap_or(f64::NEG_INFINITY);
                if w > best_w {
                    best = i;
                }
            }
            best
        };
        self.taken += 1;
        options[pick].name.clone()
    }
}

impl Policy for ScenarioPolicy {
    fn choose(
        &mut self,
        _context: &SessionContext,
        _observation: &str,
        _thought: &str,
        options: &[ContextOption],
    ) -> PolicyDecision {
        let name = match &self.agent {
            AgentSpec::Scripted { script } => {
                let line = &script[self.line];
                if self.cursor < line.len() {
                    let entry = line[self.cursor].to_string();
                    self.cursor += 1;
                    entry
                } else {
                    FINISH_NAME.to_string()
                }
            }
            AgentSpec::WeightGreedy { tool_steps } => {
                let steps = *tool_steps;
                self.pick_weighted(options, steps, 0.0)
            }
            AgentSpec::EpsilonGreedy { epsilon, tool_steps } => {
                let (e, steps) = (*epsilon, *tool_steps);
                self.pick_weighted(options, steps, e)
            }
        };
        PolicyDecision {
            name,
            arguments: String::new(),
        }
    }
}

/// Oracle rubric for one iteration: crashed tools have their base score
/// forced to -2 once their crash iteration is reached.
fn rubric_for_iteration(spec: &ScenarioSpec, iteration: u64) -> OracleRubric {
    let mut rubric = spec.evaluator.clone();
    for tool in &spec.tools {
        if let ToolBehavior::CrashesAt { iteration: crash } = tool.behavior {
            if iteration >= crash {
                rubric.base_scores.insert(tool.id.clone(), -2);
            }
        }
    }
    rubric
}

/// Runs a scenario from a fresh uniform graph over its tools.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioOutcome> {
    spec.validate()?;
    let defs: Vec<ToolDef> = spec.tools.iter().map(ToolSpec::to_def).collect();
    let graph = ToolGraph::new(&defs, spec.params)?;
    run_prepared(spec, graph)
}

/// Runs a scenario starting from an existing graph (typically built from a
/// trajectory corpus). The graph must cover exactly the scenario's tools;
/// its stored update parameters govern the updates.
pub fn run_scenario_with_prior(spec: &ScenarioSpec, prior: &ToolGraph) -> Result<ScenarioOutcome> {
    spec.validate()?;
    let spec_ids: BTreeSet<&ToolId> = spec.tools.iter().map(|t| &t.id).collect();
    let graph_ids: BTreeSet<&ToolId> = prior.tools().map(|(id, _)| id).collect();
    if spec_ids != graph_ids {
        return Err(ToolNetError::InvalidSpec(
            "prior graph covers a different tool set than the scenario".to_string(),
        ));
    }
    run_prepared(spec, prior.clone())
}

fn run_prepared(spec: &ScenarioSpec, mut graph: ToolGraph) -> Result<ScenarioOutcome> {
    let ids: Vec<ToolId> = graph.tools().map(|(id, _)| id.clone()).collect();
    let behaviors: BTreeMap<ToolId, ToolBehavior> = spec
        .tools
        .iter()
        .map(|t| (t.id.clone(), t.behavior.clone()))
        .collect();
    let do_updates = spec.mode == ScenarioMode::Toolnet;
    let weight_format = match spec.mode {
        ScenarioMode::Toolnet => spec.weight_format,
        ScenarioMode::FullList => WeightFormat::None,
    };
    let embedder: Option<TfIdfEmbedder> =
        if spec.mode == ScenarioMode::Toolnet && matches!(spec.start, StartMode::TopK { .. }) {
            let descriptions: Vec<String> =
                spec.tools.iter().map(|t| t.description.clone()).collect();
            Some(tfidf_embed(&descriptions)?)
        } else {
            None
        };

    let mut env = ScenarioEnv {
        behaviors,
        query: spec.query.clone(),
        iteration: 0,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };
    let mut policy = ScenarioPolicy::new(&spec.agent, spec.seed);
    let mut trace = ScoreTrace {
        series: ids.iter().map(|id| (id.clone(), Vec::new())).collect(),
    };
    let mut sessions: Vec<SessionResult> = Vec::new();
    let mut total_tokens: u64 = 0;

    for iteration in 1..=spec.iterations {
        env.iteration = iteration;
        policy.begin_session(iteration);
        let start = match (spec.mode, &spec.start) {
            (ScenarioMode::FullList, _) | (_, StartMode::AllActive) => {
                StartSet::all_active(&graph)?
            }
            (ScenarioMode::Toolnet, StartMode::TopK { k }) => {
                select_start_set(&graph, embedder.as_ref().unwrap(), &spec.query, *k)?
            }
        };
        let config = SessionConfig {
            max_steps: spec.max_steps,
            context_capacity: spec.context_capacity,
            weight_format,
            task_id: format!("iter-{iteration:04}"),
        };
        let result = run_session(&graph, &start, &mut env, &mut policy, &config)?;
        total_tokens += result.tokens_used;
        if do_updates {
            let rubric = rubric_for_iteration(spec, iteration);
            let report = evaluate_trajectory_oracle(&result.trajectory, &rubric);
            apply_evaluation(&mut graph, &report)?;
        }
        for id in &ids {
            trace.series.get_mut(id).unwrap().push(TracePoint {
                iteration,
                accumulated_score: graph.accumulated_score(id)?,
                mean_inbound_weight: graph.mean_inbound_weight(id)?,
            });
        }
        sessions.push(result);
    }

    Ok(ScenarioOutcome {
        trace,
        sessions,
        graph,
        total_tokens,
    })
}

/// Checks a run against the spec's assertions, returning one message per
/// failure (empty means all passed).
pub fn evaluate_assertions(spec: &ScenarioSpec, outcome: &ScenarioOutcome) -> Vec<String> {
    let mut failures = Vec::new();
    for assertion in &spec.assertions {
        match assertion {
            ScenarioAssertion::FinalScoreAtLeast { tool, min } => {
                let score = outcome.graph.accumulated_score(tool).unwrap_or(0);
                if score < *min {
                    failures.push(format!(
                        "final score of {tool} is {score}, expected at least {min}"
                    ));
                }
            }
            ScenarioAssertion::FinalScoreAtMost { tool, max } => {
                let score = outcome.graph.accumulated_score(tool).unwrap_or(0);
                if score > *max {
                    failures.push(format!(
                        "final score of {tool} is {score}, expected at most {max}"
                    ));
                }
            }
            ScenarioAssertion::MeanInboundExceeds { winner, loser } => {
                let w = outcome.graph.mean_inbound_weight(winner).unwrap_or(0.0);
                let l = outcome.graph.mean_inbound_weight(loser).unwrap_or(0.0);
                if w <= l {
                    failures.push(format!(
                        "mean inbound weight of {winner} ({}) does not exceed {loser} ({})",
                        format_weight(w),
                        format_weight(l)
                    ));
                }
            }
        }
    }
    failures
}

/// One tool in a sparsity report's most-connected list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopTool {
    pub id: ToolId,
    pub successor_count: usize,
}

/// Connectivity statistics of a trajectory corpus.
///
/// Histogram keys are `"1"` through `"5"` plus `">5"`, values are
/// proportions summing to one. The successor histogram is over tools with
/// at least one distinct successor; the call histogram is over every tool
/// that appears, counting total step occurrences. An empty histogram (no
/// qualifying tools) keeps its map empty and raises the matching flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub successor_count_histogram: BTreeMap<String, f64>,
    pub call_count_histogram: BTreeMap<String, f64>,
    pub top_tools: Vec<TopTool>,
    pub successor_histogram_empty: bool,
    pub call_histogram_empty: bool,
}

fn histogram(values: &[u64]) -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    if values.is_empty() {
        return map;
    }
    for key in ["1", "2", "3", "4", "5", ">5"] {
        map.insert(key.to_string(), 0.0);
    }
    for &v in values {
        let key = if v <= 5 { v.to_string() } else { ">5".to_string() };
        *map.get_mut(&key).unwrap() += 1.0;
    }
    let denom = values.len() as f64;
    for share in map.values_mut() {
        *share /= denom;
    }
    map
}

/// Measures how sparse a corpus's transition structure is: how many
/// distinct successors each tool has, how often each tool is called, and
/// which tools branch the most.
pub fn analyze_corpus(corpus: &[Trajectory]) -> Result<SparsityReport> {
    if corpus.is_empty() {
        return Err(ToolNetError::EmptyCorpus);
    }
    let mut successors: BTreeMap<ToolId, BTreeSet<ToolId>> = BTreeMap::new();
    let mut calls: BTreeMap<ToolId, u64> = BTreeMap::new();
    for trajectory in corpus {
        trajectory.validate()?;
        for step in &trajectory.steps {
            *calls.entry(step.tool.clone()).or_default() += 1;
        }
        for pair in trajectory.steps.windows(2) {
            successors
                .entry(pair[0].tool.clone())
                .or_default()
                .insert(pair[1].tool.clone());
        }
    }
    let successor_counts: Vec<u64> = successors.values().map(|s| s.len() as u64).collect();
    let call_counts: Vec<u64> = calls.values().copied().collect();
    let mut top_tools: Vec<TopTool> = successors
        .iter()
        .map(|(id, s)| TopTool {
            id: id.clone(),
            successor_count: s.len(),
        })
        .collect();
    top_tools.sort_by(|a, b| {
        b.successor_count
            .cmp(&a.successor_count)
            .then_with(|| a.id.cmp(&b.id))
    });
    top_tools.truncate(TOP_TOOLS_LIMIT);
    Ok(SparsityReport {
        successor_histogram_empty: successor_counts.is_empty(),
        call_histogram_empty: call_counts.is_empty(),
        successor_count_histogram: histogram(&successor_counts),
        call_count_histogram: histogram(&call_counts),
        top_tools,
    })
}

/// Token totals of a graph-routed run against its full-list twin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenComparison {
    pub toolnet_tokens: u64,
    pub full_list_tokens: u64,
    /// `toolnet_tokens / full_list_tokens`, or `None` when the baseline
    /// used zero tokens.
    pub ratio: Option<f64>,
}

/// Runs two scenarios that must be identical apart from `mode` — one
/// `toolnet`, one `full_list` — and compares their token totals. The
/// optional prior graph seeds the graph-routed run only.
pub fn compare_token_usage(
    a: &ScenarioSpec,
    b: &ScenarioSpec,
    prior: Option<&ToolGraph>,
) -> Result<TokenComparison> {
    let (routed, full) = match (a.mode, b.mode) {
        (ScenarioMode::Toolnet, ScenarioMode::FullList) => (a, b),
        (ScenarioMode::FullList, ScenarioMode::Toolnet) => (b, a),
        _ => {
            return Err(ToolNetError::SpecMismatch(
                "token comparison needs one toolnet and one full_list scenario".to_string(),
            ))
        }
    };
    let mut normalized = routed.clone();
    normalized.mode = ScenarioMode::FullList;
    if &normalized != full {
        return Err(ToolNetError::SpecMismatch(
            "scenarios must be identical apart from mode".to_string(),
        ));
    }
    let routed_outcome = match prior {
        Some(graph) => run_scenario_with_prior(routed, graph)?,
        None => run_scenario(routed)?,
    };
    let full_outcome = run_scenario(full)?;
    let toolnet_tokens = routed_outcome.total_tokens;
    let full_list_tokens = full_outcome.total_tokens;
    let ratio = if full_list_tokens == 0 {
        None
    } else {
        Some(toolnet_tokens as f64 / full_list_tokens as f64)
    };
    Ok(TokenComparison {
        toolnet_tokens,
        full_list_tokens,
        ratio,
    })
}
