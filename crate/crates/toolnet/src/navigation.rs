//! Graph-constrained session execution.
//!
//! A session walks the tool graph one step at a time. At step one the
//! options are the start set's tools; afterwards they are exactly the
//! positive-weight successors of the previously used tool, which is how the
//! graph constrains an agent to transitions it has evidence for. The
//! terminal `"end"` node is always presented as the pseudo-tool `Finish`;
//! choosing it ends the session successfully. `Finish` is rendered without
//! a score (its weight is structural, not a recommendation), and a real
//! tool named `"Finish"` would be indistinguishable from it, so avoid that
//! id in registries.
//!
//! Each decision is made by a [`Policy`] from a rendered text prompt, and
//! the cost bookkeeping mirrors what a hosted language model would be
//! billed for: every policy call accrues `count_tokens(prompt) +
//! count_tokens(thought) + count_tokens(action)`, where a token is a
//! whitespace-separated word. A policy that picks an option outside the
//! offered list is retried once with the same prompt and thought (the
//! retry accrues prompt and action tokens again); a second violation
//! aborts the session as a failure. Exhausting `max_steps` without
//! choosing `Finish` records the session as given up.

use serde::{Deserialize, Serialize};

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::construction::{Outcome, Step, Trajectory};
use crate::error::{Result, ToolNetError};
use crate::graph::{NodeRef, ToolGraph, ToolId};
use crate::retrieval::StartSet;

/// Name under which the terminal node is offered to policies.
pub const FINISH_NAME: &str = "Finish";
/// Description rendered for the terminal option.
pub const FINISH_DESCRIPTION: &str = "finish the task and end the session";

/// Default step budget for a session.
pub const DEFAULT_MAX_STEPS: usize = 8;
/// Default number of past steps kept in the rolling prompt context.
pub const DEFAULT_CONTEXT_CAPACITY: usize = 8;

/// Counts whitespace-separated words; the deterministic stand-in for a
/// model tokenizer used by all cost accounting.
pub fn count_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// How edge weights are shown to the policy.
///
/// Weights live in `[0, 1]`; rendering goes through the percentage
/// `p = 100 * w`. For `w = 0.75` the variants produce: `none` omits the
/// score clause, `div100` shows `0.75`, `div10` shows `7.5`, `integer`
/// shows `75`, and `times10` shows `750`. Integer renderings round halves
/// away from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFormat {
    /// Omit scores entirely.
    None,
    /// `p / 100` with two decimals.
    Div100,
    /// `p / 10` with one decimal.
    Div10,
    /// `round(p)`.
    Integer,
    /// `round(10 * p)`.
    #[default]
    Times10,
}

impl WeightFormat {
    /// All variants, for exhaustive tests and CLI help.
    pub const ALL: [WeightFormat; 5] = [
        WeightFormat::None,
        WeightFormat::Div100,
        WeightFormat::Div10,
        WeightFormat::Integer,
        WeightFormat::Times10,
    ];

    /// Renders a weight, or `None` when scores are suppressed.
    pub fn render_weight(self, weight: f64) -> Option<String> {
        let p = 100.0 * weight;
        match self {
            WeightFormat::None => None,
            WeightFormat::Div100 => Some(format!("{:.2}", p / 100.0)),
            WeightFormat::Div10 => Some(format!("{:.1}", p / 10.0)),
            WeightFormat::Integer => Some(format!("{}", p.round() as i64)),
            WeightFormat::Times10 => Some(format!("{}", (10.0 * p).round() as i64)),
        }
    }
}

impl fmt::Display for WeightFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            WeightFormat::None => "none",
            WeightFormat::Div100 => "div100",
            WeightFormat::Div10 => "div10",
            WeightFormat::Integer => "integer",
            WeightFormat::Times10 => "times10",
        };
        f.write_str(name)
    }
}

impl FromStr for WeightFormat {
    type Err = ToolNetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(WeightFormat::None),
            "div100" => Ok(WeightFormat::Div100),
            "div10" => Ok(WeightFormat::Div10),
            "integer" => Ok(WeightFormat::Integer),
            "times10" => Ok(WeightFormat::Times10),
            other => Err(ToolNetError::InvalidConfig(format!(
                "unknown weight format {other:?}; expected one of none, div100, div10, integer, times10"
            ))),
        }
    }
}

/// One selectable option in a rendered tool menu.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextOption {
    /// Name the policy must echo to select this option.
    pub name: String,
    /// Human-readable description shown after the name.
    pub description: String,
    /// Ranking weight; `None` renders scorelessly (e.g. `Finish`).
    pub weight: Option<f64>,
}

/// Renders an option menu in presentation order.
///
/// Scored formats emit `<rank>. <name> (score: <rendered>) — <description>`
/// under a header that explains higher is better; the `none` format drops
/// the score clause and any mention of scores. Option order is never
/// changed by rendering.
pub fn format_tool_context(options: &[ContextOption], format: WeightFormat) -> String {
    let header = if format == WeightFormat::None {
        "Choose one of the following tools:"
    } else {
        "Choose one of the following tools. Higher scores indicate stronger recommendations:"
    };
    let mut out = String::from(header);
    for (i, option) in options.iter().enumerate() {
        let rank = i + 1;
        out.push('\n');
        match option.weight.and_then(|w| format.render_weight(w)) {
            Some(score) => out.push_str(&format!(
                "{rank}. {} (score: {score}) — {}",
                option.name, option.description
            )),
            None => out.push_str(&format!("{rank}. {} — {}", option.name, option.description)),
        }
    }
    out
}

/// One completed step as remembered in the rolling prompt context.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextEntry {
    /// Observation the step reacted to.
    pub observation: String,
    /// Policy's free-text reasoning for the step.
    pub thought: String,
    /// Rendered action, `name(arguments)`.
    pub action: String,
}

/// Bounded FIFO of recent steps included in every prompt. When full, the
/// oldest entry is evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionContext {
    entries: VecDeque<ContextEntry>,
    capacity: usize,
}

impl SessionContext {
    /// Creates an empty context holding at most `capacity` entries.
    pub fn new(capacity: usize) -> Self {
        SessionContext {
            entries: VecDeque::new(),
            capacity,
        }
    }

    /// Appends an entry, evicting the oldest when at capacity.
    pub fn push(&mut self, entry: ContextEntry) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    /// Entries oldest-first.
    pub fn entries(&self) -> impl Iterator<Item = &ContextEntry> {
        self.entries.iter()
    }

    /// Number of retained entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when nothing is retained.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Maximum number of retained entries.
    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// A policy's selected action.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    /// Option name; must match one of the offered options.
    pub name: String,
    /// Free-form arguments passed to the environment.
    pub arguments: String,
}

/// Decision maker for a session; a scripted or heuristic stand-in for a
/// language model.
pub trait Policy {
    /// Produces the step's free-text reasoning. Defaults to empty.
    fn think(&mut self, context: &SessionContext, observation: &str) -> String {
        let _ = (context, observation);
        String::new()
    }

    /// Picks one of `options`. Returning a name outside the list triggers
    /// one retry and then aborts the session.
    fn choose(
        &mut self,
        context: &SessionContext,
        observation: &str,
        thought: &str,
        options: &[ContextOption],
    ) -> PolicyDecision;
}

/// Task world the session acts on. Tool faults must be reported as
/// observation text (e.g. `"ERROR: tool unavailable"`), never by
/// aborting the session.
pub trait Environment {
    /// The task statement; becomes the first observation and the
    /// trajectory's query.
    fn initial_observation(&mut self) -> String;

    /// Runs a tool and returns its observation.
    fn execute(&mut self, tool: &ToolId, arguments: &str) -> String;
}

/// Knobs for one session run.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// Maximum number of decisions (including choosing `Finish`).
    pub max_steps: usize,
    /// Rolling prompt context capacity in steps.
    pub context_capacity: usize,
    /// How option weights are rendered in prompts.
    pub weight_format: WeightFormat,
    /// Task id recorded on the resulting trajectory.
    pub task_id: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            max_steps: DEFAULT_MAX_STEPS,
            context_capacity: DEFAULT_CONTEXT_CAPACITY,
            weight_format: WeightFormat::default(),
            task_id: "session".to_string(),
        }
    }
}

/// Outcome of [`run_session`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    /// The recorded trajectory (tool steps only; `Finish` is not a step).
    pub trajectory: Trajectory,
    /// True when the policy chose `Finish` within the step budget.
    pub finished: bool,
    /// Decisions made, counting the `Finish` decision and any aborted one.
    pub steps_used: usize,
    /// Total accounted tokens across all policy calls and retries.
    pub tokens_used: u64,
}

fn action_text(decision: &PolicyDecision) -> String {
    format!("{}({})", decision.name, decision.arguments)
}

fn render_prompt(context: &SessionContext, observation: &str, menu: &str) -> String {
    let mut prompt = String::new();
    for entry in context.entries() {
        prompt.push_str(&format!(
            "Observation: {}\nThought: {}\nAction: {}\n",
            entry.observation, entry.thought, entry.action
        ));
    }
    prompt.push_str(&format!("Observation: {observation}\n"));
    prompt.push_str(menu);
    prompt
}

fn start_options(graph: &ToolGraph, start: &StartSet) -> Vec<ContextOption> {
    let mut options: Vec<ContextOption> = start
        .ranked
        .iter()
        .map(|(id, value)| ContextOption {
            name: id.to_string(),
            description: graph
                .node(id)
                .map(|n| n.description.clone())
                .unwrap_or_default(),
            weight: Some(*value),
        })
        .collect();
    options.push(ContextOption {
        name: FINISH_NAME.to_string(),
        description: FINISH_DESCRIPTION.to_string(),
        weight: None,
    });
    options
}

/// The menu a session would see after `from`: the node's positive-weight
/// successors in ranked order, with the end node presented as `Finish`
/// (scoreless) in its sorted position.
pub fn menu_options(graph: &ToolGraph, from: &NodeRef) -> Result<Vec<ContextOption>> {
    let successors = graph.successors(from)?;
    Ok(successors
        .into_iter()
        .map(|(node, weight)| match node {
            NodeRef::End => ContextOption {
                name: FINISH_NAME.to_string(),
                description: FINISH_DESCRIPTION.to_string(),
                weight: None,
            },
            other => ContextOption {
                name: other.name().to_string(),
                description: match &other {
                    NodeRef::Tool(id) => graph
                        .node(id)
                        .map(|n| n.description.clone())
                        .unwrap_or_default(),
                    _ => String::new(),
                },
                weight: Some(weight),
            },
        })
        .collect())
}

/// Runs one graph-constrained session and returns its trajectory plus
/// bookkeeping. See the module docs for the step, retry, and token rules.
pub fn run_session(
    graph: &ToolGraph,
    start: &StartSet,
    env: &mut dyn Environment,
    policy: &mut dyn Policy,
    config: &SessionConfig,
) -> Result<SessionResult> {
    if start.is_empty() {
        return Err(ToolNetError::EmptyStartSet);
    }
    if config.context_capacity == 0 {
        return Err(ToolNetError::InvalidConfig(
            "context capacity must be at least 1".to_string(),
        ));
    }

    let mut context = SessionContext::new(config.context_capacity);
    let mut observation = env.initial_observation();
    let query = observation.clone();
    let mut steps: Vec<Step> = Vec::new();
    let mut tokens_used: u64 = 0;
    let mut steps_used: usize = 0;
    let mut finished = false;
    let mut outcome = Outcome::GaveUp;
    let mut previous: Option<ToolId> = None;

    for _ in 0..config.max_steps {
        let options = match &previous {
            None => start_options(graph, start),
            Some(prev) => menu_options(graph, &NodeRef::tool(prev))?,
        };
        if options.is_empty() {
            // Dead end: nothing reachable, not even Finish.
            break;
        }
        steps_used += 1;

        let menu = format_tool_context(&options, config.weight_format);
        let prompt = render_prompt(&context, &observation, &menu);
        let prompt_tokens = count_tokens(&prompt);
        let thought = policy.think(&context, &observation);
        tokens_used += prompt_tokens + count_tokens(&thought);

        let mut decision = policy.choose(&context, &observation, &thought, &options);
        tokens_used += count_tokens(&action_text(&decision));
        if !options.iter().any(|o| o.name == decision.name) {
            decision = policy.choose(&context, &observation, &thought, &options);
            tokens_used += prompt_tokens + count_tokens(&action_text(&decision));
            if !options.iter().any(|o| o.name == decision.name) {
                outcome = Outcome::Failure;
                finished = false;
                let trajectory = Trajectory {
                    task_id: config.task_id.clone(),
                    query,
                    outcome,
                    steps,
                };
                return Ok(SessionResult {
                    trajectory,
                    finished,
                    steps_used,
                    tokens_used,
                });
            }
        }

        if decision.name == FINISH_NAME {
            finished = true;
            outcome = Outcome::Success;
            break;
        }

        let tool = ToolId::new(decision.name.clone())?;
        let next_observation = env.execute(&tool, &decision.arguments);
        steps.push(Step {
            tool: tool.clone(),
            thought: thought.clone(),
            arguments: decision.arguments.clone(),
            observation: next_observation.clone(),
        });
        context.push(ContextEntry {
            observation,
            thought,
            action: action_text(&decision),
        });
        previous = Some(tool);
        observation = next_observation;
    }

    let trajectory = Trajectory {
        task_id: config.task_id.clone(),
        query,
        outcome,
        steps,
    };
    Ok(SessionResult {
        trajectory,
        finished,
        steps_used,
        tokens_used,
    })
}
