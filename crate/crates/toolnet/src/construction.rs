//! Graph construction from trajectory corpora and feedback-driven updates.
//!
//! Two construction paths produce or revise a [`ToolGraph`]:
//!
//! **Static construction** counts tool 2-grams over a trajectory corpus. Each
//! trajectory contributes its tool sequence with the terminal symbol `"end"`
//! appended (appended during counting only, never stored), so consecutive
//! repeats become self-transition counts. The edge weight is the conditional
//! frequency `count(i, j) / count(i)`. Tools never observed as a source get
//! the same uniform out-row a non-informative graph would give them, while
//! observed sources keep zero-weight structural edges (self-transition and
//! `"end"`) that stay invisible to successor listings and to later updates.
//!
//! **Feedback updates** ([`apply_evaluation`]) accumulate integer evaluator
//! scores per tool without bound, then recompute every non-virtual row as
//!
//! ```text
//! w(i, j) = beta * w0(i, j) + (1 - beta) * f(s_j) / sum_k f(s_k)
//! ```
//!
//! where `w0` is the *original* prior (not the previous weight, so the update
//! is a pure function of the prior and the current accumulated scores), the
//! sum runs over the out-neighborhood of `i` (edges with positive prior), the
//! virtual `"end"` node scores 0, and `f` maps scores to positive mass:
//! `f(x) = alpha * x + 1` for `x >= 0`, `e^(alpha * x)` otherwise. The
//! normalization reads the score of the *destination* node; edges out of the
//! same row share the denominator, so rows stay stochastic. `"start"` rows
//! are never updated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ToolNetError};
use crate::graph::{EdgeWeights, NodeRef, ToolDef, ToolGraph, ToolId, ToolNode, UpdateParams};

/// Smallest admissible evaluator score.
pub const SCORE_MIN: i64 = -3;

/// Largest admissible evaluator score.
pub const SCORE_MAX: i64 = 3;

/// How a recorded session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The agent submitted an answer.
    Success,
    /// The session aborted (e.g. the policy refused every offered option).
    Failure,
    /// The agent ran out of steps without finishing.
    GaveUp,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
            Outcome::GaveUp => "gave_up",
        };
        f.write_str(s)
    }
}

/// One tool invocation inside a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Tool that was called.
    pub tool: ToolId,
    /// Free-text reasoning preceding the call.
    pub thought: String,
    /// Free-text arguments passed to the tool.
    pub arguments: String,
    /// Observation returned by the tool (the next step's input).
    pub observation: String,
}

/// A recorded session: the unit of static construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Caller-chosen identifier, echoed into evaluator reports.
    pub task_id: String,
    /// The task text the session started from.
    pub query: String,
    /// How the session ended.
    pub outcome: Outcome,
    /// Ordered tool invocations; stored trajectories must have at least one.
    pub steps: Vec<Step>,
}

impl Trajectory {
    /// Checks the structural rules for stored trajectories.
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(ToolNetError::InvalidTrajectory(self.task_id.clone()));
        }
        Ok(())
    }
}

/// Score assigned to one tool by an evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolScore {
    /// Tool being scored.
    #[serde(rename = "tool_name")]
    pub tool: ToolId,
    /// Integer score in `[SCORE_MIN, SCORE_MAX]`.
    pub score: i64,
    /// Free-text justification.
    pub reason: String,
}

/// Per-trajectory evaluation: at most one score per tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorReport {
    /// Identifier of the trajectory this report judges.
    pub trajectory_id: String,
    /// Scores for (a subset of) the tools the trajectory used.
    #[serde(rename = "scores_of_tools")]
    pub scores: Vec<ToolScore>,
}

impl EvaluatorReport {
    /// Reads a report from a JSON file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Deterministic stand-in for an LLM evaluator: a base score per tool plus
/// an outcome-dependent modifier, clamped to the admissible score range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRubric {
    /// Base score per tool; tools absent here score 0.
    #[serde(default)]
    pub base_scores: BTreeMap<ToolId, i64>,
    /// Added to every base score when the trajectory succeeded.
    #[serde(default)]
    pub success_modifier: i64,
    /// Added when the trajectory aborted.
    #[serde(default)]
    pub failure_modifier: i64,
    /// Added when the trajectory ran out of steps.
    #[serde(default)]
    pub gave_up_modifier: i64,
}

impl Default for OracleRubric {
    fn default() -> Self {
        OracleRubric {
            base_scores: BTreeMap::new(),
            success_modifier: 0,
            failure_modifier: 0,
            gave_up_modifier: 0,
        }
    }
}

/// Maps an accumulated score to positive edge mass: `alpha * x + 1` for
/// `x >= 0`, `e^(alpha * x)` for `x < 0`. Strictly increasing and always
/// positive (results that would underflow to zero are floored at the
/// smallest positive double so downstream normalization never divides by 0).
pub fn f_map(score: i64, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || !(alpha > 0.0) {
        return Err(ToolNetError::NonPositiveAlpha(alpha));
    }
    Ok(f_map_unchecked(score, alpha))
}

fn f_map_unchecked(score: i64, alpha: f64) -> f64 {
    let x = score as f64;
    if score >= 0 {
        alpha * x + 1.0
    } else {
        let v = (alpha * x).exp();
        if v == 0.0 {
            f64::MIN_POSITIVE
        } else {
            v
        }
    }
}

/// Builds a graph from observed tool 2-gram frequencies.
///
/// With `success_only` set (the conventional choice), only trajectories with
/// [`Outcome::Success`] contribute counts. Every tool in `tools` becomes a
/// node whether or not the corpus mentions it; sources without observations
/// receive uniform out-rows.
pub fn static_construct(
    tools: &[ToolDef],
    corpus: &[Trajectory],
    success_only: bool,
    params: UpdateParams,
) -> Result<ToolGraph> {
    params.validate()?;
    if tools.is_empty() {
        return Err(ToolNetError::EmptyToolSet);
    }
    let mut nodes: BTreeMap<ToolId, ToolNode> = BTreeMap::new();
    for t in tools {
        let previous = nodes.insert(
            t.id.clone(),
            ToolNode {
                description: t.description.clone(),
                category: t.category.clone(),
                accumulated_score: 0,
                active: true,
            },
        );
        if previous.is_some() {
            return Err(ToolNetError::DuplicateToolId(t.id.clone()));
        }
    }

    let selected: Vec<&Trajectory> = corpus
        .iter()
        .filter(|t| !success_only || t.outcome == Outcome::Success)
        .collect();
    if selected.is_empty() {
        return Err(ToolNetError::EmptyCorpus);
    }

    // Count 2-grams with "end" appended to each tool sequence.
    let mut source_counts: BTreeMap<ToolId, u64> = BTreeMap::new();
    let mut pair_counts: BTreeMap<ToolId, BTreeMap<NodeRef, u64>> = BTreeMap::new();
    for trajectory in &selected {
        trajectory.validate()?;
        for step in &trajectory.steps {
            if !nodes.contains_key(&step.tool) {
                return Err(ToolNetError::UnknownToolInCorpus {
                    trajectory: trajectory.task_id.clone(),
                    tool: step.tool.clone(),
                });
            }
        }
        for window in trajectory.steps.windows(2) {
            let from = &window[0].tool;
            let to = NodeRef::tool(&window[1].tool);
            *source_counts.entry(from.clone()).or_default() += 1;
            *pair_counts
                .entry(from.clone())
                .or_default()
                .entry(to)
                .or_default() += 1;
        }
        let last = &trajectory.steps[trajectory.steps.len() - 1].tool;
        *source_counts.entry(last.clone()).or_default() += 1;
        *pair_counts
            .entry(last.clone())
            .or_default()
            .entry(NodeRef::End)
            .or_default() += 1;
    }

    let n = nodes.len();
    let uniform = 1.0 / (n as f64 + 1.0);
    let start_weight = 1.0 / n as f64;
    let mut rows: BTreeMap<NodeRef, BTreeMap<NodeRef, EdgeWeights>> = BTreeMap::new();

    let mut start_row = BTreeMap::new();
    for id in nodes.keys() {
        start_row.insert(NodeRef::tool(id), fixed_edge(start_weight));
    }
    rows.insert(NodeRef::Start, start_row);

    for id in nodes.keys() {
        let mut row: BTreeMap<NodeRef, EdgeWeights> = BTreeMap::new();
        match source_counts.get(id) {
            Some(&total) => {
                let denom = total as f64;
                for (to, &count) in &pair_counts[id] {
                    row.insert(to.clone(), fixed_edge(count as f64 / denom));
                }
                // Structural edges exist even when unobserved; zero weight
                // keeps them out of successor listings and later updates.
                row.entry(NodeRef::tool(id)).or_insert_with(|| fixed_edge(0.0));
                row.entry(NodeRef::End).or_insert_with(|| fixed_edge(0.0));
            }
            None => {
                for to in nodes.keys() {
                    row.insert(NodeRef::tool(to), fixed_edge(uniform));
                }
                row.insert(NodeRef::End, fixed_edge(uniform));
            }
        }
        rows.insert(NodeRef::tool(id), row);
    }

    Ok(ToolGraph::from_parts(params, 0, nodes, rows))
}

fn fixed_edge(w: f64) -> EdgeWeights {
    EdgeWeights {
        prior: w,
        current: w,
    }
}

/// Applies one evaluator report: validates it, accumulates the scores,
/// advances the iteration counter, and recomputes every tool row from the
/// priors and the new accumulated scores (see the module docs for the rule).
///
/// Validation is atomic: an invalid report leaves the graph untouched.
pub fn apply_evaluation(graph: &mut ToolGraph, report: &EvaluatorReport) -> Result<()> {
    let mut seen: BTreeSet<&ToolId> = BTreeSet::new();
    for entry in &report.scores {
        if graph.node(&entry.tool).is_none() {
            return Err(ToolNetError::UnknownToolInReport(entry.tool.clone()));
        }
        if entry.score < SCORE_MIN || entry.score > SCORE_MAX {
            return Err(ToolNetError::ScoreOutOfRange {
                tool: entry.tool.clone(),
                score: entry.score,
            });
        }
        if !seen.insert(&entry.tool) {
            return Err(ToolNetError::DuplicateToolInReport(entry.tool.clone()));
        }
    }
    for entry in &report.scores {
        graph.add_score(&entry.tool, entry.score);
    }
    graph.bump_iteration();
    recompute_rows(graph);
    Ok(())
}

/// Recomputes `current` on every tool row from priors and accumulated
/// scores. `"start"` rows are left untouched; `"end"` has no row.
fn recompute_rows(graph: &mut ToolGraph) {
    let params = graph.params();
    let mut mass: BTreeMap<NodeRef, f64> = BTreeMap::new();
    for (id, node) in graph.tools() {
        mass.insert(
            NodeRef::tool(id),
            f_map_unchecked(node.accumulated_score, params.alpha),
        );
    }
    mass.insert(NodeRef::End, 1.0); // f(0): the virtual terminal scores 0

    for (from, row) in graph.rows_mut() {
        if *from == NodeRef::Start {
            continue;
        }
        let denom: f64 = row
            .iter()
            .filter(|(_, w)| w.prior > 0.0)
            .map(|(to, _)| mass[to])
            .sum();
        for (to, w) in row.iter_mut() {
            if w.prior > 0.0 {
                let share = mass[to] / denom;
                w.current = params.beta * w.prior + (1.0 - params.beta) * share;
            }
        }
    }
}

/// Scores every distinct tool in a trajectory with the rubric's base score
/// plus the outcome modifier, clamped to `[SCORE_MIN, SCORE_MAX]`. Tools the
/// rubric does not know score 0. Entries are ordered by tool id.
pub fn evaluate_trajectory_oracle(trajectory: &Trajectory, rubric: &OracleRubric) -> EvaluatorReport {
    let modifier = match trajectory.outcome {
        Outcome::Success => rubric.success_modifier,
        Outcome::Failure => rubric.failure_modifier,
        Outcome::GaveUp => rubric.gave_up_modifier,
    };
    let distinct: BTreeSet<&ToolId> = trajectory.steps.iter().map(|s| &s.tool).collect();
    let scores = distinct
        .into_iter()
        .map(|tool| match rubric.base_scores.get(tool) {
            Some(&base) => ToolScore {
                tool: tool.clone(),
                score: (base + modifier).clamp(SCORE_MIN, SCORE_MAX),
                reason: format!(
                    "base {base}, outcome {} modifier {modifier}",
                    trajectory.outcome
                ),
            },
            None => ToolScore {
                tool: tool.clone(),
                score: 0,
                reason: "not in rubric".to_string(),
            },
        })
        .collect();
    EvaluatorReport {
        trajectory_id: trajectory.task_id.clone(),
        scores,
    }
}

/// Parses trajectories from JSON-lines text; blank lines are skipped and
/// every parsed trajectory is validated.
pub fn read_trajectories(reader: impl BufRead) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trajectory: Trajectory = serde_json::from_str(&line)?;
        trajectory.validate()?;
        out.push(trajectory);
    }
    Ok(out)
}

/// Writes trajectories as one JSON object per line.
pub fn write_trajectories(mut writer: impl Write, corpus: &[Trajectory]) -> Result<()> {
    for trajectory in corpus {
        let line = serde_json::to_string(trajectory)?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a JSON-lines corpus file.
pub fn load_trajectories(path: impl AsRef<Path>) -> Result<Vec<Trajectory>> {
    let file = std::fs::File::open(path)?;
    read_trajectories(std::io::BufReader::new(file))
}

/// Writes a JSON-lines corpus file.
pub fn save_trajectories(path: impl AsRef<Path>, corpus: &[Trajectory]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trajectories(std::io::BufWriter::new(file), corpus)
}
