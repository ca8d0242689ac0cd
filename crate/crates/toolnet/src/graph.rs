//! Core weighted directed graph over tools.
//!
//! A [`ToolGraph`] holds one node per tool plus two reserved virtual nodes,
//! `"start"` and `"end"`. Edges carry two weights: `prior` (the weight at
//! construction time, the anchor for later feedback updates) and `current`
//! (the weight agents act on). The graph maintains these structural rules at
//! all times:
//!
//! - every tool node has a self-transition edge and an edge to `"end"`;
//! - `"start"` has an edge to every tool and none to `"end"`;
//! - `"end"` has no out-edges and `"start"` has no in-edges;
//! - at most one edge exists per ordered `(from, to)` pair;
//! - every row of out-weights on a non-`"end"` node sums to 1 within
//!   [`ROW_SUM_TOLERANCE`].
//!
//! Ordering everywhere (successor listings, serialized arrays, reports) is
//! deterministic: weights descending with ties broken by ascending node name,
//! or plain ascending node name for key-ordered listings. `"start"` and
//! `"end"` order by their literal names.
//!
//! Serialization is a versioned JSON document with sorted keys, sorted node
//! and edge arrays, and weights rendered as decimal strings with 12
//! significant digits, so equal graphs always produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ToolNetError};

/// Maximum tolerated deviation of a row's weight sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Threshold below which an edge counts as effectively absent in degree
/// reporting. Edges are never deleted; this only affects [`DegreeReport`].
pub const EPSILON_PRUNE: f64 = 1e-6;

/// Name of the reserved virtual source node.
pub const START_NAME: &str = "start";

/// Name of the reserved virtual terminal node.
pub const END_NAME: &str = "end";

/// Version written to (and required from) persisted graph files.
pub const GRAPH_FORMAT_VERSION: u32 = 1;

/// Identifier of a tool. Non-empty, never `"start"` or `"end"`, compared
/// case-sensitively.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ToolId(String);

impl ToolId {
    /// Validates and wraps a raw identifier.
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(ToolNetError::EmptyToolId);
        }
        if id == START_NAME || id == END_NAME {
            return Err(ToolNetError::ReservedToolId(id));
        }
        Ok(ToolId(id))
    }

    /// The raw identifier.
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ToolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for ToolId {
    type Error = ToolNetError;

    fn try_from(value: String) -> Result<Self> {
        ToolId::new(value)
    }
}

impl From<ToolId> for String {
    fn from(id: ToolId) -> String {
        id.0
    }
}

/// A node reference: a tool or one of the two reserved virtual nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeRef {
    /// The virtual entry node `"start"`.
    Start,
    /// The virtual terminal node `"end"`.
    End,
    /// A regular tool node.
    Tool(ToolId),
}

impl NodeRef {
    /// The node's name as used in files and listings.
    pub fn name(&self) -> &str {
        match self {
            NodeRef::Start => START_NAME,
            NodeRef::End => END_NAME,
            NodeRef::Tool(id) => id.as_str(),
        }
    }

    /// Convenience constructor for a tool reference.
    pub fn tool(id: &ToolId) -> Self {
        NodeRef::Tool(id.clone())
    }
}

impl PartialOrd for NodeRef {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NodeRef {
    /// Nodes order by their literal names, so `"end"` and `"start"` sort
    /// among tool ids exactly as their strings do.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.name().cmp(other.name())
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NodeRef {
    type Err = ToolNetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            START_NAME => Ok(NodeRef::Start),
            END_NAME => Ok(NodeRef::End),
            other => Ok(NodeRef::Tool(ToolId::new(other)?)),
        }
    }
}

/// Static description of a tool, as found in a registry file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDef {
    /// Unique identifier.
    pub id: ToolId,
    /// Human/agent readable description, also used for retrieval.
    pub description: String,
    /// Optional grouping label.
    #[serde(default)]
    pub category: Option<String>,
}

/// Mutable per-tool state stored in the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolNode {
    /// Description shown to agents and embedded for retrieval.
    pub description: String,
    /// Optional grouping label.
    pub category: Option<String>,
    /// Sum of all integer evaluator scores received so far.
    pub accumulated_score: i64,
    /// Inactive tools are hidden from successor listings (except their own
    /// self-transition) but keep all their edges and state.
    pub active: bool,
}

/// The two weights stored on every edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeights {
    /// Weight fixed at construction time; the anchor for feedback updates.
    pub prior: f64,
    /// Weight agents currently act on.
    pub current: f64,
}

/// Parameters of the feedback update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateParams {
    /// Slope of the score-to-positive mapping; must be > 0.
    pub alpha: f64,
    /// Share of the prior retained on every update; must be in [0, 1].
    pub beta: f64,
}

impl UpdateParams {
    /// Default slope for the score mapping.
    pub const DEFAULT_ALPHA: f64 = 0.5;
    /// Default prior retention share.
    pub const DEFAULT_BETA: f64 = 0.3;

    /// Checks both parameters, returning the first violation.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(ToolNetError::NonPositiveAlpha(self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) || !self.beta.is_finite() {
            return Err(ToolNetError::InvalidBeta(self.beta));
        }
        Ok(())
    }
}

impl Default for UpdateParams {
    fn default() -> Self {
        UpdateParams {
            alpha: Self::DEFAULT_ALPHA,
            beta: Self::DEFAULT_BETA,
        }
    }
}

/// One row of a [`DegreeReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeEntry {
    /// Source node of the row (serialized by name).
    #[serde(serialize_with = "serialize_node_name")]
    pub node: NodeRef,
    /// Number of out-edges with weight above [`EPSILON_PRUNE`].
    pub out_degree: usize,
    /// Absolute deviation of the row's weight sum from 1.
    pub row_sum_deviation: f64,
    /// Whether the deviation exceeds [`ROW_SUM_TOLERANCE`].
    pub flagged: bool,
}

fn serialize_node_name<S: serde::Serializer>(node: &NodeRef, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(node.name())
}

/// Out-degree and row-sum audit of every non-`"end"` node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeReport {
    /// One entry per source node, ordered by node name.
    pub entries: Vec<DegreeEntry>,
}

impl DegreeReport {
    /// Whether any row deviates from stochasticity beyond tolerance.
    pub fn has_flags(&self) -> bool {
        self.entries.iter().any(|e| e.flagged)
    }
}

/// Weighted directed graph over tools plus the `"start"`/`"end"` virtuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolGraph {
    params: UpdateParams,
    iteration: u64,
    nodes: BTreeMap<ToolId, ToolNode>,
    rows: BTreeMap<NodeRef, BTreeMap<NodeRef, EdgeWeights>>,
}

impl ToolGraph {
    /// Builds a non-informative graph: every tool connects to every tool
    /// (including itself) and to `"end"` with equal weight `1/(N+1)`, and
    /// `"start"` connects to every tool with equal weight `1/N`.
    pub fn new(tools: &[ToolDef], params: UpdateParams) -> Result<Self> {
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
        let n = nodes.len();
        let tool_weight = 1.0 / (n as f64 + 1.0);
        let start_weight = 1.0 / n as f64;
        let mut rows: BTreeMap<NodeRef, BTreeMap<NodeRef, EdgeWeights>> = BTreeMap::new();
        let mut start_row = BTreeMap::new();
        for id in nodes.keys() {
            start_row.insert(NodeRef::tool(id), uniform_edge(start_weight));
        }
        rows.insert(NodeRef::Start, start_row);
        for from in nodes.keys() {
            let mut row = BTreeMap::new();
            for to in nodes.keys() {
                row.insert(NodeRef::tool(to), uniform_edge(tool_weight));
            }
            row.insert(NodeRef::End, uniform_edge(tool_weight));
            rows.insert(NodeRef::tool(from), row);
        }
        Ok(ToolGraph {
            params,
            iteration: 0,
            nodes,
            rows,
        })
    }

    /// Assembles a graph from pre-validated parts (construction and
    /// deserialization paths).
    pub(crate) fn from_parts(
        params: UpdateParams,
        iteration: u64,
        nodes: BTreeMap<ToolId, ToolNode>,
        rows: BTreeMap<NodeRef, BTreeMap<NodeRef, EdgeWeights>>,
    ) -> Self {
        ToolGraph {
            params,
            iteration,
            nodes,
            rows,
        }
    }

    /// Update parameters stored with the graph.
    pub fn params(&self) -> UpdateParams {
        self.params
    }

    /// Number of feedback updates applied so far.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub(crate) fn bump_iteration(&mut self) {
        self.iteration += 1;
    }

    /// Number of tool nodes.
    pub fn tool_count(&self) -> usize {
        self.nodes.len()
    }

    /// Tool nodes in ascending id order.
    pub fn tools(&self) -> impl Iterator<Item = (&ToolId, &ToolNode)> {
        self.nodes.iter()
    }

    /// Looks up a tool node.
    pub fn node(&self, id: &ToolId) -> Option<&ToolNode> {
        self.nodes.get(id)
    }

    /// Accumulated evaluator score of a tool.
    pub fn accumulated_score(&self, id: &ToolId) -> Result<i64> {
        self.nodes
            .get(id)
            .map(|n| n.accumulated_score)
            .ok_or_else(|| ToolNetError::UnknownNode(id.to_string()))
    }

    pub(crate) fn add_score(&mut self, id: &ToolId, delta: i64) {
        if let Some(node) = self.nodes.get_mut(id) {
            node.accumulated_score += delta;
        }
    }

    /// Current weight of the `(from, to)` edge, if the edge exists.
    pub fn weight(&self, from: &NodeRef, to: &NodeRef) -> Option<f64> {
        self.rows.get(from).and_then(|r| r.get(to)).map(|w| w.current)
    }

    /// Prior (construction-time) weight of the `(from, to)` edge.
    pub fn prior_weight(&self, from: &NodeRef, to: &NodeRef) -> Option<f64> {
        self.rows.get(from).and_then(|r| r.get(to)).map(|w| w.prior)
    }

    pub(crate) fn rows_mut(&mut self) -> &mut BTreeMap<NodeRef, BTreeMap<NodeRef, EdgeWeights>> {
        &mut self.rows
    }

    /// All edges as `(from, to, weights)`, ordered by `(from, to)` names.
    pub fn edge_list(&self) -> Vec<(NodeRef, NodeRef, EdgeWeights)> {
        let mut edges = Vec::new();
        for (from, row) in &self.rows {
            for (to, w) in row {
                edges.push((from.clone(), to.clone(), *w));
            }
        }
        edges
    }

    /// Lists the out-neighbors of `from` that are visible to an agent:
    /// edges with positive current weight whose head is active, is `from`
    /// itself, or is `"end"`. Sorted by weight descending, ties by ascending
    /// node name. Repeated calls return identical listings.
    pub fn successors(&self, from: &NodeRef) -> Result<Vec<(NodeRef, f64)>> {
        if *from == NodeRef::End {
            return Err(ToolNetError::EndHasNoSuccessors);
        }
        let row = self
            .rows
            .get(from)
            .ok_or_else(|| ToolNetError::UnknownNode(from.to_string()))?;
        let mut out: Vec<(NodeRef, f64)> = row
            .iter()
            .filter(|(_, w)| w.current > 0.0)
            .filter(|(to, _)| match to {
                NodeRef::End => true,
                NodeRef::Start => false,
                NodeRef::Tool(id) => {
                    *to == from || self.nodes.get(id).map(|n| n.active).unwrap_or(false)
                }
            })
            .map(|(to, w)| (to.clone(), w.current))
            .collect();
        out.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        Ok(out)
    }

    /// Marks a tool (in)active. Weights and scores are untouched; activity
    /// only affects visibility in successor listings and start sets.
    pub fn set_active(&mut self, tool: &ToolId, active: bool) -> Result<()> {
        let node = self
            .nodes
            .get_mut(tool)
            .ok_or_else(|| ToolNetError::UnknownNode(tool.to_string()))?;
        node.active = active;
        Ok(())
    }

    /// Whether a tool is currently active.
    pub fn is_active(&self, tool: &ToolId) -> Result<bool> {
        self.nodes
            .get(tool)
            .map(|n| n.active)
            .ok_or_else(|| ToolNetError::UnknownNode(tool.to_string()))
    }

    /// Audits every non-`"end"` row: effective out-degree (weights above
    /// [`EPSILON_PRUNE`]) and deviation of the weight sum from 1.
    pub fn degree_check(&self) -> DegreeReport {
        let entries = self
            .rows
            .iter()
            .map(|(node, row)| {
                let out_degree = row.values().filter(|w| w.current > EPSILON_PRUNE).count();
                let sum: f64 = row.values().map(|w| w.current).sum();
                let row_sum_deviation = (sum - 1.0).abs();
                DegreeEntry {
                    node: node.clone(),
                    out_degree,
                    row_sum_deviation,
                    flagged: row_sum_deviation > ROW_SUM_TOLERANCE,
                }
            })
            .collect();
        DegreeReport { entries }
    }

    /// Mean current weight over a tool's stored in-edges from non-`"start"`
    /// sources. The `"start"` row never changes after construction, so it is
    /// excluded to keep the statistic sensitive to feedback updates.
    pub fn mean_inbound_weight(&self, tool: &ToolId) -> Result<f64> {
        if !self.nodes.contains_key(tool) {
            return Err(ToolNetError::UnknownNode(tool.to_string()));
        }
        let target = NodeRef::tool(tool);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (from, row) in &self.rows {
            if *from == NodeRef::Start {
                continue;
            }
            if let Some(w) = row.get(&target) {
                sum += w.current;
                count += 1;
            }
        }
        if count == 0 {
            return Ok(0.0);
        }
        Ok(sum / count as f64)
    }

    /// Canonical JSON serialization: sorted keys, sorted arrays, weights as
    /// 12-significant-digit decimal strings, trailing newline. Equal graphs
    /// serialize to byte-identical documents.
    pub fn to_canonical_json(&self) -> Result<String> {
        let doc = GraphDoc {
            format_version: GRAPH_FORMAT_VERSION,
            params: self.params,
            iteration: self.iteration,
            nodes: self
                .nodes
                .iter()
                .map(|(id, n)| NodeDoc {
                    id: id.to_string(),
                    description: n.description.clone(),
                    category: n.category.clone(),
                    accumulated_score: n.accumulated_score,
                    active: n.active,
                })
                .collect(),
            edges: self
                .edge_list()
                .into_iter()
                .map(|(from, to, w)| EdgeDoc {
                    from: from.name().to_string(),
                    to: to.name().to_string(),
                    prior_weight: format_weight(w.prior),
                    current_weight: format_weight(w.current),
                })
                .collect(),
        };
        // Round-tripping through Value sorts object keys (serde_json maps
        // are ordered), which fixes the byte layout.
        let value = serde_json::to_value(&doc)?;
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        Ok(text)
    }

    /// Parses and validates a graph document produced by
    /// [`ToolGraph::to_canonical_json`]. Structural rules and weight ranges
    /// are enforced; row sums are deliberately not (that is
    /// [`ToolGraph::degree_check`]'s job, so damaged rows remain inspectable).
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        if doc.format_version != GRAPH_FORMAT_VERSION {
            return Err(ToolNetError::UnsupportedFormatVersion(doc.format_version));
        }
        doc.params.validate()?;
        let mut nodes: BTreeMap<ToolId, ToolNode> = BTreeMap::new();
        for n in &doc.nodes {
            let id = ToolId::new(n.id.clone())?;
            let previous = nodes.insert(
                id.clone(),
                ToolNode {
                    description: n.description.clone(),
                    category: n.category.clone(),
                    accumulated_score: n.accumulated_score,
                    active: n.active,
                },
            );
            if previous.is_some() {
                return Err(ToolNetError::DuplicateToolId(id));
            }
        }
        if nodes.is_empty() {
            return Err(ToolNetError::EmptyToolSet);
        }
        let mut rows: BTreeMap<NodeRef, BTreeMap<NodeRef, EdgeWeights>> = BTreeMap::new();
        for e in &doc.edges {
            let from: NodeRef = e.from.parse()?;
            let to: NodeRef = e.to.parse()?;
            if from == NodeRef::End {
                return Err(ToolNetError::InvalidGraphFile(format!(
                    "edge out of \"end\": {} -> {}",
                    e.from, e.to
                )));
            }
            if to == NodeRef::Start {
                return Err(ToolNetError::InvalidGraphFile(format!(
                    "edge into \"start\": {} -> {}",
                    e.from, e.to
                )));
            }
            if from == NodeRef::Start && to == NodeRef::End {
                return Err(ToolNetError::InvalidGraphFile(
                    "edge from \"start\" to \"end\"".to_string(),
                ));
            }
            for endpoint in [&from, &to] {
                if let NodeRef::Tool(id) = endpoint {
                    if !nodes.contains_key(id) {
                        return Err(ToolNetError::InvalidGraphFile(format!(
                            "edge references undeclared tool: {id}"
                        )));
                    }
                }
            }
            let prior = parse_weight(&e.prior_weight, "prior_weight")?;
            let current = parse_weight(&e.current_weight, "current_weight")?;
            let row = rows.entry(from.clone()).or_default();
            let previous = row.insert(to.clone(), EdgeWeights { prior, current });
            if previous.is_some() {
                return Err(ToolNetError::InvalidGraphFile(format!(
                    "duplicate edge: {} -> {}",
                    e.from, e.to
                )));
            }
        }
        // Structural axioms: start reaches every tool; every tool has its
        // self-transition and an edge to "end".
        let start_row = rows
            .get(&NodeRef::Start)
            .ok_or_else(|| ToolNetError::InvalidGraphFile("missing \"start\" row".to_string()))?;
        for id in nodes.keys() {
            if !start_row.contains_key(&NodeRef::tool(id)) {
                return Err(ToolNetError::InvalidGraphFile(format!(
                    "missing edge start -> {id}"
                )));
            }
            let row = rows.get(&NodeRef::tool(id)).ok_or_else(|| {
                ToolNetError::InvalidGraphFile(format!("tool {id} has no out-edges"))
            })?;
            if !row.contains_key(&NodeRef::tool(id)) {
                return Err(ToolNetError::InvalidGraphFile(format!(
                    "missing self-transition edge {id} -> {id}"
                )));
            }
            if !row.contains_key(&NodeRef::End) {
                return Err(ToolNetError::InvalidGraphFile(format!(
                    "missing edge {id} -> end"
                )));
            }
        }
        Ok(ToolGraph::from_parts(doc.params, doc.iteration, nodes, rows))
    }

    /// Writes the canonical JSON document to a file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = self.to_canonical_json()?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Reads and validates a graph document from a file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ToolGraph::from_json(&text)
    }

    #[cfg(test)]
    pub(crate) fn corrupt_weight_for_test(&mut self, from: &NodeRef, to: &NodeRef, value: f64) {
        if let Some(w) = self.rows.get_mut(from).and_then(|r| r.get_mut(to)) {
            w.current = value;
        }
    }
}

fn uniform_edge(w: f64) -> EdgeWeights {
    EdgeWeights {
        prior: w,
        current: w,
    }
}

fn parse_weight(text: &str, field: &str) -> Result<f64> {
    let value: f64 = text
        .parse()
        .map_err(|_| ToolNetError::InvalidGraphFile(format!("unparseable {field}: {text:?}")))?;
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(ToolNetError::InvalidGraphFile(format!(
            "{field} out of range [0, 1]: {text}"
        )));
    }
    Ok(value)
}

/// Renders a weight as a plain decimal string with 12 significant digits.
/// The rendering is canonical: serializing, parsing, and serializing again
/// reproduces the same bytes.
pub fn format_weight(w: f64) -> String {
    if w == 0.0 {
        return "0".to_string();
    }
    // `{:.11e}` yields a 12-significant-digit mantissa plus exponent with
    // correct rounding; rebuild a plain decimal from it.
    let sci = format!("{:.11e}", w);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific form");
    let exp: i32 = exp.parse().expect("numeric exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let point = exp + 1; // digits before the decimal point
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if point <= 0 {
        out.push_str("0.");
        for _ in 0..(-point) {
            out.push('0');
        }
        out.push_str(&digits);
    } else if point as usize >= digits.len() {
        out.push_str(&digits);
        for _ in 0..(point as usize - digits.len()) {
            out.push('0');
        }
    } else {
        out.push_str(&digits[..point as usize]);
        out.push('.');
        out.push_str(&digits[point as usize..]);
    }
    out
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    format_version: u32,
    params: UpdateParams,
    iteration: u64,
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: String,
    description: String,
    category: Option<String>,
    accumulated_score: i64,
    active: bool,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    from: String,
    to: String,
    prior_weight: String,
    current_weight: String,
}
