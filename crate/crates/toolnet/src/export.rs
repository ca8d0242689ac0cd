//! Graphviz DOT rendering of a tool graph.
//!
//! The output is deterministic: nodes are listed as start, tools in
//! ascending id order, then end; edges follow the graph's sorted edge
//! list. Tool nodes are labeled `id (s=score)`, the start node is drawn
//! as an `Mdiamond` and the end node as an `Msquare`. Edge labels use the
//! `times10` weight rendering, and edges below `min_weight` are omitted
//! (weights never exceed 1, so a threshold above 1 yields no edges).

use crate::graph::{NodeRef, ToolGraph};
use crate::navigation::WeightFormat;

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Renders the graph as DOT, keeping only edges whose current weight is at
/// least `min_weight`.
pub fn graph_to_dot(graph: &ToolGraph, min_weight: f64) -> String {
    let mut out = String::from("digraph toolnet {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str(&format!(
        "  {} [shape=Mdiamond];\n",
        dot_quote(NodeRef::Start.name())
    ));
    for (id, node) in graph.tools() {
        let label = format!("{} (s={})", id, node.accumulated_score);
        out.push_str(&format!(
            "  {} [label={}];\n",
            dot_quote(id.as_str()),
            dot_quote(&label)
        ));
    }
    out.push_str(&format!(
        "  {} [shape=Msquare];\n",
        dot_quote(NodeRef::End.name())
    ));
    for (from, to, weights) in graph.edge_list() {
        if weights.current < min_weight {
            continue;
        }
        let label = WeightFormat::Times10
            .render_weight(weights.current)
            .expect("times10 always renders");
        out.push_str(&format!(
            "  {} -> {} [label={}];\n",
            dot_quote(from.name()),
            dot_quote(to.name()),
            dot_quote(&label)
        ));
    }
    out.push_str("}\n");
    out
}
