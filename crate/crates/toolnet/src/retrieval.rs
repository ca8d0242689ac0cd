//! Lexical retrieval for choosing which tools a session may start from.
//!
//! With large tool libraries the full registry cannot be offered at step
//! one, so a query is matched against tool descriptions and only the top-k
//! tools form the start set. The embedder here is a deterministic tf-idf
//! model: tokens are lowercased maximal alphanumeric runs, the vocabulary is
//! every corpus token in lexicographic order, and a document vector holds
//! `tf(t, d) * (ln((1 + N) / (1 + df(t))) + 1)` per vocabulary term. Query
//! terms outside the vocabulary are dropped. The whole pipeline is
//! insensitive to corpus document order and tool insertion order, and has no
//! randomness, so repeated calls always rank identically.
//!
//! Small libraries can skip retrieval entirely: [`StartSet::all_active`]
//! returns every active tool ranked by the graph's `"start"` row, which is
//! the equal-weight entry point of a freshly constructed graph.

use serde::{Deserialize, Serialize};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Result, ToolNetError};
use crate::graph::{NodeRef, ToolDef, ToolGraph, ToolId};

/// Maps free text to fixed-dimension vectors, deterministically.
pub trait EmbeddingProvider {
    /// Dimension of every vector returned by [`EmbeddingProvider::embed`].
    fn dimension(&self) -> usize;

    /// Embeds a text. Unknown-vocabulary text maps to the zero vector.
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Deterministic tf-idf embedder over a fixed fitted vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfEmbedder {
    vocab: Vec<String>,
    index: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

impl TfIdfEmbedder {
    /// The fitted vocabulary in lexicographic order.
    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    /// Inverse document frequency of a term, if it is in the vocabulary.
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index.get(term).map(|&i| self.idf[i])
    }
}

impl EmbeddingProvider for TfIdfEmbedder {
    fn dimension(&self) -> usize {
        self.vocab.len()
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut vector = vec![0.0; self.vocab.len()];
        for token in tokenize(text) {
            if let Some(&i) = self.index.get(&token) {
                vector[i] += self.idf[i];
            }
        }
        vector
    }
}

/// Lowercased maximal alphanumeric runs.
fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Fits a [`TfIdfEmbedder`] on a document corpus (typically the tool
/// descriptions). Errors on an empty corpus.
pub fn tfidf_embed(corpus: &[String]) -> Result<TfIdfEmbedder> {
    if corpus.is_empty() {
        return Err(ToolNetError::EmptyCorpus);
    }
    let n = corpus.len();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        let distinct: BTreeSet<String> = tokenize(doc).into_iter().collect();
        for term in distinct {
            *df.entry(term).or_default() += 1;
        }
    }
    let vocab: Vec<String> = df.keys().cloned().collect();
    let index: BTreeMap<String, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| ((1.0 + n as f64) / (1.0 + df[t] as f64)).ln() + 1.0)
        .collect();
    Ok(TfIdfEmbedder { vocab, index, idf })
}

/// Cosine similarity; zero if either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    dot / (norm_a * norm_b)
}

/// Tools a session may start from, ranked best-first.
#[derive(Debug, Clone, PartialEq)]
pub struct StartSet {
    /// `(tool, ranking value)` sorted by value descending, ties by id.
    /// The value is a cosine similarity for retrieval-based sets and the
    /// `"start"` edge weight for graph-native sets.
    pub ranked: Vec<(ToolId, f64)>,
    /// The requested set size (`ranked.len() <= k`).
    pub k: usize,
}

impl StartSet {
    /// True when no tool is available to start from.
    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    /// Graph-native start set: every active tool, ranked by the `"start"`
    /// row's weights (equal on a freshly constructed graph, so ordering
    /// falls back to ascending tool id).
    pub fn all_active(graph: &ToolGraph) -> Result<Self> {
        let successors = graph.successors(&NodeRef::Start)?;
        let ranked: Vec<(ToolId, f64)> = successors
            .into_iter()
            .filter_map(|(node, w)| match node {
                NodeRef::Tool(id) => Some((id, w)),
                _ => None,
            })
            .collect();
        if ranked.is_empty() {
            return Err(ToolNetError::NoActiveTools);
        }
        let k = ranked.len();
        Ok(StartSet { ranked, k })
    }
}

/// Ranks active tools by cosine similarity between the query embedding and
/// each tool's description embedding, keeping the best `k`. Ties order by
/// ascending tool id; inactive tools never appear.
pub fn select_start_set(
    graph: &ToolGraph,
    provider: &dyn EmbeddingProvider,
    query: &str,
    k: usize,
) -> Result<StartSet> {
    if k == 0 {
        return Err(ToolNetError::InvalidConfig(
            "start set size k must be at least 1".to_string(),
        ));
    }
    let query_vector = provider.embed(query);
    let mut ranked: Vec<(ToolId, f64)> = graph
        .tools()
        .filter(|(_, node)| node.active)
        .map(|(id, node)| {
            let similarity = cosine_similarity(&query_vector, &provider.embed(&node.description));
            (id.clone(), similarity)
        })
        .collect();
    if ranked.is_empty() {
        return Err(ToolNetError::NoActiveTools);
    }
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked.truncate(k);
    Ok(StartSet { ranked, k })
}

/// Tool registry file: a JSON array of tool definitions.
#[derive(Serialize, Deserialize)]
struct RegistryDoc(Vec<ToolDef>);

/// Reads a tool registry (JSON array of `{id, description, category}`),
/// rejecting duplicate ids.
pub fn read_registry(path: impl AsRef<Path>) -> Result<Vec<ToolDef>> {
    let text = std::fs::read_to_string(path)?;
    parse_registry(&text)
}

/// Parses registry JSON text.
pub fn parse_registry(text: &str) -> Result<Vec<ToolDef>> {
    let doc: RegistryDoc = serde_json::from_str(text)?;
    let mut seen: BTreeSet<&ToolId> = BTreeSet::new();
    for tool in &doc.0 {
        if !seen.insert(&tool.id) {
            return Err(ToolNetError::DuplicateToolId(tool.id.clone()));
        }
    }
    Ok(doc.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ToolGraph, UpdateParams};

    fn id(s: &str) -> ToolId {
        ToolId::new(s).unwrap()
    }

    fn def(id_str: &str, description: &str) -> ToolDef {
        ToolDef {
            id: id(id_str),
            description: description.to_string(),
            category: None,
        }
    }

    fn graph_of(defs: &[ToolDef]) -> ToolGraph {
        ToolGraph::new(defs, UpdateParams::default()).unwrap()
    }

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn embed_hits_exactly_the_matching_coordinate() {
        let embedder = tfidf_embed(&strings(&["alpha beta", "beta gamma"])).unwrap();
        assert_eq!(embedder.dimension(), 3);
        assert_eq!(embedder.vocabulary(), ["alpha", "beta", "gamma"]);
        let v = embedder.embed("beta");
        let nonzero: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
        assert_eq!(nonzero, vec![1]);
    }

    #[test]
    fn embed_out_of_vocabulary_is_zero() {
        let embedder = tfidf_embed(&strings(&["alpha beta", "beta gamma"])).unwrap();
        let v = embedder.embed("delta");
        assert!(v.iter().all(|&x| x == 0.0));
        assert!(embedder.embed("").iter().all(|&x| x == 0.0));
    }

    #[test]
    fn idf_of_ubiquitous_term_is_one() {
        // Term in every document: ln((1+2)/(1+2)) + 1 = 1.
        let embedder = tfidf_embed(&strings(&["a", "a"])).unwrap();
        assert_eq!(embedder.idf("a"), Some(1.0));
    }

    #[test]
    fn tfidf_rejects_empty_corpus() {
        assert!(matches!(tfidf_embed(&[]), Err(ToolNetError::EmptyCorpus)));
    }

    #[test]
    fn tokenizer_lowercases_and_splits_on_non_alphanumerics() {
        assert_eq!(
            tokenize("Search-Wikipedia, NOW!  twice"),
            vec!["search", "wikipedia", "now", "twice"]
        );
    }

    #[test]
    fn cosine_similarity_handles_zero_norm() {
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
        let v = [3.0, 4.0];
        assert!((cosine_similarity(&v, &v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn select_start_set_ranks_by_description_overlap() {
        let defs = vec![
            def("Calc", "evaluate math expressions"),
            def("WikiSearch", "search wikipedia articles"),
        ];
        let g = graph_of(&defs);
        let corpus: Vec<String> = defs.iter().map(|d| d.description.clone()).collect();
        let embedder = tfidf_embed(&corpus).unwrap();
        let set = select_start_set(&g, &embedder, "search wikipedia for ecosystems", 1).unwrap();
        assert_eq!(set.ranked.len(), 1);
        assert_eq!(set.ranked[0].0, id("WikiSearch"));
        // Query hits 2 of WikiSearch's 3 equally-weighted terms: cos = 2/sqrt(6).
        let expected = 2.0 / 6.0f64.sqrt();
        assert!((set.ranked[0].1 - expected).abs() < 1e-12);
    }

    #[test]
    fn select_start_set_breaks_ties_by_tool_id() {
        let defs = vec![def("zeta", "identical text"), def("alpha", "identical text")];
        let g = graph_of(&defs);
        let corpus: Vec<String> = defs.iter().map(|d| d.description.clone()).collect();
        let embedder = tfidf_embed(&corpus).unwrap();
        let set = select_start_set(&g, &embedder, "identical text", 1).unwrap();
        assert_eq!(set.ranked[0].0, id("alpha"));
    }

    #[test]
    fn select_start_set_zero_overlap_orders_by_id() {
        let defs = vec![def("b", "builds reports"), def("a", "sends invoices")];
        let g = graph_of(&defs);
        let corpus: Vec<String> = defs.iter().map(|d| d.description.clone()).collect();
        let embedder = tfidf_embed(&corpus).unwrap();
        let set = select_start_set(&g, &embedder, "zzz qqq", 2).unwrap();
        let ids: Vec<&str> = set.ranked.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(ids, vec!["a", "b"]);
        assert!(set.ranked.iter().all(|(_, s)| *s == 0.0));
    }

    #[test]
    fn select_start_set_requires_active_tools_and_positive_k() {
        let defs = vec![def("only", "the single tool")];
        let mut g = graph_of(&defs);
        let embedder = tfidf_embed(&strings(&["the single tool"])).unwrap();
        assert!(matches!(
            select_start_set(&g, &embedder, "q", 0),
            Err(ToolNetError::InvalidConfig(_))
        ));
        g.set_active(&id("only"), false).unwrap();
        assert!(matches!(
            select_start_set(&g, &embedder, "q", 1),
            Err(ToolNetError::NoActiveTools)
        ));
        assert!(matches!(
            StartSet::all_active(&g),
            Err(ToolNetError::NoActiveTools)
        ));
    }

    #[test]
    fn top_k_sets_nest_as_k_grows() {
        let defs = vec![
            def("t1", "alpha beta gamma"),
            def("t2", "beta gamma delta"),
            def("t3", "gamma delta epsilon"),
            def("t4", "something else entirely"),
        ];
        let g = graph_of(&defs);
        let corpus: Vec<String> = defs.iter().map(|d| d.description.clone()).collect();
        let embedder = tfidf_embed(&corpus).unwrap();
        let mut previous: Vec<ToolId> = Vec::new();
        for k in 1..=4 {
            let set = select_start_set(&g, &embedder, "beta gamma", k).unwrap();
            let ids: Vec<ToolId> = set.ranked.iter().map(|(t, _)| t.clone()).collect();
            assert_eq!(&ids[..previous.len()], &previous[..], "top-k must nest");
            previous = ids;
        }
    }

    #[test]
    fn ranking_is_invariant_to_input_order() {
        let defs_a = vec![
            def("t1", "alpha beta"),
            def("t2", "beta gamma"),
            def("t3", "gamma delta"),
        ];
        let mut defs_b = defs_a.clone();
        defs_b.reverse();
        let corpus_a: Vec<String> = defs_a.iter().map(|d| d.description.clone()).collect();
        let mut corpus_b = corpus_a.clone();
        corpus_b.reverse();
        let set_a = select_start_set(
            &graph_of(&defs_a),
            &tfidf_embed(&corpus_a).unwrap(),
            "beta gamma",
            2,
        )
        .unwrap();
        let set_b = select_start_set(
            &graph_of(&defs_b),
            &tfidf_embed(&corpus_b).unwrap(),
            "beta gamma",
            2,
        )
        .unwrap();
        assert_eq!(set_a, set_b);
    }

    #[test]
    fn all_active_uses_start_row_order() {
        let defs = vec![def("b", "two"), def("a", "one"), def("c", "three")];
        let g = graph_of(&defs);
        let set = StartSet::all_active(&g).unwrap();
        let ids: Vec<&str> = set.ranked.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
        for (_, w) in &set.ranked {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(set.k, 3);
    }

    #[test]
    fn registry_parsing_rejects_duplicates() {
        let good = r#"[{"id":"a","description":"first","category":"util"},
                       {"id":"b","description":"second"}]"#;
        let tools = parse_registry(good).unwrap();
        assert_eq!(tools.len(), 2);
        assert_eq!(tools[0].category.as_deref(), Some("util"));
        assert_eq!(tools[1].category, None);

        let dup = r#"[{"id":"a","description":"first"},{"id":"a","description":"again"}]"#;
        assert!(matches!(
            parse_registry(dup),
            Err(ToolNetError::DuplicateToolId(_))
        ));
    }
}
