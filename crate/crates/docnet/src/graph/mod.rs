//! Citation-network construction and descriptive statistics.

mod stats;
pub mod synthetic;

pub use stats::{
    er_baseline, fit_power_law, full_stats, graph_stats, CoreStats, ErBaseline, GraphStats,
    StatsConfig,
};

use std::collections::HashMap;

use crate::corpus::Corpus;

/// Direct-citation graph: directed citing->cited edges plus a symmetrized
/// simple view used for message passing and statistics.
#[derive(Debug, Clone)]
pub struct CitationGraph {
    labels: Vec<String>,
    directed_edges: Vec<(usize, usize)>,
    /// Sorted neighbor lists of the symmetrized simple graph.
    neighbors: Vec<Vec<usize>>,
}

impl CitationGraph {
    /// Build from directed index edges over `labels.len()` nodes. Self-loops
    /// are dropped and duplicate edges collapse.
    pub fn from_index_edges(labels: Vec<String>, edges: &[(usize, usize)]) -> Self {
        let n = labels.len();
        let mut directed: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(u, v)| u != v && u < n && v < n)
            .collect();
        directed.sort_unstable();
        directed.dedup();
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &directed {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self {
            labels,
            directed_edges: directed,
            neighbors,
        }
    }

    /// Build from labeled edges; the node set is every id that appears.
    pub fn from_string_edges(edges: &[(String, String)]) -> Self {
        let mut labels: Vec<String> = edges
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        labels.sort();
        labels.dedup();
        let index: HashMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let idx_edges: Vec<(usize, usize)> = edges
            .iter()
            .map(|(a, b)| (index[a.as_str()], index[b.as_str()]))
            .collect();
        Self::from_index_edges(labels, &idx_edges)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Directed citation links after deduplication.
    pub fn directed_edge_count(&self) -> usize {
        self.directed_edges.len()
    }

    pub fn directed_edges(&self) -> &[(usize, usize)] {
        &self.directed_edges
    }

    /// Undirected simple edges, each returned once with `u < v`.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, list) in self.neighbors.iter().enumerate() {
            for &v in list {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn undirected_edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn has_undirected_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }
}

/// Build the citation graph of a corpus. Nodes are the articles with at
/// least one internal citation link (in or out); everything else is returned
/// as the excluded id list.
pub fn build_citation_graph(corpus: &Corpus) -> (CitationGraph, Vec<String>) {
    let edges = corpus.internal_reference_edges();
    let mut linked = vec![false; corpus.len()];
    for &(u, v) in &edges {
        linked[u] = true;
        linked[v] = true;
    }
    let mut node_of = vec![usize::MAX; corpus.len()];
    let mut labels = Vec::new();
    let mut excluded = Vec::new();
    for i in 0..corpus.len() {
        if linked[i] {
            node_of[i] = labels.len();
            labels.push(corpus.article(i).id.clone());
        } else {
            excluded.push(corpus.article(i).id.clone());
        }
    }
    let idx_edges: Vec<(usize, usize)> = edges
        .iter()
        .map(|&(u, v)| (node_of[u], node_of[v]))
        .collect();
    (CitationGraph::from_index_edges(labels, &idx_edges), excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Article;

    fn article(id: &str, refs: &[&str]) -> Article {
        Article {
            id: id.into(),
            references: refs.iter().map(|s| s.to_string()).collect(),
            year: 2000,
            ..Article::default()
        }
    }

    #[test]
    fn isolated_articles_are_excluded_and_reported() {
        let corpus = Corpus::from_articles(vec![
            article("A", &["B"]),
            article("B", &[]),
            article("C", &[]),
        ])
        .unwrap();
        let (graph, excluded) = build_citation_graph(&corpus);
        assert_eq!(graph.n(), 2);
        assert_eq!(graph.directed_edge_count(), 1);
        assert_eq!(excluded, vec!["C".to_string()]);
    }

    #[test]
    fn duplicate_references_collapse() {
        let corpus = Corpus::from_articles(vec![
            article("A", &["B", "B", "A"]),
            article("B", &[]),
        ])
        .unwrap();
        let (graph, _) = build_citation_graph(&corpus);
        assert_eq!(graph.directed_edge_count(), 1);
        assert_eq!(graph.undirected_edge_count(), 1);
    }

    #[test]
    fn symmetrized_view_is_symmetric() {
        let edges = vec![(0usize, 1usize), (1, 2), (3, 1), (2, 0)];
        let labels = (0..4).map(|i| i.to_string()).collect();
        let graph = CitationGraph::from_index_edges(labels, &edges);
        for u in 0..graph.n() {
            for &v in graph.neighbors(u) {
                assert!(graph.has_undirected_edge(v, u), "({u},{v})");
            }
        }
        // Reciprocal citations collapse to one undirected edge.
        let labels = (0..2).map(|i| i.to_string()).collect();
        let graph = CitationGraph::from_index_edges(labels, &[(0, 1), (1, 0)]);
        assert_eq!(graph.undirected_edge_count(), 1);
        assert_eq!(graph.directed_edge_count(), 2);
    }

    #[test]
    fn string_edges_build_a_sorted_node_set() {
        let edges = vec![
            ("b".to_string(), "a".to_string()),
            ("c".to_string(), "a".to_string()),
        ];
        let graph = CitationGraph::from_string_edges(&edges);
        assert_eq!(graph.labels(), &["a", "b", "c"]);
        assert_eq!(graph.degree(0), 2);
    }
}
