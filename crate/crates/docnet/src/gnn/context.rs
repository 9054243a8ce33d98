//! Precomputed message-passing structures of one (train) graph.

use std::rc::Rc;

use crate::autodiff::Segments;
use crate::graph::CitationGraph;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Symmetric normalization with self-connections:
/// `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` is the degree of `A + I`.
/// An isolated node keeps its self-loop entry of exactly 1.
pub fn normalize_neighbor_lists<S: Scalar>(neighbors: &[Vec<usize>]) -> CsrMatrix<S> {
    let n = neighbors.len();
    let degree_tilde: Vec<f64> = neighbors.iter().map(|nv| (nv.len() + 1) as f64).collect();
    let mut triplets = Vec::new();
    for (u, nv) in neighbors.iter().enumerate() {
        triplets.push((
            u,
            u,
            S::from_f64_lossy(1.0 / degree_tilde[u]),
        ));
        for &v in nv {
            triplets.push((
                u,
                v,
                S::from_f64_lossy(1.0 / (degree_tilde[u] * degree_tilde[v]).sqrt()),
            ));
        }
    }
    CsrMatrix::from_triplets(n, n, triplets)
}

/// [`normalize_neighbor_lists`] over a graph's symmetrized view.
pub fn normalize_adjacency<S: Scalar>(graph: &CitationGraph) -> CsrMatrix<S> {
    let neighbors: Vec<Vec<usize>> =
        (0..graph.n()).map(|v| graph.neighbors(v).to_vec()).collect();
    normalize_neighbor_lists(&neighbors)
}

/// Everything the encoders need from one graph, built once per training run.
#[derive(Debug, Clone)]
pub struct GraphContext<S: Scalar> {
    pub n: usize,
    /// Symmetric normalized adjacency with self-loops (GCN, GraphUNet).
    pub norm_adj: CsrMatrix<S>,
    /// Row-normalized adjacency without self-loops: neighbor mean (SAGE).
    /// An isolated node's row is empty, so its neighbor mean is zero.
    pub mean_adj: CsrMatrix<S>,
    /// Unweighted adjacency: neighbor sum (GIN).
    pub sum_adj: CsrMatrix<S>,
    /// Attention edges, one per (source, target) pair over
    /// `N(v) ∪ {v}`, grouped contiguously by target (GAT, AGNN).
    pub att_src: Rc<Vec<usize>>,
    pub att_dst: Rc<Vec<usize>>,
    pub att_segments: Rc<Segments>,
    /// Plain neighbor lists for induced subgraphs (GraphUNet).
    pub neighbors: Vec<Vec<usize>>,
}

impl<S: Scalar> GraphContext<S> {
    pub fn build(graph: &CitationGraph) -> Self {
        let n = graph.n();
        let neighbors: Vec<Vec<usize>> =
            (0..n).map(|v| graph.neighbors(v).to_vec()).collect();

        let norm_adj = normalize_neighbor_lists(&neighbors);

        let mut mean_triplets = Vec::new();
        let mut sum_triplets = Vec::new();
        for (u, nv) in neighbors.iter().enumerate() {
            let inv = if nv.is_empty() { 0.0 } else { 1.0 / nv.len() as f64 };
            for &v in nv {
                mean_triplets.push((u, v, S::from_f64_lossy(inv)));
                sum_triplets.push((u, v, S::one()));
            }
        }
        let mean_adj = CsrMatrix::from_triplets(n, n, mean_triplets);
        let sum_adj = CsrMatrix::from_triplets(n, n, sum_triplets);

        // Attention neighborhoods include the self-loop; edge rows are
        // sorted by target then source.
        let mut att_src = Vec::new();
        let mut att_dst = Vec::new();
        let mut offsets = vec![0usize];
        for v in 0..n {
            let mut sources: Vec<usize> = neighbors[v].clone();
            sources.push(v);
            sources.sort_unstable();
            for u in sources {
                att_src.push(u);
                att_dst.push(v);
            }
            offsets.push(att_src.len());
        }

        Self {
            n,
            norm_adj,
            mean_adj,
            sum_adj,
            att_src: Rc::new(att_src),
            att_dst: Rc::new(att_dst),
            att_segments: Rc::new(Segments::new(offsets)),
            neighbors,
        }
    }
}
