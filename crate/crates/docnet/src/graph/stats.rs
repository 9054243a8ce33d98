//! Descriptive network statistics: clustering, path lengths, the
//! Erdős–Rényi baseline, and the continuous power-law MLE for the degree
//! distribution.

use std::collections::VecDeque;

use serde::Serialize;

use super::synthetic::gnm;
use super::CitationGraph;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Knobs for the path-length computation.
#[derive(Debug, Clone)]
pub struct StatsConfig {
    /// Run exact all-sources BFS when the giant component has at most this
    /// many nodes; otherwise sample sources.
    pub exact_path_threshold: usize,
    pub path_sample_size: usize,
    pub er_replications: usize,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            exact_path_threshold: 4000,
            path_sample_size: 1024,
            er_replications: 100,
            seed: 0,
        }
    }
}

/// Statistics of one graph, without the random baseline.
#[derive(Debug, Clone, Serialize)]
pub struct CoreStats {
    pub nodes: usize,
    pub links: usize,
    pub giant_component_nodes: usize,
    pub giant_component_links: usize,
    pub diameter: usize,
    pub diameter_exact: bool,
    pub average_degree: f64,
    pub max_degree: usize,
    pub clustering_coefficient: f64,
    pub mean_path_length: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_length_sample_size: Option<usize>,
}

/// The full report: core statistics, Erdős–Rényi baseline means, the
/// small-world ratios, and the degree power-law exponent.
#[derive(Debug, Clone, Serialize)]
pub struct GraphStats {
    #[serde(flatten)]
    pub core: CoreStats,
    pub er_clustering_coefficient: f64,
    pub er_mean_path_length: f64,
    pub clustering_ratio: f64,
    pub path_length_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_law_alpha: Option<f64>,
}

fn components(neighbors: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = neighbors.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut comp = vec![start];
        while let Some(u) = queue.pop_front() {
            for &v in &neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Mean of the local clustering coefficients; nodes of degree < 2 count 0.
fn mean_local_clustering(neighbors: &[Vec<usize>]) -> f64 {
    let n = neighbors.len();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for nv in neighbors {
        let d = nv.len();
        if d < 2 {
            continue;
        }
        let mut links = 0usize;
        for &u in nv {
            // |N(u) ∩ N(v)| by merge; every triangle at v is counted twice.
            let nu = &neighbors[u];
            let (mut i, mut j) = (0, 0);
            while i < nv.len() && j < nu.len() {
                match nv[i].cmp(&nu[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        links += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
        total += links as f64 / (d * (d - 1)) as f64;
    }
    total / n as f64
}

/// BFS distances from `source`; unreachable nodes stay `usize::MAX`.
fn bfs_distances(neighbors: &[Vec<usize>], source: usize, dist: &mut [usize]) {
    dist.fill(usize::MAX);
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u];
        for &v in &neighbors[u] {
            if dist[v] == usize::MAX {
                dist[v] = du + 1;
                queue.push_back(v);
            }
        }
    }
}

struct PathSummary {
    mean: f64,
    eccentricity_max: usize,
    exact: bool,
    sample_size: Option<usize>,
}

/// Mean shortest-path length over connected pairs of the giant component
/// plus the largest observed eccentricity.
fn path_lengths(
    neighbors: &[Vec<usize>],
    giant: &[usize],
    cfg: &StatsConfig,
    stream: &str,
) -> PathSummary {
    let mut dist = vec![usize::MAX; neighbors.len()];
    let exact = giant.len() <= cfg.exact_path_threshold;
    let sources: Vec<usize> = if exact {
        giant.to_vec()
    } else {
        let mut rng = substream(cfg.seed, stream);
        let mut pool = giant.to_vec();
        // partial Fisher-Yates for a uniform sample without replacement
        let take = cfg.path_sample_size.min(pool.len());
        for i in 0..take {
            let j = i + crate::rng::below(&mut rng, pool.len() - i);
            pool.swap(i, j);
        }
        pool.truncate(take);
        pool
    };
    let mut sum = 0u128;
    let mut pairs = 0u128;
    let mut ecc_max = 0usize;
    for &s in &sources {
        bfs_distances(neighbors, s, &mut dist);
        let mut ecc = 0usize;
        for &t in giant {
            if t == s || dist[t] == usize::MAX {
                continue;
            }
            sum += dist[t] as u128;
            pairs += 1;
            ecc = ecc.max(dist[t]);
        }
        ecc_max = ecc_max.max(ecc);
    }
    PathSummary {
        mean: if pairs == 0 { 0.0 } else { sum as f64 / pairs as f64 },
        eccentricity_max: ecc_max,
        exact,
        sample_size: (!exact).then_some(sources.len()),
    }
}

fn core_from_neighbors(neighbors: &[Vec<usize>], cfg: &StatsConfig, stream: &str) -> CoreStats {
    let n = neighbors.len();
    let links = neighbors.iter().map(Vec::len).sum::<usize>() / 2;
    let comps = components(neighbors);
    let giant = comps
        .iter()
        .max_by_key(|c| c.len())
        .cloned()
        .unwrap_or_default();
    let mut in_giant = vec![false; n];
    for &v in &giant {
        in_giant[v] = true;
    }
    let giant_links = neighbors
        .iter()
        .enumerate()
        .filter(|(v, _)| in_giant[*v])
        .map(|(_, nv)| nv.iter().filter(|&&u| in_giant[u]).count())
        .sum::<usize>()
        / 2;
    let paths = path_lengths(neighbors, &giant, cfg, stream);
    CoreStats {
        nodes: n,
        links,
        giant_component_nodes: giant.len(),
        giant_component_links: giant_links,
        diameter: paths.eccentricity_max,
        diameter_exact: paths.exact,
        average_degree: if n == 0 { 0.0 } else { 2.0 * links as f64 / n as f64 },
        max_degree: neighbors.iter().map(Vec::len).max().unwrap_or(0),
        clustering_coefficient: mean_local_clustering(neighbors),
        mean_path_length: paths.mean,
        path_length_sample_size: paths.sample_size,
    }
}

/// Statistics of the symmetrized simple graph.
pub fn graph_stats(graph: &CitationGraph, cfg: &StatsConfig) -> Result<CoreStats> {
    if graph.n() == 0 {
        return Err(Error::GraphTooSmall("graph has no nodes".into()));
    }
    let neighbors: Vec<Vec<usize>> = (0..graph.n()).map(|v| graph.neighbors(v).to_vec()).collect();
    Ok(core_from_neighbors(&neighbors, cfg, "stats-paths"))
}

/// Per-replication and mean clustering/path-length of uniform G(n, m)
/// graphs.
#[derive(Debug, Clone)]
pub struct ErBaseline {
    pub clustering: Vec<f64>,
    pub mean_path: Vec<f64>,
}

impl ErBaseline {
    pub fn clustering_mean(&self) -> f64 {
        mean(&self.clustering)
    }

    pub fn mean_path_mean(&self) -> f64 {
        mean(&self.mean_path)
    }

    /// Standard error of the per-replication clustering mean.
    pub fn clustering_se(&self) -> f64 {
        let m = self.clustering_mean();
        let n = self.clustering.len();
        if n < 2 {
            return 0.0;
        }
        let var = self
            .clustering
            .iter()
            .map(|c| (c - m) * (c - m))
            .sum::<f64>()
            / (n - 1) as f64;
        (var / n as f64).sqrt()
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Mean clustering coefficient and giant-component mean path length over
/// `replications` uniform G(n, m) graphs.
pub fn er_baseline(
    n: usize,
    m: usize,
    replications: usize,
    seed: u64,
    cfg: &StatsConfig,
) -> Result<ErBaseline> {
    let max_edges = n.saturating_sub(1) * n / 2;
    if m > max_edges {
        return Err(Error::InvalidArgument(format!(
            "m = {m} exceeds the {max_edges} possible edges on {n} nodes"
        )));
    }
    let mut clustering = Vec::with_capacity(replications);
    let mut mean_path = Vec::with_capacity(replications);
    for rep in 0..replications {
        let mut rng = substream(seed, &format!("er-{rep}"));
        let edges = gnm(n, m, &mut rng);
        let mut neighbors = vec![Vec::new(); n];
        for (u, v) in edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        clustering.push(mean_local_clustering(&neighbors));
        if m > 0 {
            let comps = components(&neighbors);
            let giant = comps.iter().max_by_key(|c| c.len()).cloned().unwrap();
            let paths = path_lengths(&neighbors, &giant, cfg, &format!("er-paths-{rep}"));
            mean_path.push(paths.mean);
        } else {
            mean_path.push(0.0);
        }
    }
    Ok(ErBaseline {
        clustering,
        mean_path,
    })
}

/// Continuous maximum-likelihood power-law exponent over values at or above
/// `x_min`: `alpha = 1 + n / sum(ln(x_i / x_min))`.
pub fn fit_power_law(values: &[f64], x_min: f64) -> Result<f64> {
    let used: Vec<f64> = values.iter().copied().filter(|&x| x >= x_min).collect();
    if used.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two values at or above x_min, got {}",
            used.len()
        )));
    }
    let log_sum: f64 = used.iter().map(|&x| (x / x_min).ln()).sum();
    if log_sum <= 0.0 {
        return Err(Error::DegeneratePowerLaw);
    }
    Ok(1.0 + used.len() as f64 / log_sum)
}

/// Full report: core statistics, the Erdős–Rényi baseline with the same
/// node and edge counts, the small-world ratios, and the degree power-law
/// fit.
pub fn full_stats(graph: &CitationGraph, cfg: &StatsConfig) -> Result<GraphStats> {
    let core = graph_stats(graph, cfg)?;
    let er = er_baseline(core.nodes, core.links, cfg.er_replications, cfg.seed, cfg)?;
    let degrees: Vec<f64> = graph.degrees().into_iter().map(|d| d as f64).collect();
    let power_law_alpha = fit_power_law(&degrees, 1.0).ok();
    let er_c = er.clustering_mean();
    let er_l = er.mean_path_mean();
    Ok(GraphStats {
        clustering_ratio: if er_c > 0.0 { core.clustering_coefficient / er_c } else { f64::NAN },
        path_length_ratio: if er_l > 0.0 { core.mean_path_length / er_l } else { f64::NAN },
        er_clustering_coefficient: er_c,
        er_mean_path_length: er_l,
        power_law_alpha,
        core,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::synthetic::power_law_sample;

    fn graph_of(edges: &[(usize, usize)], n: usize) -> CitationGraph {
        let labels = (0..n).map(|i| i.to_string()).collect();
        CitationGraph::from_index_edges(labels, edges)
    }

    #[test]
    fn triangle_graph() {
        let g = graph_of(&[(0, 1), (1, 2), (2, 0)], 3);
        let s = graph_stats(&g, &StatsConfig::default()).unwrap();
        assert_eq!(s.clustering_coefficient, 1.0);
        assert_eq!(s.mean_path_length, 1.0);
        assert_eq!(s.diameter, 1);
        assert_eq!(s.average_degree, 2.0);
        assert_eq!(s.giant_component_nodes, 3);
    }

    #[test]
    fn path_graph_of_three() {
        let g = graph_of(&[(0, 1), (1, 2)], 3);
        let s = graph_stats(&g, &StatsConfig::default()).unwrap();
        assert_eq!(s.clustering_coefficient, 0.0);
        assert!((s.mean_path_length - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.diameter, 2);
        assert_eq!(s.max_degree, 2);
    }

    #[test]
    fn average_degree_is_2m_over_n() {
        let g = graph_of(&[(0, 1), (1, 2), (0, 3), (3, 4), (2, 4)], 5);
        let s = graph_stats(&g, &StatsConfig::default()).unwrap();
        assert!((s.average_degree - 2.0 * 5.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn er_baseline_matches_analytic_density() {
        let cfg = StatsConfig::default();
        let er = er_baseline(50, 200, 100, 7, &cfg).unwrap();
        let p = 200.0 / (50.0 * 49.0 / 2.0);
        let se = er.clustering_se();
        assert!(
            (er.clustering_mean() - p).abs() <= 3.0 * se,
            "mean {} vs p {p} (se {se})",
            er.clustering_mean()
        );
    }

    #[test]
    fn er_with_no_edges_has_zero_clustering() {
        let er = er_baseline(10, 0, 5, 1, &StatsConfig::default()).unwrap();
        assert_eq!(er.clustering_mean(), 0.0);
    }

    #[test]
    fn power_law_hand_value() {
        let alpha = fit_power_law(&[1.0, 2.0, 4.0], 1.0).unwrap();
        let expect = 1.0 + 3.0 / (2.0f64.ln() + 4.0f64.ln());
        assert!((alpha - expect).abs() < 1e-12);
        assert!((alpha - 2.4427).abs() < 1e-4);
    }

    #[test]
    fn power_law_recovers_generator_exponent() {
        let mut rng = substream(13, "pl");
        let xs = power_law_sample(10_000, 2.5, 1.0, &mut rng);
        let alpha = fit_power_law(&xs, 1.0).unwrap();
        assert!((2.4..=2.6).contains(&alpha), "alpha {alpha}");
    }

    #[test]
    fn degenerate_power_law_is_an_error() {
        assert!(matches!(
            fit_power_law(&[1.0, 1.0, 1.0], 1.0),
            Err(Error::DegeneratePowerLaw)
        ));
    }

    #[test]
    fn sampled_paths_report_sample_size() {
        let mut rng = substream(3, "ring");
        let n = 120;
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        for _ in 0..60 {
            edges.push((
                crate::rng::below(&mut rng, n),
                crate::rng::below(&mut rng, n),
            ));
        }
        let g = graph_of(&edges, n);
        let cfg = StatsConfig {
            exact_path_threshold: 50,
            path_sample_size: 32,
            ..StatsConfig::default()
        };
        let s = graph_stats(&g, &cfg).unwrap();
        assert_eq!(s.path_length_sample_size, Some(32));
        assert!(!s.diameter_exact);
        assert!(s.mean_path_length > 1.0);
    }

    #[test]
    fn full_stats_serializes_flat() {
        let g = graph_of(&[(0, 1), (1, 2), (2, 0), (2, 3)], 4);
        let cfg = StatsConfig {
            er_replications: 10,
            ..StatsConfig::default()
        };
        let stats = full_stats(&g, &cfg).unwrap();
        let json = serde_json::to_value(&stats).unwrap();
        for key in [
            "nodes",
            "links",
            "giant_component_nodes",
            "giant_component_links",
            "diameter",
            "average_degree",
            "max_degree",
            "clustering_coefficient",
            "mean_path_length",
            "er_clustering_coefficient",
            "er_mean_path_length",
            "clustering_ratio",
            "path_length_ratio",
            "power_law_alpha",
        ] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
    }
}
