//! Synthetic graph generators for baselines and benchmarks.

use std::collections::HashSet;

use rand_chacha::ChaCha20Rng;

use crate::matrix::DenseMatrix;
use crate::rng::{below, gaussian, uniform};

/// Uniform simple graph with exactly `m` distinct edges on `n` nodes.
pub fn gnm(n: usize, m: usize, rng: &mut ChaCha20Rng) -> Vec<(usize, usize)> {
    let mut seen = HashSet::with_capacity(m * 2);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = below(rng, n);
        let v = below(rng, n);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            edges.push(key);
        }
    }
    edges
}

/// Stochastic block model: nodes in consecutive blocks, independent edges
/// with probability `p_in` inside a block and `p_out` across blocks.
/// Returns the undirected edges and each node's block.
pub fn sbm(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    rng: &mut ChaCha20Rng,
) -> (Vec<(usize, usize)>, Vec<usize>) {
    let n: usize = block_sizes.iter().sum();
    let mut block_of = Vec::with_capacity(n);
    for (b, &size) in block_sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(size));
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block_of[u] == block_of[v] { p_in } else { p_out };
            if uniform(rng) < p {
                edges.push((u, v));
            }
        }
    }
    (edges, block_of)
}

/// Block one-hot features with additive Gaussian noise.
pub fn block_features(
    block_of: &[usize],
    n_blocks: usize,
    noise_sigma: f64,
    rng: &mut ChaCha20Rng,
) -> DenseMatrix<f64> {
    let mut features = DenseMatrix::zeros(block_of.len(), n_blocks);
    for (i, &b) in block_of.iter().enumerate() {
        features.set(i, b, 1.0);
    }
    if noise_sigma > 0.0 {
        for v in features.data_mut() {
            *v += noise_sigma * gaussian(rng);
        }
    }
    features
}

/// Continuous power-law samples with density exponent `alpha` above
/// `x_min`, by inverse-CDF.
pub fn power_law_sample(n: usize, alpha: f64, x_min: f64, rng: &mut ChaCha20Rng) -> Vec<f64> {
    (0..n)
        .map(|_| x_min * (1.0 - uniform(rng)).powf(-1.0 / (alpha - 1.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn gnm_has_exact_edge_count_and_no_duplicates() {
        let mut rng = substream(1, "gnm");
        let edges = gnm(20, 50, &mut rng);
        assert_eq!(edges.len(), 50);
        let set: HashSet<_> = edges.iter().collect();
        assert_eq!(set.len(), 50);
        assert!(edges.iter().all(|&(u, v)| u < v && v < 20));
    }

    #[test]
    fn sbm_density_split() {
        let mut rng = substream(2, "sbm");
        let (edges, block_of) = sbm(&[50, 50], 0.2, 0.01, &mut rng);
        let within = edges
            .iter()
            .filter(|&&(u, v)| block_of[u] == block_of[v])
            .count();
        let across = edges.len() - within;
        // E[within] = 2*C(50,2)*0.2 = 490, E[across] = 2500*0.01 = 25.
        assert!((350..=650).contains(&within), "within {within}");
        assert!(across < 80, "across {across}");
    }

    #[test]
    fn block_features_are_one_hot_plus_noise() {
        let mut rng = substream(3, "bf");
        let features = block_features(&[0, 1, 1], 2, 0.0, &mut rng);
        assert_eq!(features.row(0), &[1.0, 0.0]);
        assert_eq!(features.row(2), &[0.0, 1.0]);
    }
}
