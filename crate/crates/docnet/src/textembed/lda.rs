//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.
//!
//! The sampler keeps the usual count tables (document-topic, topic-word,
//! topic totals) and resamples every token's topic from
//! `p(z=k) ∝ (n_dk + α)(n_kw + η)/(n_k + Vη)`. Topic and document
//! distributions are averaged over post-burn-in sweeps.

use rand_chacha::ChaCha20Rng;

use super::dtm::{DocumentTermMatrix, Weighting};
use super::{EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{substream, uniform};

#[derive(Debug, Clone)]
pub struct LdaConfig {
    pub k: usize,
    /// Document-topic prior; defaults to `50 / k`.
    pub alpha: Option<f64>,
    /// Topic-word prior.
    pub eta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: 20,
            alpha: None,
            eta: 0.01,
            iterations: 500,
            burn_in: 200,
            seed: 0,
        }
    }
}

/// Fitted topic model: row-stochastic `beta` (topics over words) and
/// `theta` (documents over topics).
#[derive(Debug, Clone)]
pub struct TopicModel {
    pub beta: DenseMatrix<f64>,
    pub theta: DenseMatrix<f64>,
    pub alpha: f64,
    pub eta: f64,
    pub k: usize,
}

/// Unnormalized conditional weights for one token given the decremented
/// count tables.
pub fn conditional_topic_weights(
    doc_topic: &[f64],
    topic_word: &[f64],
    topic_total: &[f64],
    alpha: f64,
    eta: f64,
    vocab_size: usize,
) -> Vec<f64> {
    let v = vocab_size as f64;
    doc_topic
        .iter()
        .zip(topic_word)
        .zip(topic_total)
        .map(|((&ndk, &nkw), &nk)| (ndk + alpha) * (nkw + eta) / (nk + v * eta))
        .collect()
}

fn sample_index(weights: &[f64], rng: &mut ChaCha20Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = uniform(rng) * total;
    for (k, &w) in weights.iter().enumerate() {
        target -= w;
        if target <= 0.0 {
            return k;
        }
    }
    weights.len() - 1
}

/// Fit by collapsed Gibbs sampling. Requires a count-weighted DTM.
pub fn lda_fit(dtm: &DocumentTermMatrix, cfg: &LdaConfig) -> Result<TopicModel> {
    if dtm.weighting != Weighting::Count {
        return Err(Error::InvalidArgument(
            "lda_fit needs a count-weighted document-term matrix".into(),
        ));
    }
    if cfg.k < 2 {
        return Err(Error::InvalidArgument("topic count must be at least 2".into()));
    }
    let n = dtm.n_documents();
    let v = dtm.vocabulary_size();
    let k = cfg.k;
    if k > v {
        log::warn!("more topics ({k}) than vocabulary entries ({v})");
    }
    let alpha = cfg.alpha.unwrap_or(50.0 / k as f64);
    let eta = cfg.eta;

    // Expand counts into token instances, deterministically ordered.
    let mut docs: Vec<Vec<usize>> = Vec::with_capacity(n);
    for d in 0..n {
        let mut tokens = Vec::new();
        for (w, count) in dtm.matrix.row(d) {
            for _ in 0..count.round() as usize {
                tokens.push(w);
            }
        }
        docs.push(tokens);
    }
    let total_tokens: usize = docs.iter().map(Vec::len).sum();

    let mut rng = substream(cfg.seed, "lda");
    let mut doc_topic = vec![vec![0f64; k]; n];
    let mut topic_word = vec![vec![0f64; v]; k];
    let mut topic_total = vec![0f64; k];
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(n);
    for (d, tokens) in docs.iter().enumerate() {
        let mut z = Vec::with_capacity(tokens.len());
        for &w in tokens {
            let topic = (uniform(&mut rng) * k as f64) as usize % k;
            doc_topic[d][topic] += 1.0;
            topic_word[topic][w] += 1.0;
            topic_total[topic] += 1.0;
            z.push(topic);
        }
        assignments.push(z);
    }

    let mut theta_acc = DenseMatrix::<f64>::zeros(n, k);
    let mut beta_acc = DenseMatrix::<f64>::zeros(k, v);
    let mut samples = 0usize;

    let mut weights = vec![0f64; k];
    for sweep in 0..cfg.iterations {
        for d in 0..n {
            for (i, &w) in docs[d].iter().enumerate() {
                let old = assignments[d][i];
                doc_topic[d][old] -= 1.0;
                topic_word[old][w] -= 1.0;
                topic_total[old] -= 1.0;

                let veta = v as f64 * eta;
                for t in 0..k {
                    weights[t] = (doc_topic[d][t] + alpha) * (topic_word[t][w] + eta)
                        / (topic_total[t] + veta);
                }
                let new = sample_index(&weights, &mut rng);

                doc_topic[d][new] += 1.0;
                topic_word[new][w] += 1.0;
                topic_total[new] += 1.0;
                assignments[d][i] = new;
            }
        }
        debug_assert_eq!(
            topic_total.iter().sum::<f64>() as usize,
            total_tokens,
            "count tables must sum to the corpus token count"
        );
        if sweep >= cfg.burn_in {
            accumulate(&mut theta_acc, &doc_topic, alpha);
            accumulate(&mut beta_acc, &topic_word, eta);
            samples += 1;
        }
    }

    let (theta, beta) = if samples == 0 {
        // Prior only: uniform rows.
        let theta = DenseMatrix::from_vec(n, k, vec![1.0 / k as f64; n * k]);
        let beta = DenseMatrix::from_vec(k, v, vec![1.0 / v as f64; k * v]);
        (theta, beta)
    } else {
        let mut theta = theta_acc;
        theta.scale_assign(1.0 / samples as f64);
        let mut beta = beta_acc;
        beta.scale_assign(1.0 / samples as f64);
        (theta, beta)
    };

    Ok(TopicModel {
        beta,
        theta,
        alpha,
        eta,
        k,
    })
}

/// Add the current count tables, smoothed and row-normalized, to `acc`.
fn accumulate(acc: &mut DenseMatrix<f64>, counts: &[Vec<f64>], prior: f64) {
    let cols = acc.cols();
    for (i, row) in counts.iter().enumerate() {
        let total: f64 = row.iter().sum::<f64>() + prior * cols as f64;
        let dst = acc.row_mut(i);
        for (j, &c) in row.iter().enumerate() {
            dst[j] += (c + prior) / total;
        }
    }
}

/// The document-topic distribution as an embedding.
pub fn lda_doc_topics(model: &TopicModel, ids: Vec<String>) -> Result<EmbeddingMatrix<f64>> {
    EmbeddingMatrix::new(ids, model.theta.clone(), EmbeddingKind::LdaTheta)
}

/// Per-group topic share over corpus topic share. Returns the sorted label
/// vocabulary and the groups-by-topics ratio matrix.
pub fn topic_relative_importance(
    theta: &DenseMatrix<f64>,
    group_labels: &[String],
) -> Result<(Vec<String>, DenseMatrix<f64>)> {
    let n = theta.rows();
    let k = theta.cols();
    if group_labels.len() != n {
        return Err(Error::ShapeMismatch {
            op: "topic_relative_importance",
            details: format!("{} labels vs {} rows", group_labels.len(), n),
        });
    }
    if n == 0 {
        return Err(Error::EmptyGroup("no documents".into()));
    }
    let mut labels: Vec<String> = group_labels.to_vec();
    labels.sort();
    labels.dedup();

    let mut corpus_mean = vec![0f64; k];
    for i in 0..n {
        for (j, m) in corpus_mean.iter_mut().enumerate() {
            *m += theta.get(i, j);
        }
    }
    for m in &mut corpus_mean {
        *m /= n as f64;
    }

    let mut out = DenseMatrix::zeros(labels.len(), k);
    for (g, label) in labels.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&i| &group_labels[i] == label).collect();
        if members.is_empty() {
            return Err(Error::EmptyGroup(label.clone()));
        }
        for j in 0..k {
            let mean = members.iter().map(|&i| theta.get(i, j)).sum::<f64>()
                / members.len() as f64;
            out.set(g, j, mean / corpus_mean[j]);
        }
    }
    Ok((labels, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, TokenList};
    use crate::rng::substream;
    use crate::textembed::build_dtm;

    fn stochastic_rows(m: &DenseMatrix<f64>) {
        for i in 0..m.rows() {
            let sum: f64 = m.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {i} sums to {sum}");
            assert!(m.row(i).iter().all(|&x| x >= 0.0));
        }
    }

    fn count_dtm(documents: &[TokenList]) -> DocumentTermMatrix {
        let vocab = build_vocabulary(documents, 1, 1.0).unwrap();
        build_dtm(documents, &vocab, Weighting::Count)
    }

    #[test]
    fn conditional_weights_hand_example() {
        let w = conditional_topic_weights(&[1.0, 0.0], &[1.0, 0.0], &[2.0, 0.0], 0.1, 0.1, 2);
        assert!((w[0] - 0.55).abs() < 1e-12);
        assert!((w[1] - 0.05).abs() < 1e-12);
        let p0 = w[0] / (w[0] + w[1]);
        assert!((p0 - 0.9167).abs() < 1e-4);
    }

    #[test]
    fn zero_iterations_gives_uniform_prior() {
        let docs: Vec<TokenList> = vec![vec!["a".into(), "b".into()], vec!["b".into()]];
        let dtm = count_dtm(&docs);
        let model = lda_fit(
            &dtm,
            &LdaConfig {
                k: 2,
                iterations: 0,
                burn_in: 0,
                ..LdaConfig::default()
            },
        )
        .unwrap();
        assert_eq!(model.theta.get(0, 0), 0.5);
        assert_eq!(model.theta.get(1, 1), 0.5);
        stochastic_rows(&model.theta);
        stochastic_rows(&model.beta);
    }

    #[test]
    fn empty_document_gets_uniform_topics() {
        let docs: Vec<TokenList> = vec![vec!["a".into(), "a".into(), "b".into()], vec![]];
        let dtm = count_dtm(&docs);
        let cfg = LdaConfig {
            k: 2,
            iterations: 30,
            burn_in: 10,
            seed: 5,
            ..LdaConfig::default()
        };
        let model = lda_fit(&dtm, &cfg).unwrap();
        assert!((model.theta.get(1, 0) - 0.5).abs() < 1e-12);
        stochastic_rows(&model.theta);
    }

    #[test]
    fn count_weighting_is_required() {
        let docs: Vec<TokenList> = vec![vec!["a".into()], vec!["a".into(), "b".into()]];
        let vocab = build_vocabulary(&docs, 1, 1.0).unwrap();
        let dtm = build_dtm(&docs, &vocab, Weighting::TfIdf);
        assert!(lda_fit(&dtm, &LdaConfig::default()).is_err());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mut rng = substream(11, "docs");
        let words = ["w0", "w1", "w2", "w3", "w4", "w5"];
        let docs: Vec<TokenList> = (0..12)
            .map(|_| {
                (0..8)
                    .map(|_| words[crate::rng::below(&mut rng, words.len())].to_string())
                    .collect()
            })
            .collect();
        let dtm = count_dtm(&docs);
        let cfg = LdaConfig {
            k: 3,
            iterations: 25,
            burn_in: 10,
            seed: 9,
            ..LdaConfig::default()
        };
        let a = lda_fit(&dtm, &cfg).unwrap();
        let b = lda_fit(&dtm, &cfg).unwrap();
        assert_eq!(a.theta.data(), b.theta.data());
        assert_eq!(a.beta.data(), b.beta.data());
    }

    #[test]
    fn doc_topics_embedding_is_theta() {
        let docs: Vec<TokenList> = vec![vec!["a".into(), "b".into()], vec!["b".into()]];
        let dtm = count_dtm(&docs);
        let model = lda_fit(
            &dtm,
            &LdaConfig {
                k: 2,
                iterations: 10,
                burn_in: 5,
                ..LdaConfig::default()
            },
        )
        .unwrap();
        let emb = lda_doc_topics(&model, vec!["d0".into(), "d1".into()]).unwrap();
        assert_eq!(emb.dim(), 2);
        assert_eq!(emb.kind, EmbeddingKind::LdaTheta);
        for i in 0..2 {
            assert_eq!(emb.row(i), model.theta.row(i));
        }
    }

    #[test]
    fn relative_importance_ratio_and_identity() {
        // Two groups with known shares: group a has theta column 0 at 0.2,
        // the corpus mean of column 0 is 0.1 -> ratio 2.0.
        let theta = DenseMatrix::from_rows(&[
            vec![0.2, 0.8],
            vec![0.0, 1.0],
        ]);
        let labels = vec!["a".to_string(), "b".to_string()];
        let (names, ratios) = topic_relative_importance(&theta, &labels).unwrap();
        assert_eq!(names, vec!["a", "b"]);
        assert!((ratios.get(0, 0) - 2.0).abs() < 1e-12);

        // A single group covering the corpus is the identity.
        let labels = vec!["all".to_string(), "all".to_string()];
        let (_, ratios) = topic_relative_importance(&theta, &labels).unwrap();
        assert!((ratios.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((ratios.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_weighted_group_means_average_to_one() {
        let theta = DenseMatrix::from_rows(&[
            vec![0.7, 0.3],
            vec![0.2, 0.8],
            vec![0.5, 0.5],
        ]);
        let labels = vec!["x".to_string(), "y".to_string(), "x".to_string()];
        let (names, ratios) = topic_relative_importance(&theta, &labels).unwrap();
        let sizes: Vec<f64> = names
            .iter()
            .map(|l| labels.iter().filter(|x| *x == l).count() as f64)
            .collect();
        let n: f64 = sizes.iter().sum();
        for k in 0..2 {
            let weighted: f64 = (0..names.len())
                .map(|g| ratios.get(g, k) * sizes[g] / n)
                .sum();
            assert!((weighted - 1.0).abs() < 1e-12, "topic {k}: {weighted}");
        }
    }

    #[test]
    fn planted_topics_are_recovered() {
        // Three topics with disjoint word blocks; every document mixes them.
        let k = 3;
        let block = 4; // words per topic
        let mut rng = substream(17, "planted");
        let mut docs: Vec<TokenList> = Vec::new();
        for _ in 0..90 {
            let mut doc = Vec::new();
            let main = crate::rng::below(&mut rng, k);
            for _ in 0..30 {
                let topic = if crate::rng::uniform(&mut rng) < 0.8 {
                    main
                } else {
                    crate::rng::below(&mut rng, k)
                };
                let w = topic * block + crate::rng::below(&mut rng, block);
                doc.push(format!("w{w:02}"));
            }
            docs.push(doc);
        }
        let dtm = count_dtm(&docs);
        let cfg = LdaConfig {
            k,
            iterations: 150,
            burn_in: 75,
            seed: 3,
            ..LdaConfig::default()
        };
        let model = lda_fit(&dtm, &cfg).unwrap();
        stochastic_rows(&model.beta);
        stochastic_rows(&model.theta);

        // Greedy-match fitted topics to planted blocks by cosine.
        let v = model.beta.cols();
        let mut truth = DenseMatrix::<f64>::zeros(k, v);
        for t in 0..k {
            for w in 0..block {
                truth.set(t, t * block + w, 1.0 / block as f64);
            }
        }
        let mut used = vec![false; k];
        let mut total = 0.0;
        for t in 0..k {
            let mut best = (0, f64::MIN);
            for f in 0..k {
                if used[f] {
                    continue;
                }
                let cos = crate::analysis::cosine(truth.row(t), model.beta.row(f)).unwrap();
                if cos > best.1 {
                    best = (f, cos);
                }
            }
            used[best.0] = true;
            total += best.1;
        }
        assert!(total / k as f64 > 0.85, "mean matched cosine {}", total / k as f64);
    }
}
