//! Distributed-memory paragraph vectors.
//!
//! Predicts each center word from the concatenation of the document vector
//! and the (padded) context word vectors, trained with negative-sampling
//! logistic loss. Negatives are drawn from the unigram distribution raised
//! to the 3/4 power. Single-threaded so a seed fixes the result bit for bit.

use rand_chacha::ChaCha20Rng;

use super::{EmbeddingKind, EmbeddingMatrix};
use crate::corpus::{TokenList, Vocabulary};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{substream, uniform};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct PvdmConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    pub initial_lr: f64,
    pub final_lr: f64,
}

impl Default for PvdmConfig {
    fn default() -> Self {
        Self {
            dim: 20,
            window: 10,
            negatives: 5,
            epochs: 10,
            seed: 0,
            initial_lr: 0.025,
            final_lr: 1e-4,
        }
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Negative-sampling logistic loss of one (positive, negatives) score set.
pub fn negative_sampling_loss(pos_logit: f64, neg_logits: &[f64]) -> f64 {
    let mut loss = -sigmoid(pos_logit).ln();
    for &s in neg_logits {
        loss -= sigmoid(-s).ln();
    }
    loss
}

/// Cumulative unigram^0.75 table for negative sampling.
struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(counts: &[usize]) -> Self {
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut acc = 0.0;
        for &c in counts {
            acc += (c as f64).powf(0.75);
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let target = uniform(rng) * total;
        self.cumulative.partition_point(|&c| c <= target).min(self.cumulative.len() - 1)
    }
}

fn init_uniform<S: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> DenseMatrix<S> {
    let half = 0.5 / cols as f64;
    let mut m = DenseMatrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = S::from_f64_lossy((uniform(rng) * 2.0 - 1.0) * half);
    }
    m
}

/// Train document vectors. Returns one row per document, labeled by `ids`.
pub fn pvdm_fit<S: Scalar>(
    documents: &[TokenList],
    ids: &[String],
    vocab: &Vocabulary,
    cfg: &PvdmConfig,
) -> Result<EmbeddingMatrix<S>> {
    if cfg.dim < 1 {
        return Err(Error::InvalidArgument("dim must be at least 1".into()));
    }
    if documents.len() != ids.len() {
        return Err(Error::ShapeMismatch {
            op: "pvdm_fit",
            details: format!("{} documents vs {} ids", documents.len(), ids.len()),
        });
    }
    let n = documents.len();
    let v = vocab.len();
    let dim = cfg.dim;
    let context_slots = 2 * cfg.window;
    let input_dim = dim * (context_slots + 1);
    let null_word = v; // padding id, an extra trainable row

    // In-vocabulary word ids per document.
    let docs: Vec<Vec<usize>> = documents
        .iter()
        .map(|doc| doc.iter().filter_map(|t| vocab.id(t)).collect())
        .collect();
    let mut counts = vec![0usize; v];
    for doc in &docs {
        for &w in doc {
            counts[w] += 1;
        }
    }
    let table = NegativeTable::new(&counts);

    let mut doc_vecs: DenseMatrix<S> = init_uniform(n, dim, &mut substream(cfg.seed, "pvdm-doc"));
    let mut word_vecs: DenseMatrix<S> =
        init_uniform(v + 1, dim, &mut substream(cfg.seed, "pvdm-word"));
    let mut out_vecs: DenseMatrix<S> = DenseMatrix::zeros(v, input_dim);

    let total_positions: usize = docs.iter().map(Vec::len).sum::<usize>().max(1) * cfg.epochs.max(1);
    let mut rng = substream(cfg.seed, "pvdm-train");
    let mut x = vec![S::zero(); input_dim];
    let mut x_grad = vec![S::zero(); input_dim];
    let mut seen = 0usize;

    for _epoch in 0..cfg.epochs {
        for (d, doc) in docs.iter().enumerate() {
            for t in 0..doc.len() {
                let lr_f = cfg.initial_lr
                    - (cfg.initial_lr - cfg.final_lr) * (seen as f64 / total_positions as f64);
                let lr = S::from_f64_lossy(lr_f);
                seen += 1;

                let center = doc[t];
                // Assemble the input: document vector then 2w context slots,
                // padded with the null word outside the document.
                x[..dim].copy_from_slice(doc_vecs.row(d));
                let mut slot = 1;
                for offset in 1..=cfg.window {
                    for pos in [t.checked_sub(offset), Some(t + offset)] {
                        let w = match pos {
                            Some(p) if p < doc.len() && p != t => doc[p],
                            _ => null_word,
                        };
                        x[slot * dim..(slot + 1) * dim].copy_from_slice(word_vecs.row(w));
                        slot += 1;
                    }
                }
                debug_assert_eq!(slot, context_slots + 1);

                x_grad.iter_mut().for_each(|g| *g = S::zero());
                // One positive plus k negatives.
                for sample in 0..=cfg.negatives {
                    let (word, label) = if sample == 0 {
                        (center, S::one())
                    } else {
                        let mut neg = table.sample(&mut rng);
                        if neg == center {
                            neg = (neg + 1) % v;
                        }
                        (neg, S::zero())
                    };
                    let out = out_vecs.row_mut(word);
                    let logit: S = x.iter().zip(out.iter()).map(|(&a, &b)| a * b).sum();
                    let g = sigmoid(logit) - label;
                    let step = lr * g;
                    for (xg, &o) in x_grad.iter_mut().zip(out.iter()) {
                        *xg += g * o;
                    }
                    for (o, &xi) in out.iter_mut().zip(x.iter()) {
                        *o -= step * xi;
                    }
                }
                // Push the accumulated input gradient back to the document
                // vector and each context word vector.
                for (dv, &g) in doc_vecs.row_mut(d).iter_mut().zip(&x_grad[..dim]) {
                    *dv -= lr * g;
                }
                let mut slot = 1;
                for offset in 1..=cfg.window {
                    for pos in [t.checked_sub(offset), Some(t + offset)] {
                        let w = match pos {
                            Some(p) if p < doc.len() && p != t => doc[p],
                            _ => null_word,
                        };
                        let grad = &x_grad[slot * dim..(slot + 1) * dim];
                        for (wv, &g) in word_vecs.row_mut(w).iter_mut().zip(grad) {
                            *wv -= lr * g;
                        }
                        slot += 1;
                    }
                }
            }
        }
    }

    EmbeddingMatrix::new(ids.to_vec(), doc_vecs, EmbeddingKind::Pvdm)
}
