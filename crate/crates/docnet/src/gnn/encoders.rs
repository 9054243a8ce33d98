//! The six encoder architectures.

use std::collections::BTreeMap;
use std::rc::Rc;

use rand_chacha::ChaCha20Rng;

use super::context::{normalize_neighbor_lists, GraphContext};
use super::{EncoderConfig, EncoderKind};
use crate::autodiff::{BatchNormState, Tape, TensorId};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::uniform;
use crate::scalar::Scalar;

/// Result of one encoder forward pass: the embedding tensor and the tape
/// ids the parameters were bound to, for gradient lookup.
#[derive(Debug)]
pub struct Forwarded {
    pub z: TensorId,
    pub bound: Vec<(String, TensorId)>,
}

/// One encoder instance: configuration, named parameters, and batch-norm
/// running statistics where the architecture uses them.
#[derive(Debug, Clone)]
pub struct Encoder<S: Scalar> {
    pub config: EncoderConfig,
    pub in_dim: usize,
    params: Vec<(String, DenseMatrix<S>)>,
    bn: Vec<BatchNormState<S>>,
}

fn glorot<S: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> DenseMatrix<S> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = DenseMatrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = S::from_f64_lossy((uniform(rng) * 2.0 - 1.0) * limit);
    }
    m
}

impl<S: Scalar> Encoder<S> {
    /// Seeded Glorot-uniform initialization of all weights.
    pub fn new(config: EncoderConfig, in_dim: usize, rng: &mut ChaCha20Rng) -> Result<Self> {
        config.validate()?;
        if in_dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be positive".into()));
        }
        let mut params: Vec<(String, DenseMatrix<S>)> = Vec::new();
        let mut bn = Vec::new();
        let push = |name: String, m: DenseMatrix<S>, params: &mut Vec<(String, DenseMatrix<S>)>| {
            params.push((name, m));
        };
        let hidden = config.hidden_dim;
        let out = config.out_dim;
        match config.kind {
            EncoderKind::Gcn => {
                push("gcn.w0".into(), glorot(in_dim, hidden, rng), &mut params);
                push("gcn.w1".into(), glorot(hidden, out, rng), &mut params);
            }
            EncoderKind::Sage => {
                push("sage.w0".into(), glorot(2 * in_dim, hidden, rng), &mut params);
                push("sage.w1".into(), glorot(2 * hidden, out, rng), &mut params);
            }
            EncoderKind::Gin => {
                let mut d_in = in_dim;
                for layer in 0..config.depth {
                    let d_out = if layer + 1 == config.depth { out } else { hidden };
                    push(format!("gin.l{layer}.w"), glorot(d_in, d_out, rng), &mut params);
                    push(
                        format!("gin.l{layer}.gamma"),
                        DenseMatrix::from_vec(1, d_out, vec![S::one(); d_out]),
                        &mut params,
                    );
                    push(
                        format!("gin.l{layer}.beta"),
                        DenseMatrix::zeros(1, d_out),
                        &mut params,
                    );
                    bn.push(BatchNormState::new(d_out));
                    d_in = d_out;
                }
            }
            EncoderKind::Gat => {
                let head_dim = hidden / config.heads;
                for h in 0..config.heads {
                    push(format!("gat.l0.h{h}.w"), glorot(in_dim, head_dim, rng), &mut params);
                    push(format!("gat.l0.h{h}.a_src"), glorot(1, head_dim, rng), &mut params);
                    push(format!("gat.l0.h{h}.a_dst"), glorot(1, head_dim, rng), &mut params);
                }
                for h in 0..config.heads {
                    push(format!("gat.l1.h{h}.w"), glorot(hidden, out, rng), &mut params);
                    push(format!("gat.l1.h{h}.a_src"), glorot(1, out, rng), &mut params);
                    push(format!("gat.l1.h{h}.a_dst"), glorot(1, out, rng), &mut params);
                }
            }
            EncoderKind::Agnn => {
                push("agnn.proj".into(), glorot(in_dim, out, rng), &mut params);
                for layer in 0..config.depth {
                    push(
                        format!("agnn.beta{layer}"),
                        DenseMatrix::scalar(S::one()),
                        &mut params,
                    );
                }
            }
            EncoderKind::GraphUnet => {
                push("unet.w_in".into(), glorot(in_dim, out, rng), &mut params);
                for layer in 0..config.depth {
                    push(format!("unet.l{layer}.p"), glorot(1, out, rng), &mut params);
                    push(format!("unet.l{layer}.w_down"), glorot(out, out, rng), &mut params);
                    push(format!("unet.l{layer}.w_up"), glorot(out, out, rng), &mut params);
                }
            }
        }
        Ok(Self {
            config,
            in_dim,
            params,
            bn,
        })
    }

    pub fn params(&self) -> &[(String, DenseMatrix<S>)] {
        &self.params
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut DenseMatrix<S>> {
        self.params
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }

    /// Parameters plus batch-norm running statistics, for checkpoints.
    pub fn named_state(&self) -> Vec<(String, DenseMatrix<S>)> {
        let mut out = self.params.clone();
        for (i, state) in self.bn.iter().enumerate() {
            out.push((
                format!("bn{i}.running_mean"),
                DenseMatrix::from_vec(1, state.running_mean.len(), state.running_mean.clone()),
            ));
            out.push((
                format!("bn{i}.running_var"),
                DenseMatrix::from_vec(1, state.running_var.len(), state.running_var.clone()),
            ));
        }
        out
    }

    /// Restore parameters and batch-norm statistics saved by
    /// [`Encoder::named_state`].
    pub fn load_state(&mut self, state: &[(String, DenseMatrix<S>)]) -> Result<()> {
        for (name, value) in state {
            if let Some(rest) = name.strip_prefix("bn") {
                let (idx, field) = rest.split_once('.').ok_or_else(|| {
                    Error::BadFormat(format!("bad state entry `{name}`"))
                })?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| Error::BadFormat(format!("bad state entry `{name}`")))?;
                let slot = self
                    .bn
                    .get_mut(idx)
                    .ok_or_else(|| Error::BadFormat(format!("no batch-norm layer {idx}")))?;
                match field {
                    "running_mean" => slot.running_mean = value.data().to_vec(),
                    "running_var" => slot.running_var = value.data().to_vec(),
                    other => {
                        return Err(Error::BadFormat(format!("bad state field `{other}`")))
                    }
                }
            } else {
                let slot = self.param_mut(name).ok_or_else(|| {
                    Error::BadFormat(format!("unknown parameter `{name}`"))
                })?;
                if slot.shape() != value.shape() {
                    return Err(Error::ShapeMismatch {
                        op: "load_state",
                        details: format!("{name}: {:?} vs {:?}", slot.shape(), value.shape()),
                    });
                }
                *slot = value.clone();
            }
        }
        Ok(())
    }

    /// Run the encoder over `features`, recording onto `tape`.
    pub fn forward(
        &mut self,
        tape: &mut Tape<S>,
        ctx: &GraphContext<S>,
        features: &DenseMatrix<S>,
        train: bool,
        rng: &mut ChaCha20Rng,
    ) -> Result<Forwarded> {
        if features.rows() != ctx.n {
            return Err(Error::ShapeMismatch {
                op: "encoder-forward",
                details: format!("{} feature rows vs {} nodes", features.rows(), ctx.n),
            });
        }
        if features.cols() != self.in_dim {
            return Err(Error::ShapeMismatch {
                op: "encoder-forward",
                details: format!("{} feature cols vs in_dim {}", features.cols(), self.in_dim),
            });
        }
        let x = tape.input(features.clone(), false);
        let bound: Vec<(String, TensorId)> = self
            .params
            .iter()
            .map(|(name, m)| (name.clone(), tape.input(m.clone(), true)))
            .collect();
        let ids: BTreeMap<&str, TensorId> =
            bound.iter().map(|(n, id)| (n.as_str(), *id)).collect();
        let id = |name: &str| -> TensorId { ids[name] };

        let z = match self.config.kind {
            EncoderKind::Gcn => {
                let adj = tape.sparse_input(ctx.norm_adj.clone());
                let h = tape.spmm(adj, x)?;
                let h = tape.matmul(h, id("gcn.w0"))?;
                let h = tape.relu(h);
                let h = tape.spmm(adj, h)?;
                tape.matmul(h, id("gcn.w1"))?
            }
            EncoderKind::Sage => {
                let mean = tape.sparse_input(ctx.mean_adj.clone());
                let mut h = x;
                for layer in 0..2 {
                    let agg = tape.spmm(mean, h)?;
                    let cat = tape.concat_cols(h, agg)?;
                    let lin = tape.matmul(cat, id(&format!("sage.w{layer}")))?;
                    let act = if layer == 0 { tape.relu(lin) } else { lin };
                    h = tape.row_l2_normalize(act);
                }
                h
            }
            EncoderKind::Gin => {
                let sum = tape.sparse_input(ctx.sum_adj.clone());
                let self_scale = S::from_f64_lossy(1.0 + self.config.gin_eps);
                let mut h = x;
                for layer in 0..self.config.depth {
                    let agg = tape.spmm(sum, h)?;
                    let scaled = tape.scale(h, self_scale)?;
                    let combined = tape.add(scaled, agg)?;
                    let lin = tape.matmul(combined, id(&format!("gin.l{layer}.w")))?;
                    let normed = tape.batch_norm(
                        lin,
                        id(&format!("gin.l{layer}.gamma")),
                        id(&format!("gin.l{layer}.beta")),
                        &mut self.bn[layer],
                        train,
                    )?;
                    h = tape.elu(normed);
                }
                tape.row_l2_normalize(h)
            }
            EncoderKind::Gat => {
                let p = self.config.dropout;
                let heads = self.config.heads;
                let mut h = x;
                for layer in 0..2 {
                    let x_in = tape.dropout(h, p, train, rng)?;
                    let mut head_outputs = Vec::with_capacity(heads);
                    for head in 0..heads {
                        let prefix = format!("gat.l{layer}.h{head}");
                        let wh = tape.matmul(x_in, id(&format!("{prefix}.w")))?;
                        let a_src = tape.transpose(id(&format!("{prefix}.a_src")))?;
                        let a_dst = tape.transpose(id(&format!("{prefix}.a_dst")))?;
                        let f_src = tape.matmul(wh, a_src)?;
                        let f_dst = tape.matmul(wh, a_dst)?;
                        let e_src = tape.gather_rows(f_src, ctx.att_src.clone())?;
                        let e_dst = tape.gather_rows(f_dst, ctx.att_dst.clone())?;
                        let e = tape.add(e_src, e_dst)?;
                        let e = tape.leaky_relu(e);
                        let alpha = tape.segment_softmax(e, ctx.att_segments.clone())?;
                        let alpha = tape.dropout(alpha, p, train, rng)?;
                        let msg = tape.gather_rows(wh, ctx.att_src.clone())?;
                        let weighted = tape.mul(msg, alpha)?;
                        head_outputs.push(tape.segment_sum(weighted, ctx.att_segments.clone())?);
                    }
                    let combined = if layer == 0 {
                        let mut acc = head_outputs[0];
                        for &ho in &head_outputs[1..] {
                            acc = tape.concat_cols(acc, ho)?;
                        }
                        tape.elu(acc)
                    } else {
                        let mut acc = head_outputs[0];
                        for &ho in &head_outputs[1..] {
                            acc = tape.add(acc, ho)?;
                        }
                        tape.scale(acc, S::from_f64_lossy(1.0 / heads as f64))?
                    };
                    h = combined;
                }
                h
            }
            EncoderKind::Agnn => {
                let lin = tape.matmul(x, id("agnn.proj"))?;
                let mut h = tape.relu(lin);
                for layer in 0..self.config.depth {
                    let hn = tape.row_l2_normalize(h);
                    let n_src = tape.gather_rows(hn, ctx.att_src.clone())?;
                    let n_dst = tape.gather_rows(hn, ctx.att_dst.clone())?;
                    let cos = tape.rowwise_dot(n_src, n_dst)?;
                    let scores = tape.mul(cos, id(&format!("agnn.beta{layer}")))?;
                    let p = tape.segment_softmax(scores, ctx.att_segments.clone())?;
                    let msg = tape.gather_rows(h, ctx.att_src.clone())?;
                    let weighted = tape.mul(msg, p)?;
                    h = tape.segment_sum(weighted, ctx.att_segments.clone())?;
                }
                h
            }
            EncoderKind::GraphUnet => {
                let p_drop = self.config.dropout;
                let ratio = self.config.pool_ratio;
                let adj0 = tape.sparse_input(ctx.norm_adj.clone());
                let lin = tape.spmm(adj0, x)?;
                let lin = tape.matmul(lin, id("unet.w_in"))?;
                let mut h = tape.relu(lin);
                let mut adjacency = ctx.neighbors.clone();
                let mut norm_id = adj0;
                let mut stack: Vec<(TensorId, crate::autodiff::SparseId, usize, Rc<Vec<usize>>)> =
                    Vec::new();
                for layer in 0..self.config.depth {
                    let n_here = tape.value(h).rows();
                    let p_vec = tape.row_l2_normalize(id(&format!("unet.l{layer}.p")));
                    let p_col = tape.transpose(p_vec)?;
                    let scores = tape.matmul(h, p_col)?;
                    let keep = ((ratio * n_here as f64).ceil() as usize).clamp(1, n_here);
                    let kept = Rc::new(top_k_by_score(tape.value(scores), keep));
                    let gate_scores = tape.gather_rows(scores, kept.clone())?;
                    let gate = tape.tanh(gate_scores);
                    let pooled = tape.gather_rows(h, kept.clone())?;
                    let gated = tape.mul(pooled, gate)?;
                    stack.push((h, norm_id, n_here, kept.clone()));
                    adjacency = induced_subgraph(&adjacency, &kept);
                    norm_id = tape.sparse_input(normalize_neighbor_lists(&adjacency));
                    let dropped = tape.dropout(gated, p_drop, train, rng)?;
                    let conv = tape.spmm(norm_id, dropped)?;
                    let conv = tape.matmul(conv, id(&format!("unet.l{layer}.w_down")))?;
                    h = tape.relu(conv);
                }
                for layer in (0..self.config.depth).rev() {
                    let (skip, level_norm, level_n, kept) = stack[layer].clone();
                    let restored = tape.scatter_rows(h, kept, level_n)?;
                    let merged = tape.add(restored, skip)?;
                    let dropped = tape.dropout(merged, p_drop, train, rng)?;
                    let conv = tape.spmm(level_norm, dropped)?;
                    let conv = tape.matmul(conv, id(&format!("unet.l{layer}.w_up")))?;
                    h = if layer > 0 { tape.relu(conv) } else { conv };
                }
                h
            }
        };
        Ok(Forwarded { z, bound })
    }
}

/// Indices of the `k` largest scores in a column vector, ties broken by the
/// lower index.
pub fn top_k_by_score<S: Scalar>(scores: &DenseMatrix<S>, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.rows()).collect();
    order.sort_by(|&a, &b| {
        scores
            .get(b, 0)
            .partial_cmp(&scores.get(a, 0))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

/// Neighbor lists of the subgraph induced by `kept`, in `kept` order.
fn induced_subgraph(adjacency: &[Vec<usize>], kept: &[usize]) -> Vec<Vec<usize>> {
    let mut new_of = vec![usize::MAX; adjacency.len()];
    for (new, &old) in kept.iter().enumerate() {
        new_of[old] = new;
    }
    kept.iter()
        .map(|&old| {
            let mut list: Vec<usize> = adjacency[old]
                .iter()
                .filter(|&&nb| new_of[nb] != usize::MAX)
                .map(|&nb| new_of[nb])
                .collect();
            list.sort_unstable();
            list
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CitationGraph;
    use crate::rng::substream;

    fn path3() -> CitationGraph {
        CitationGraph::from_index_edges(
            vec!["a".into(), "b".into(), "c".into()],
            &[(0, 1), (1, 2)],
        )
    }

    fn forward_once(
        kind: EncoderKind,
        graph: &CitationGraph,
        features: &DenseMatrix<f64>,
        seed: u64,
        train: bool,
    ) -> DenseMatrix<f64> {
        let ctx: GraphContext<f64> = GraphContext::build(graph);
        let cfg = EncoderConfig::for_kind(kind);
        let mut enc: Encoder<f64> =
            Encoder::new(cfg, features.cols(), &mut substream(seed, "init")).unwrap();
        let mut tape = Tape::new();
        let mut rng = substream(seed, "dropout");
        let fwd = enc
            .forward(&mut tape, &ctx, features, train, &mut rng)
            .unwrap();
        tape.value(fwd.z).clone()
    }

    #[test]
    fn gcn_layer_with_identity_weights_reproduces_normalized_adjacency() {
        // One convolution with identity features and identity weights and no
        // activation is exactly the normalized adjacency.
        let ctx: GraphContext<f64> = GraphContext::build(&path3());
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.input(DenseMatrix::eye(3), false);
        let w = tape.input(DenseMatrix::eye(3), false);
        let adj = tape.sparse_input(ctx.norm_adj.clone());
        let h = tape.spmm(adj, x).unwrap();
        let h = tape.matmul(h, w).unwrap();
        let got = tape.value(h);
        assert!((got.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((got.get(0, 1) - 1.0 / 6.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(got.get(0, 2), 0.0);
    }

    #[test]
    fn zero_weights_annihilate_the_gcn_output() {
        let ctx: GraphContext<f64> = GraphContext::build(&path3());
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.input(DenseMatrix::eye(3), false);
        let w = tape.input(DenseMatrix::zeros(3, 2), false);
        let adj = tape.sparse_input(ctx.norm_adj.clone());
        let h = tape.spmm(adj, x).unwrap();
        let h = tape.matmul(h, w).unwrap();
        assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sage_layer_hand_values() {
        // Path graph, scalar features [1,2,3], W = [1,1]^T, no activation:
        // concat(h, neighbor-mean) * W = h + mean = [3,4,5].
        let ctx: GraphContext<f64> = GraphContext::build(&path3());
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.input(DenseMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]), false);
        let w = tape.input(DenseMatrix::from_vec(2, 1, vec![1.0, 1.0]), false);
        let mean = tape.sparse_input(ctx.mean_adj.clone());
        let agg = tape.spmm(mean, h).unwrap();
        let cat = tape.concat_cols(h, agg).unwrap();
        let out = tape.matmul(cat, w).unwrap();
        assert_eq!(tape.value(out).data(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn isolated_node_aggregates_a_zero_neighbor_mean() {
        let g = CitationGraph::from_index_edges(
            vec!["a".into(), "b".into(), "c".into()],
            &[(0, 1)],
        );
        let ctx: GraphContext<f64> = GraphContext::build(&g);
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.input(DenseMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]), false);
        let mean = tape.sparse_input(ctx.mean_adj.clone());
        let agg = tape.spmm(mean, h).unwrap();
        assert_eq!(tape.value(agg).get(2, 0), 0.0);
    }

    #[test]
    fn sage_rows_are_unit_or_zero() {
        let mut rng = substream(4, "sage-feat");
        let mut features = DenseMatrix::zeros(3, 5);
        for v in features.data_mut() {
            *v = crate::rng::gaussian(&mut rng);
        }
        let z = forward_once(EncoderKind::Sage, &path3(), &features, 11, false);
        for i in 0..z.rows() {
            let norm = z.row_norm(i);
            assert!(norm.abs() < 1e-12 || (norm - 1.0).abs() < 1e-9, "row {i}: {norm}");
        }
    }

    #[test]
    fn gin_sum_aggregation_hand_values() {
        // Path graph, features [1,2,3], identity mlp, eps 0: [3,6,5].
        let ctx: GraphContext<f64> = GraphContext::build(&path3());
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.input(DenseMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]), false);
        let sum = tape.sparse_input(ctx.sum_adj.clone());
        let agg = tape.spmm(sum, h).unwrap();
        let scaled = tape.scale(h, 1.0).unwrap();
        let out = tape.add(scaled, agg).unwrap();
        assert_eq!(tape.value(out).data(), &[3.0, 6.0, 5.0]);

        // eps = -1 cancels the self term: [2,4,2].
        let scaled = tape.scale(h, 1.0 + (-1.0)).unwrap();
        let out = tape.add(scaled, agg).unwrap();
        assert_eq!(tape.value(out).data(), &[2.0, 4.0, 2.0]);
    }

    #[test]
    fn gin_without_edges_is_the_mlp_of_the_features() {
        let g = CitationGraph::from_index_edges(
            vec!["a".into(), "b".into()],
            &[],
        );
        let ctx: GraphContext<f64> = GraphContext::build(&g);
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.input(DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]), false);
        let sum = tape.sparse_input(ctx.sum_adj.clone());
        let agg = tape.spmm(sum, h).unwrap();
        let scaled = tape.scale(h, 1.0).unwrap();
        let out = tape.add(scaled, agg).unwrap();
        assert_eq!(tape.value(out).data(), &[1.0, 2.0]);
    }

    #[test]
    fn equal_attention_scores_reduce_to_neighborhood_mean() {
        // With W = I and zero attention vectors, every edge scores zero, the
        // softmax is uniform over N(v) ∪ {v}, and the output is the plain
        // neighborhood-mean oracle.
        let g = path3();
        let ctx: GraphContext<f64> = GraphContext::build(&g);
        let features = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![2.0, 2.0],
        ]);
        let cfg = EncoderConfig {
            heads: 1,
            hidden_dim: 2,
            out_dim: 2,
            dropout: 0.0,
            ..EncoderConfig::for_kind(EncoderKind::Gat)
        };
        let mut enc: Encoder<f64> = Encoder::new(cfg, 2, &mut substream(0, "init")).unwrap();
        *enc.param_mut("gat.l0.h0.w").unwrap() = DenseMatrix::eye(2);
        *enc.param_mut("gat.l0.h0.a_src").unwrap() = DenseMatrix::zeros(1, 2);
        *enc.param_mut("gat.l0.h0.a_dst").unwrap() = DenseMatrix::zeros(1, 2);

        let mut tape = Tape::new();
        let mut rng = substream(0, "dropout");
        // Build only the first layer by hand through the encoder internals:
        // run the full forward but with the second layer set to identity-ish
        // isn't possible, so check against the dense oracle on layer 0 via
        // a 1-layer construction: reuse the forward and compare the *first*
        // layer by setting layer-1 weights to identity and attention to 0,
        // which averages the first-layer outputs over N(v) ∪ {v} again.
        *enc.param_mut("gat.l1.h0.w").unwrap() = DenseMatrix::eye(2);
        *enc.param_mut("gat.l1.h0.a_src").unwrap() = DenseMatrix::zeros(1, 2);
        *enc.param_mut("gat.l1.h0.a_dst").unwrap() = DenseMatrix::zeros(1, 2);
        let fwd = enc.forward(&mut tape, &ctx, &features, false, &mut rng).unwrap();
        let z = tape.value(fwd.z).clone();

        // Dense oracle: two rounds of mean over N(v) ∪ {v} with an ELU
        // between (matching the encoder's first-layer activation).
        let neighborhood_mean = |m: &DenseMatrix<f64>| {
            let mut out = DenseMatrix::zeros(3, 2);
            for v in 0..3 {
                let mut members = g.neighbors(v).to_vec();
                members.push(v);
                for &u in &members {
                    for j in 0..2 {
                        let x = out.get(v, j) + m.get(u, j) / members.len() as f64;
                        out.set(v, j, x);
                    }
                }
            }
            out
        };
        let elu = |m: &DenseMatrix<f64>| m.map(|v| if v > 0.0 { v } else { v.exp() - 1.0 });
        let want = neighborhood_mean(&elu(&neighborhood_mean(&features)));
        assert!(z.max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn agnn_with_zero_beta_propagates_uniformly() {
        let g = path3();
        let ctx: GraphContext<f64> = GraphContext::build(&g);
        let features = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ]);
        let cfg = EncoderConfig {
            depth: 1,
            out_dim: 2,
            ..EncoderConfig::for_kind(EncoderKind::Agnn)
        };
        let mut enc: Encoder<f64> = Encoder::new(cfg, 2, &mut substream(1, "init")).unwrap();
        *enc.param_mut("agnn.proj").unwrap() = DenseMatrix::eye(2);
        *enc.param_mut("agnn.beta0").unwrap() = DenseMatrix::scalar(0.0);
        let mut tape = Tape::new();
        let mut rng = substream(1, "dropout");
        let fwd = enc.forward(&mut tape, &ctx, &features, false, &mut rng).unwrap();
        let z = tape.value(fwd.z).clone();
        // Node 0 neighborhood {0,1}: mean of rows 0 and 1.
        assert!((z.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((z.get(0, 1) - 0.5).abs() < 1e-12);
        // Node 1 neighborhood {0,1,2}.
        assert!((z.get(1, 0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn agnn_with_large_beta_concentrates_on_the_aligned_neighbor() {
        // Star around node 0: one neighbor parallel to the center, two
        // orthogonal. With beta = 10 the propagation weight of the aligned
        // neighbor dominates, matching the dense softmax oracle.
        let g = CitationGraph::from_index_edges(
            (0..4).map(|i| i.to_string()).collect(),
            &[(0, 1), (0, 2), (0, 3)],
        );
        let ctx: GraphContext<f64> = GraphContext::build(&g);
        let features = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let cfg = EncoderConfig {
            depth: 1,
            out_dim: 3,
            ..EncoderConfig::for_kind(EncoderKind::Agnn)
        };
        let mut enc: Encoder<f64> = Encoder::new(cfg, 3, &mut substream(2, "init")).unwrap();
        *enc.param_mut("agnn.proj").unwrap() = DenseMatrix::eye(3);
        *enc.param_mut("agnn.beta0").unwrap() = DenseMatrix::scalar(10.0);
        let mut tape = Tape::new();
        let mut rng = substream(2, "dropout");
        let fwd = enc.forward(&mut tape, &ctx, &features, false, &mut rng).unwrap();
        let z = tape.value(fwd.z).clone();
        // Dense oracle at node 0 over {0,1,2,3}: cosines [1,1,0,0].
        let e10 = 10.0f64.exp();
        let denom = 2.0 * e10 + 2.0;
        let aligned_weight = 2.0 * e10 / denom;
        assert!((z.get(0, 0) - aligned_weight).abs() < 1e-10);
        assert!(aligned_weight >= 0.95);
    }

    #[test]
    fn top_k_selects_highest_scores() {
        let scores = DenseMatrix::from_rows(&[vec![0.2], vec![0.9], vec![-0.5]]);
        assert_eq!(top_k_by_score(&scores, 1), vec![1]);
        assert_eq!(top_k_by_score(&scores, 2), vec![1, 0]);
        // Ties break toward the lower index.
        let tied = DenseMatrix::from_rows(&[vec![0.5], vec![0.5], vec![0.1]]);
        assert_eq!(top_k_by_score(&tied, 1), vec![0]);
    }

    #[test]
    fn induced_subgraph_remaps_and_filters() {
        let adjacency = vec![vec![1, 2], vec![0, 2], vec![0, 1, 3], vec![2]];
        let sub = induced_subgraph(&adjacency, &[2, 0]);
        // kept order: old 2 -> new 0, old 0 -> new 1.
        assert_eq!(sub, vec![vec![1], vec![0]]);
    }

    #[test]
    fn unet_pool_ratio_one_keeps_every_node() {
        let g = path3();
        let features = DenseMatrix::from_rows(&[
            vec![1.0, 0.2],
            vec![0.4, 0.8],
            vec![0.9, 0.1],
        ]);
        let cfg = EncoderConfig {
            pool_ratio: 1.0,
            depth: 2,
            dropout: 0.0,
            out_dim: 4,
            ..EncoderConfig::for_kind(EncoderKind::GraphUnet)
        };
        let ctx: GraphContext<f64> = GraphContext::build(&g);
        let mut enc: Encoder<f64> = Encoder::new(cfg, 2, &mut substream(3, "init")).unwrap();
        let mut tape = Tape::new();
        let mut rng = substream(3, "dropout");
        let fwd = enc.forward(&mut tape, &ctx, &features, false, &mut rng).unwrap();
        let z = tape.value(fwd.z);
        assert_eq!(z.shape(), (3, 4));
        assert!(z.is_finite());
    }

    #[test]
    fn every_encoder_produces_finite_embeddings_of_the_declared_shape() {
        let mut rng = substream(9, "all-feat");
        let g = CitationGraph::from_index_edges(
            (0..10).map(|i| i.to_string()).collect(),
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 9), (2, 7), (0, 5)],
        );
        let mut features = DenseMatrix::zeros(10, 6);
        for v in features.data_mut() {
            *v = crate::rng::gaussian(&mut rng);
        }
        for kind in EncoderKind::ALL {
            let z = forward_once(kind, &g, &features, 17, true);
            let cfg = EncoderConfig::for_kind(kind);
            assert_eq!(z.shape(), (10, cfg.out_dim), "{kind}");
            assert!(z.is_finite(), "{kind}");
        }
    }

    #[test]
    fn eval_mode_forward_is_bit_deterministic() {
        let g = path3();
        let mut features = DenseMatrix::zeros(3, 4);
        let mut rng = substream(6, "det");
        for v in features.data_mut() {
            *v = crate::rng::gaussian(&mut rng);
        }
        for kind in EncoderKind::ALL {
            let a = forward_once(kind, &g, &features, 23, false);
            let b = forward_once(kind, &g, &features, 23, false);
            assert_eq!(a.data(), b.data(), "{kind}");
        }
    }
}
