//! Reverse-mode automatic differentiation over dense matrices with
//! read-only sparse operands.
//!
//! A [`Tape`] records every primitive in execution order; [`Tape::backward`]
//! walks it in strict reverse, accumulating gradients for every tensor
//! reachable from a `requires_grad` leaf. Sparse tensors are operands only
//! and never receive gradients. One tape belongs to one thread and one
//! training step; encoders rebuild the graph every epoch.

mod grad_check;

pub use grad_check::{gradient_check, GradCheckReport};

use std::rc::Rc;

use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::uniform;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Handle to a dense tensor on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

/// Handle to a read-only sparse operand on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparseId(usize);

/// Edge grouping for the segment ops: rows `offsets[s]..offsets[s+1]`
/// belong to segment `s`.
#[derive(Debug, Clone)]
pub struct Segments {
    pub offsets: Vec<usize>,
}

impl Segments {
    pub fn new(offsets: Vec<usize>) -> Self {
        debug_assert!(offsets.windows(2).all(|w| w[0] <= w[1]));
        Self { offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_rows(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn range(&self, s: usize) -> std::ops::Range<usize> {
        self.offsets[s]..self.offsets[s + 1]
    }
}

/// Running statistics of one batch-norm layer.
#[derive(Debug, Clone)]
pub struct BatchNormState<S: Scalar> {
    pub running_mean: Vec<S>,
    pub running_var: Vec<S>,
}

impl<S: Scalar> BatchNormState<S> {
    pub fn new(features: usize) -> Self {
        Self {
            running_mean: vec![S::zero(); features],
            running_var: vec![S::one(); features],
        }
    }
}

const BN_MOMENTUM: f64 = 0.9;
const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Activation {
    Relu,
    LeakyRelu,
    Elu,
    Tanh,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MulKind {
    SameShape,
    /// Right operand is 1x1.
    ScalarRight,
    /// Right operand is a column vector broadcast across columns.
    ColumnRight,
}

#[derive(Debug, Clone)]
enum Op<S: Scalar> {
    Leaf,
    MatMul(TensorId, TensorId),
    Spmm(SparseId, TensorId),
    Transpose(TensorId),
    Add {
        a: TensorId,
        b: TensorId,
        broadcast_row: bool,
    },
    Mul {
        a: TensorId,
        b: TensorId,
        kind: MulKind,
    },
    Scale(TensorId, S),
    ConcatCols(TensorId, TensorId),
    Activate {
        x: TensorId,
        kind: Activation,
    },
    RowL2Normalize {
        x: TensorId,
        norms: Vec<S>,
    },
    BatchNorm {
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        x_hat: DenseMatrix<S>,
        inv_std: Vec<S>,
        train: bool,
    },
    Dropout {
        x: TensorId,
        mask: Rc<Vec<bool>>,
        keep: S,
    },
    GatherRows {
        x: TensorId,
        indices: Rc<Vec<usize>>,
    },
    ScatterRows {
        x: TensorId,
        indices: Rc<Vec<usize>>,
    },
    SegmentSoftmax {
        x: TensorId,
        segments: Rc<Segments>,
    },
    SegmentReduce {
        x: TensorId,
        segments: Rc<Segments>,
        mean: bool,
    },
    RowwiseDot(TensorId, TensorId),
    BceWithLogits {
        logits: TensorId,
        targets: DenseMatrix<S>,
    },
    ReduceMean(TensorId),
}

/// One recorded tensor: forward value, the producing op, and whether any
/// `requires_grad` leaf feeds it.
#[derive(Debug, Clone)]
pub struct Tensor<S: Scalar> {
    value: DenseMatrix<S>,
    op: Op<S>,
    needs_grad: bool,
}

/// Gradients keyed by tensor id, produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<S: Scalar> {
    grads: Vec<Option<DenseMatrix<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, id: TensorId) -> Option<&DenseMatrix<S>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient of `id`, or zeros of the given shape when the tensor is
    /// unreachable from the loss.
    pub fn get_or_zeros(&self, id: TensorId, rows: usize, cols: usize) -> DenseMatrix<S> {
        match self.get(id) {
            Some(g) => g.clone(),
            None => DenseMatrix::zeros(rows, cols),
        }
    }
}

/// Append-only op recorder.
#[derive(Debug, Default)]
pub struct Tape<S: Scalar> {
    nodes: Vec<Tensor<S>>,
    sparse: Vec<CsrMatrix<S>>,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            sparse: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: TensorId) -> &DenseMatrix<S> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: TensorId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    fn push(&mut self, value: DenseMatrix<S>, op: Op<S>, needs_grad: bool) -> TensorId {
        self.nodes.push(Tensor {
            value,
            op,
            needs_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn needs(&self, id: TensorId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn mismatch(op: &'static str, details: String) -> Error {
        Error::ShapeMismatch { op, details }
    }

    /// Insert a leaf tensor.
    pub fn input(&mut self, value: DenseMatrix<S>, requires_grad: bool) -> TensorId {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Insert a read-only sparse operand.
    pub fn sparse_input(&mut self, value: CsrMatrix<S>) -> SparseId {
        self.sparse.push(value);
        SparseId(self.sparse.len() - 1)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let value = self.value(a).matmul(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), needs))
    }

    /// Sparse-dense product `sparse * dense`.
    pub fn spmm(&mut self, a: SparseId, b: TensorId) -> Result<TensorId> {
        let sp = &self.sparse[a.0];
        let dense = self.value(b);
        if sp.cols() != dense.rows() {
            return Err(Self::mismatch(
                "spmm",
                format!("{}x{} * {}x{}", sp.rows(), sp.cols(), dense.rows(), dense.cols()),
            ));
        }
        let value = sp.matmul_dense(dense);
        let needs = self.needs(b);
        Ok(self.push(value, Op::Spmm(a, b), needs))
    }

    pub fn transpose(&mut self, x: TensorId) -> Result<TensorId> {
        let value = self.value(x).transpose();
        let needs = self.needs(x);
        Ok(self.push(value, Op::Transpose(x), needs))
    }

    /// Element-wise sum; a `1 x cols` right operand broadcasts over rows.
    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        let broadcast_row = (br, bc) == (1, ac) && ar != 1;
        if !broadcast_row && (ar, ac) != (br, bc) {
            return Err(Self::mismatch("add", format!("{ar}x{ac} + {br}x{bc}")));
        }
        let mut value = self.value(a).clone();
        let rhs = self.value(b);
        for i in 0..ar {
            let src = rhs.row(if broadcast_row { 0 } else { i });
            let dst = value.row_mut(i);
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add { a, b, broadcast_row }, needs))
    }

    /// Element-wise product. The right operand may also be `1 x 1` (scalar
    /// broadcast) or `rows x 1` (column broadcast).
    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        let kind = if (br, bc) == (ar, ac) {
            MulKind::SameShape
        } else if (br, bc) == (1, 1) {
            MulKind::ScalarRight
        } else if (br, bc) == (ar, 1) {
            MulKind::ColumnRight
        } else {
            return Err(Self::mismatch("mul", format!("{ar}x{ac} * {br}x{bc}")));
        };
        let mut value = self.value(a).clone();
        let rhs = self.value(b);
        match kind {
            MulKind::SameShape => {
                for (d, &s) in value.data_mut().iter_mut().zip(rhs.data()) {
                    *d *= s;
                }
            }
            MulKind::ScalarRight => value.scale_assign(rhs.get(0, 0)),
            MulKind::ColumnRight => {
                for i in 0..ar {
                    let c = rhs.get(i, 0);
                    for d in value.row_mut(i) {
                        *d *= c;
                    }
                }
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul { a, b, kind }, needs))
    }

    pub fn scale(&mut self, x: TensorId, c: S) -> Result<TensorId> {
        let mut value = self.value(x).clone();
        value.scale_assign(c);
        let needs = self.needs(x);
        Ok(self.push(value, Op::Scale(x, c), needs))
    }

    pub fn concat_cols(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ar != br {
            return Err(Self::mismatch(
                "concat-columns",
                format!("{ar}x{ac} | {br}x{bc}"),
            ));
        }
        let mut value = DenseMatrix::zeros(ar, ac + bc);
        for i in 0..ar {
            value.row_mut(i)[..ac].copy_from_slice(self.value(a).row(i));
            value.row_mut(i)[ac..].copy_from_slice(self.value(b).row(i));
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::ConcatCols(a, b), needs))
    }

    fn activate(&mut self, x: TensorId, kind: Activation) -> TensorId {
        let value = self.value(x).map(|v| apply_activation(v, kind));
        let needs = self.needs(x);
        self.push(value, Op::Activate { x, kind }, needs)
    }

    pub fn relu(&mut self, x: TensorId) -> TensorId {
        self.activate(x, Activation::Relu)
    }

    /// Leaky ReLU with fixed negative slope 0.2.
    pub fn leaky_relu(&mut self, x: TensorId) -> TensorId {
        self.activate(x, Activation::LeakyRelu)
    }

    pub fn elu(&mut self, x: TensorId) -> TensorId {
        self.activate(x, Activation::Elu)
    }

    pub fn tanh(&mut self, x: TensorId) -> TensorId {
        self.activate(x, Activation::Tanh)
    }

    pub fn sigmoid(&mut self, x: TensorId) -> TensorId {
        self.activate(x, Activation::Sigmoid)
    }

    /// Scale each row to unit Euclidean norm; all-zero rows stay zero.
    pub fn row_l2_normalize(&mut self, x: TensorId) -> TensorId {
        let src = self.value(x);
        let mut value = src.clone();
        let mut norms = Vec::with_capacity(src.rows());
        for i in 0..src.rows() {
            let norm = src.row_norm(i);
            norms.push(norm);
            if norm > S::zero() {
                let inv = S::one() / norm;
                for v in value.row_mut(i) {
                    *v *= inv;
                }
            }
        }
        let needs = self.needs(x);
        self.push(value, Op::RowL2Normalize { x, norms }, needs)
    }

    /// Per-feature batch normalization with trainable scale and shift.
    /// Training mode uses batch statistics and updates `state`; eval mode
    /// reads `state` and leaves it untouched.
    pub fn batch_norm(
        &mut self,
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        state: &mut BatchNormState<S>,
        train: bool,
    ) -> Result<TensorId> {
        let (n, d) = self.shape(x);
        if self.shape(gamma) != (1, d) || self.shape(beta) != (1, d) {
            return Err(Self::mismatch(
                "batch-norm",
                format!("gamma/beta must be 1x{d}"),
            ));
        }
        if state.running_mean.len() != d {
            return Err(Self::mismatch(
                "batch-norm",
                format!("state has {} features, input {d}", state.running_mean.len()),
            ));
        }
        let eps = S::from_f64_lossy(BN_EPS);
        let xv = self.value(x);
        let (mean, var): (Vec<S>, Vec<S>) = if train {
            let inv_n = S::one() / S::from_f64_lossy(n as f64);
            let mut mean = vec![S::zero(); d];
            for i in 0..n {
                for (m, &v) in mean.iter_mut().zip(xv.row(i)) {
                    *m += v * inv_n;
                }
            }
            let mut var = vec![S::zero(); d];
            for i in 0..n {
                for j in 0..d {
                    let delta = xv.get(i, j) - mean[j];
                    var[j] += delta * delta * inv_n;
                }
            }
            (mean, var)
        } else {
            (state.running_mean.clone(), state.running_var.clone())
        };
        let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();
        let mut x_hat = DenseMatrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                x_hat.set(i, j, (xv.get(i, j) - mean[j]) * inv_std[j]);
            }
        }
        let gv = self.value(gamma).clone();
        let bv = self.value(beta).clone();
        let mut value = DenseMatrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                value.set(i, j, gv.get(0, j) * x_hat.get(i, j) + bv.get(0, j));
            }
        }
        if train {
            let momentum = S::from_f64_lossy(BN_MOMENTUM);
            let one_minus = S::one() - momentum;
            for j in 0..d {
                state.running_mean[j] = momentum * state.running_mean[j] + one_minus * mean[j];
                state.running_var[j] = momentum * state.running_var[j] + one_minus * var[j];
            }
        }
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                x_hat,
                inv_std,
                train,
            },
            needs,
        ))
    }

    /// Inverted dropout with a seeded mask. Eval mode is the identity and
    /// records nothing.
    pub fn dropout(
        &mut self,
        x: TensorId,
        p: f64,
        train: bool,
        rng: &mut ChaCha20Rng,
    ) -> Result<TensorId> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dropout probability must be in [0, 1), got {p}"
            )));
        }
        if !train || p == 0.0 {
            return Ok(x);
        }
        let keep = S::from_f64_lossy(1.0 - p);
        let src = self.value(x);
        let mask: Vec<bool> = (0..src.rows() * src.cols())
            .map(|_| uniform(rng) >= p)
            .collect();
        let inv_keep = S::one() / keep;
        let mut value = src.clone();
        for (v, &m) in value.data_mut().iter_mut().zip(&mask) {
            *v = if m { *v * inv_keep } else { S::zero() };
        }
        let needs = self.needs(x);
        Ok(self.push(
            value,
            Op::Dropout {
                x,
                mask: Rc::new(mask),
                keep,
            },
            needs,
        ))
    }

    /// Select rows by index; indices may repeat.
    pub fn gather_rows(&mut self, x: TensorId, indices: Rc<Vec<usize>>) -> Result<TensorId> {
        let src = self.value(x);
        if let Some(&bad) = indices.iter().find(|&&i| i >= src.rows()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                n: src.rows(),
            });
        }
        let mut value = DenseMatrix::zeros(indices.len(), src.cols());
        for (k, &i) in indices.iter().enumerate() {
            value.row_mut(k).copy_from_slice(src.row(i));
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::GatherRows { x, indices }, needs))
    }

    /// Place row `k` of `x` at row `indices[k]` of an `out_rows`-row zero
    /// matrix. Indices must be distinct.
    pub fn scatter_rows(
        &mut self,
        x: TensorId,
        indices: Rc<Vec<usize>>,
        out_rows: usize,
    ) -> Result<TensorId> {
        let src = self.value(x);
        if indices.len() != src.rows() {
            return Err(Self::mismatch(
                "scatter-rows",
                format!("{} indices vs {} rows", indices.len(), src.rows()),
            ));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= out_rows) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                n: out_rows,
            });
        }
        let mut value = DenseMatrix::zeros(out_rows, src.cols());
        for (k, &i) in indices.iter().enumerate() {
            value.row_mut(i).copy_from_slice(src.row(k));
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::ScatterRows { x, indices }, needs))
    }

    /// Softmax over each segment of a column vector of scores.
    pub fn segment_softmax(&mut self, x: TensorId, segments: Rc<Segments>) -> Result<TensorId> {
        let (rows, cols) = self.shape(x);
        if cols != 1 || segments.total_rows() != rows {
            return Err(Self::mismatch(
                "segment-softmax",
                format!("{rows}x{cols} scores over {} segment rows", segments.total_rows()),
            ));
        }
        let src = self.value(x);
        let mut value = DenseMatrix::zeros(rows, 1);
        for s in 0..segments.len() {
            let range = segments.range(s);
            if range.is_empty() {
                continue;
            }
            let max = range
                .clone()
                .map(|i| src.get(i, 0))
                .fold(S::neg_infinity(), S::max);
            let mut total = S::zero();
            for i in range.clone() {
                let e = (src.get(i, 0) - max).exp();
                value.set(i, 0, e);
                total += e;
            }
            for i in range {
                value.set(i, 0, value.get(i, 0) / total);
            }
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::SegmentSoftmax { x, segments }, needs))
    }

    fn segment_reduce(
        &mut self,
        x: TensorId,
        segments: Rc<Segments>,
        mean: bool,
    ) -> Result<TensorId> {
        let (rows, cols) = self.shape(x);
        if segments.total_rows() != rows {
            return Err(Self::mismatch(
                "segment-reduce",
                format!("{rows} rows vs {} segment rows", segments.total_rows()),
            ));
        }
        let src = self.value(x);
        let mut value = DenseMatrix::zeros(segments.len(), cols);
        for s in 0..segments.len() {
            let range = segments.range(s);
            let count = range.len();
            for i in range {
                let srow = src.row(i);
                let drow = value.row_mut(s);
                for (d, &v) in drow.iter_mut().zip(srow) {
                    *d += v;
                }
            }
            if mean && count > 0 {
                let inv = S::one() / S::from_f64_lossy(count as f64);
                for d in value.row_mut(s) {
                    *d *= inv;
                }
            }
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::SegmentReduce { x, segments, mean }, needs))
    }

    /// Sum rows within each segment.
    pub fn segment_sum(&mut self, x: TensorId, segments: Rc<Segments>) -> Result<TensorId> {
        self.segment_reduce(x, segments, false)
    }

    /// Average rows within each segment; empty segments yield zero rows.
    pub fn segment_mean(&mut self, x: TensorId, segments: Rc<Segments>) -> Result<TensorId> {
        self.segment_reduce(x, segments, true)
    }

    /// Per-row dot product of two equally shaped matrices -> `rows x 1`.
    pub fn rowwise_dot(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (ar, ac) = self.shape(a);
        if self.shape(b) != (ar, ac) {
            return Err(Self::mismatch(
                "rowwise-dot",
                format!("{ar}x{ac} vs {:?}", self.shape(b)),
            ));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut value = DenseMatrix::zeros(ar, 1);
        for i in 0..ar {
            let dot: S = av.row(i).iter().zip(bv.row(i)).map(|(&x, &y)| x * y).sum();
            value.set(i, 0, dot);
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::RowwiseDot(a, b), needs))
    }

    /// Numerically stable element-wise binary cross entropy on logits.
    pub fn bce_with_logits(&mut self, logits: TensorId, targets: DenseMatrix<S>) -> Result<TensorId> {
        if self.shape(logits) != targets.shape() {
            return Err(Self::mismatch(
                "bce-with-logits",
                format!("{:?} vs {:?}", self.shape(logits), targets.shape()),
            ));
        }
        let lv = self.value(logits);
        let mut value = DenseMatrix::zeros(lv.rows(), lv.cols());
        for i in 0..lv.rows() {
            for j in 0..lv.cols() {
                let x = lv.get(i, j);
                let t = targets.get(i, j);
                let loss = x.max(S::zero()) - x * t + (S::one() + (-x.abs()).exp()).ln();
                value.set(i, j, loss);
            }
        }
        let needs = self.needs(logits);
        Ok(self.push(value, Op::BceWithLogits { logits, targets }, needs))
    }

    /// Mean over all entries -> `1 x 1`.
    pub fn reduce_mean(&mut self, x: TensorId) -> TensorId {
        let src = self.value(x);
        let count = (src.rows() * src.cols()).max(1);
        let total: S = src.data().iter().copied().sum();
        let value = DenseMatrix::scalar(total / S::from_f64_lossy(count as f64));
        let needs = self.needs(x);
        self.push(value, Op::ReduceMean(x), needs)
    }

    /// Reverse sweep from a scalar loss. Returns a gradient per reachable
    /// tensor; `requires_grad` leaves that the loss never touches simply
    /// have no entry (zero gradient).
    pub fn backward(&self, loss: TensorId) -> Result<Gradients<S>> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss { rows: r, cols: c });
        }
        let mut grads: Vec<Option<DenseMatrix<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(DenseMatrix::scalar(S::one()));
        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Add `delta` into the gradient slot of `id` when it tracks gradients.
    fn accum(
        &self,
        grads: &mut [Option<DenseMatrix<S>>],
        id: TensorId,
        delta: DenseMatrix<S>,
    ) {
        if !self.needs(id) {
            return;
        }
        match &mut grads[id.0] {
            Some(g) => g.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&self, i: usize, g: &DenseMatrix<S>, grads: &mut [Option<DenseMatrix<S>>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let delta = g.matmul(&self.value(*b).transpose()).expect("shapes fixed");
                    self.accum(grads, *a, delta);
                }
                if self.needs(*b) {
                    let delta = self.value(*a).transpose().matmul(g).expect("shapes fixed");
                    self.accum(grads, *b, delta);
                }
            }
            Op::Spmm(a, b) => {
                if self.needs(*b) {
                    let delta = self.sparse[a.0].transpose_matmul_dense(g);
                    self.accum(grads, *b, delta);
                }
            }
            Op::Transpose(x) => self.accum(grads, *x, g.transpose()),
            Op::Add { a, b, broadcast_row } => {
                self.accum(grads, *a, g.clone());
                if self.needs(*b) {
                    if *broadcast_row {
                        let mut delta = DenseMatrix::zeros(1, g.cols());
                        for i in 0..g.rows() {
                            let dst = delta.row_mut(0);
                            for (d, &s) in dst.iter_mut().zip(g.row(i)) {
                                *d += s;
                            }
                        }
                        self.accum(grads, *b, delta);
                    } else {
                        self.accum(grads, *b, g.clone());
                    }
                }
            }
            Op::Mul { a, b, kind } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                match kind {
                    MulKind::SameShape => {
                        if self.needs(*a) {
                            let mut delta = g.clone();
                            for (d, &s) in delta.data_mut().iter_mut().zip(bv.data()) {
                                *d *= s;
                            }
                            self.accum(grads, *a, delta);
                        }
                        if self.needs(*b) {
                            let mut delta = g.clone();
                            for (d, &s) in delta.data_mut().iter_mut().zip(av.data()) {
                                *d *= s;
                            }
                            self.accum(grads, *b, delta);
                        }
                    }
                    MulKind::ScalarRight => {
                        if self.needs(*a) {
                            let mut delta = g.clone();
                            delta.scale_assign(bv.get(0, 0));
                            self.accum(grads, *a, delta);
                        }
                        if self.needs(*b) {
                            let dot: S = g
                                .data()
                                .iter()
                                .zip(av.data())
                                .map(|(&x, &y)| x * y)
                                .sum();
                            self.accum(grads, *b, DenseMatrix::scalar(dot));
                        }
                    }
                    MulKind::ColumnRight => {
                        if self.needs(*a) {
                            let mut delta = g.clone();
                            for i in 0..delta.rows() {
                                let c = bv.get(i, 0);
                                for d in delta.row_mut(i) {
                                    *d *= c;
                                }
                            }
                            self.accum(grads, *a, delta);
                        }
                        if self.needs(*b) {
                            let mut delta = DenseMatrix::zeros(g.rows(), 1);
                            for i in 0..g.rows() {
                                let dot: S = g
                                    .row(i)
                                    .iter()
                                    .zip(av.row(i))
                                    .map(|(&x, &y)| x * y)
                                    .sum();
                                delta.set(i, 0, dot);
                            }
                            self.accum(grads, *b, delta);
                        }
                    }
                }
            }
            Op::Scale(x, c) => {
                let mut delta = g.clone();
                delta.scale_assign(*c);
                self.accum(grads, *x, delta);
            }
            Op::ConcatCols(a, b) => {
                let ac = self.value(*a).cols();
                if self.needs(*a) {
                    let mut delta = DenseMatrix::zeros(g.rows(), ac);
                    for i in 0..g.rows() {
                        delta.row_mut(i).copy_from_slice(&g.row(i)[..ac]);
                    }
                    self.accum(grads, *a, delta);
                }
                if self.needs(*b) {
                    let bc = g.cols() - ac;
                    let mut delta = DenseMatrix::zeros(g.rows(), bc);
                    for i in 0..g.rows() {
                        delta.row_mut(i).copy_from_slice(&g.row(i)[ac..]);
                    }
                    self.accum(grads, *b, delta);
                }
            }
            Op::Activate { x, kind } => {
                let xv = self.value(*x);
                let yv = &self.nodes[i].value;
                let mut delta = g.clone();
                for (k, d) in delta.data_mut().iter_mut().enumerate() {
                    let xi = xv.data()[k];
                    let yi = yv.data()[k];
                    *d *= activation_grad(xi, yi, *kind);
                }
                self.accum(grads, *x, delta);
            }
            Op::RowL2Normalize { x, norms } => {
                let yv = &self.nodes[i].value;
                let mut delta = DenseMatrix::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    if norms[r] == S::zero() {
                        continue;
                    }
                    let inv = S::one() / norms[r];
                    let y = yv.row(r);
                    let gr = g.row(r);
                    let gy: S = gr.iter().zip(y).map(|(&a, &b)| a * b).sum();
                    for (j, d) in delta.row_mut(r).iter_mut().enumerate() {
                        *d = (gr[j] - y[j] * gy) * inv;
                    }
                }
                self.accum(grads, *x, delta);
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                x_hat,
                inv_std,
                train,
            } => {
                let n = g.rows();
                let d = g.cols();
                let gv = self.value(*gamma);
                if self.needs(*beta) {
                    let mut db = DenseMatrix::zeros(1, d);
                    for i in 0..n {
                        for (s, &v) in db.row_mut(0).iter_mut().zip(g.row(i)) {
                            *s += v;
                        }
                    }
                    self.accum(grads, *beta, db);
                }
                if self.needs(*gamma) {
                    let mut dg = DenseMatrix::zeros(1, d);
                    for i in 0..n {
                        for j in 0..d {
                            let v = dg.get(0, j) + g.get(i, j) * x_hat.get(i, j);
                            dg.set(0, j, v);
                        }
                    }
                    self.accum(grads, *gamma, dg);
                }
                if self.needs(*x) {
                    let mut delta = DenseMatrix::zeros(n, d);
                    if *train {
                        let inv_n = S::one() / S::from_f64_lossy(n as f64);
                        for j in 0..d {
                            let mut g_mean = S::zero();
                            let mut gx_mean = S::zero();
                            for i in 0..n {
                                g_mean += g.get(i, j) * inv_n;
                                gx_mean += g.get(i, j) * x_hat.get(i, j) * inv_n;
                            }
                            let scale = gv.get(0, j) * inv_std[j];
                            for i in 0..n {
                                let v = scale
                                    * (g.get(i, j) - g_mean - x_hat.get(i, j) * gx_mean);
                                delta.set(i, j, v);
                            }
                        }
                    } else {
                        for j in 0..d {
                            let scale = gv.get(0, j) * inv_std[j];
                            for i in 0..n {
                                delta.set(i, j, g.get(i, j) * scale);
                            }
                        }
                    }
                    self.accum(grads, *x, delta);
                }
            }
            Op::Dropout { x, mask, keep } => {
                let inv_keep = S::one() / *keep;
                let mut delta = g.clone();
                for (d, &m) in delta.data_mut().iter_mut().zip(mask.iter()) {
                    *d = if m { *d * inv_keep } else { S::zero() };
                }
                self.accum(grads, *x, delta);
            }
            Op::GatherRows { x, indices } => {
                let rows = self.value(*x).rows();
                let mut delta = DenseMatrix::zeros(rows, g.cols());
                for (k, &idx) in indices.iter().enumerate() {
                    let src = g.row(k);
                    let dst = delta.row_mut(idx);
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
                self.accum(grads, *x, delta);
            }
            Op::ScatterRows { x, indices } => {
                let mut delta = DenseMatrix::zeros(indices.len(), g.cols());
                for (k, &idx) in indices.iter().enumerate() {
                    delta.row_mut(k).copy_from_slice(g.row(idx));
                }
                self.accum(grads, *x, delta);
            }
            Op::SegmentSoftmax { x, segments } => {
                let yv = &self.nodes[i].value;
                let mut delta = DenseMatrix::zeros(g.rows(), 1);
                for s in 0..segments.len() {
                    let range = segments.range(s);
                    let mut gy = S::zero();
                    for r in range.clone() {
                        gy += g.get(r, 0) * yv.get(r, 0);
                    }
                    for r in range {
                        delta.set(r, 0, yv.get(r, 0) * (g.get(r, 0) - gy));
                    }
                }
                self.accum(grads, *x, delta);
            }
            Op::SegmentReduce { x, segments, mean } => {
                let rows = self.value(*x).rows();
                let mut delta = DenseMatrix::zeros(rows, g.cols());
                for s in 0..segments.len() {
                    let range = segments.range(s);
                    let count = range.len().max(1);
                    let scale = if *mean {
                        S::one() / S::from_f64_lossy(count as f64)
                    } else {
                        S::one()
                    };
                    for r in range {
                        let src = g.row(s);
                        let dst = delta.row_mut(r);
                        for (d, &v) in dst.iter_mut().zip(src) {
                            *d = v * scale;
                        }
                    }
                }
                self.accum(grads, *x, delta);
            }
            Op::RowwiseDot(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let mut delta = bv.clone();
                    for r in 0..delta.rows() {
                        let c = g.get(r, 0);
                        for d in delta.row_mut(r) {
                            *d *= c;
                        }
                    }
                    self.accum(grads, *a, delta);
                }
                if self.needs(*b) {
                    let mut delta = av.clone();
                    for r in 0..delta.rows() {
                        let c = g.get(r, 0);
                        for d in delta.row_mut(r) {
                            *d *= c;
                        }
                    }
                    self.accum(grads, *b, delta);
                }
            }
            Op::BceWithLogits { logits, targets } => {
                let lv = self.value(*logits);
                let mut delta = g.clone();
                for (k, d) in delta.data_mut().iter_mut().enumerate() {
                    let x = lv.data()[k];
                    let t = targets.data()[k];
                    let sig = S::one() / (S::one() + (-x).exp());
                    *d *= sig - t;
                }
                self.accum(grads, *logits, delta);
            }
            Op::ReduceMean(x) => {
                let (r, c) = self.value(*x).shape();
                let scale = g.get(0, 0) / S::from_f64_lossy((r * c) as f64);
                let delta = DenseMatrix::from_vec(r, c, vec![scale; r * c]);
                self.accum(grads, *x, delta);
            }
        }
    }
}

fn apply_activation<S: Scalar>(v: S, kind: Activation) -> S {
    match kind {
        Activation::Relu => v.max(S::zero()),
        Activation::LeakyRelu => {
            if v > S::zero() {
                v
            } else {
                S::from_f64_lossy(0.2) * v
            }
        }
        Activation::Elu => {
            if v > S::zero() {
                v
            } else {
                v.exp() - S::one()
            }
        }
        Activation::Tanh => v.tanh(),
        Activation::Sigmoid => S::one() / (S::one() + (-v).exp()),
    }
}

/// Derivative in terms of the input `x` and the forward output `y`.
/// The kink of relu and leaky-relu at exactly zero uses slope zero.
fn activation_grad<S: Scalar>(x: S, y: S, kind: Activation) -> S {
    match kind {
        Activation::Relu | Activation::LeakyRelu if x == S::zero() => S::zero(),
        Activation::Relu => {
            if x > S::zero() {
                S::one()
            } else {
                S::zero()
            }
        }
        Activation::LeakyRelu => {
            if x > S::zero() {
                S::one()
            } else {
                S::from_f64_lossy(0.2)
            }
        }
        Activation::Elu => {
            if x > S::zero() {
                S::one()
            } else {
                y + S::one()
            }
        }
        Activation::Tanh => S::one() - y * y,
        Activation::Sigmoid => y * (S::one() - y),
    }
}

#[cfg(test)]
mod tests;
