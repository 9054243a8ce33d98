//! Inner-product decoder and the reconstruction loss.

use std::rc::Rc;

use crate::autodiff::{Tape, TensorId};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Edge probabilities `sigmoid(z_u . z_v)` for the given node pairs.
pub fn inner_product_decode<S: Scalar>(
    z: &DenseMatrix<S>,
    pairs: &[(usize, usize)],
) -> Result<Vec<S>> {
    let n = z.rows();
    let mut out = Vec::with_capacity(pairs.len());
    for &(u, v) in pairs {
        if u >= n || v >= n {
            return Err(Error::IndexOutOfRange { index: u.max(v), n });
        }
        let dot: S = z.row(u).iter().zip(z.row(v)).map(|(&a, &b)| a * b).sum();
        out.push(S::one() / (S::one() + (-dot).exp()));
    }
    Ok(out)
}

/// Tape node of the raw pair logits `z_u . z_v`.
pub fn pair_logits<S: Scalar>(
    tape: &mut Tape<S>,
    z: TensorId,
    pairs: &[(usize, usize)],
) -> Result<TensorId> {
    let n = tape.value(z).rows();
    for &(u, v) in pairs {
        if u >= n || v >= n {
            return Err(Error::IndexOutOfRange { index: u.max(v), n });
        }
    }
    let src: Rc<Vec<usize>> = Rc::new(pairs.iter().map(|&(u, _)| u).collect());
    let dst: Rc<Vec<usize>> = Rc::new(pairs.iter().map(|&(_, v)| v).collect());
    let zu = tape.gather_rows(z, src)?;
    let zv = tape.gather_rows(z, dst)?;
    tape.rowwise_dot(zu, zv)
}

/// Mean binary cross entropy over the positive pairs plus mean binary cross
/// entropy over the negative pairs.
pub fn reconstruction_loss<S: Scalar>(
    tape: &mut Tape<S>,
    z: TensorId,
    pos_pairs: &[(usize, usize)],
    neg_pairs: &[(usize, usize)],
) -> Result<TensorId> {
    if pos_pairs.is_empty() {
        return Err(Error::NoPositives);
    }
    let pos_logits = pair_logits(tape, z, pos_pairs)?;
    let ones = DenseMatrix::from_vec(pos_pairs.len(), 1, vec![S::one(); pos_pairs.len()]);
    let pos_bce = tape.bce_with_logits(pos_logits, ones)?;
    let pos_mean = tape.reduce_mean(pos_bce);
    if neg_pairs.is_empty() {
        return Ok(pos_mean);
    }
    let neg_logits = pair_logits(tape, z, neg_pairs)?;
    let zeros = DenseMatrix::zeros(neg_pairs.len(), 1);
    let neg_bce = tape.bce_with_logits(neg_logits, zeros)?;
    let neg_mean = tape.reduce_mean(neg_bce);
    tape.add(pos_mean, neg_mean)
}
