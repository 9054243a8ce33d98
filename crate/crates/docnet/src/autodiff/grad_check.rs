//! Finite-difference verification of the tape gradients.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

use super::{Tape, TensorId};

/// Outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error over all checked coordinates.
    pub max_rel_error: f64,
    /// (parameter index, coordinate) pairs skipped because the one-sided
    /// difference quotients disagree, which marks a kink within `eps`.
    pub skipped: Vec<(usize, usize)>,
    pub checked: usize,
}

const KINK_TOLERANCE: f64 = 1e-3;

/// Compare reverse-mode gradients of a scalar-valued function against
/// central finite differences at `params`.
///
/// `f` is called repeatedly with perturbed copies of the parameters and must
/// rebuild the same graph every time (seed any internal randomness
/// identically per call). The relative error per coordinate is
/// `|g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)`; coordinates whose one-sided
/// quotients disagree sit on a kink and are skipped and reported.
pub fn gradient_check<F>(params: &[DenseMatrix<f64>], mut f: F, eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<f64>, &[TensorId]) -> Result<TensorId>,
{
    // Reverse-mode gradients at the base point.
    let mut tape = Tape::new();
    let ids: Vec<TensorId> = params
        .iter()
        .map(|p| tape.input(p.clone(), true))
        .collect();
    let loss_id = f(&mut tape, &ids)?;
    let base = {
        let v = tape.value(loss_id);
        if !v.is_scalar() {
            return Err(Error::NonScalarLoss {
                rows: v.rows(),
                cols: v.cols(),
            });
        }
        v.get(0, 0)
    };
    let grads = tape.backward(loss_id)?;
    let analytic: Vec<DenseMatrix<f64>> = ids
        .iter()
        .zip(params)
        .map(|(&id, p)| grads.get_or_zeros(id, p.rows(), p.cols()))
        .collect();
    drop(tape);

    let mut eval = |values: &[DenseMatrix<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let ids: Vec<TensorId> = values
            .iter()
            .map(|p| tape.input(p.clone(), false))
            .collect();
        let loss = f(&mut tape, &ids)?;
        Ok(tape.value(loss).get(0, 0))
    };

    let mut work: Vec<DenseMatrix<f64>> = params.to_vec();
    let mut max_rel_error = 0.0f64;
    let mut skipped = Vec::new();
    let mut checked = 0usize;
    for p in 0..params.len() {
        for c in 0..params[p].rows() * params[p].cols() {
            let orig = work[p].data()[c];
            work[p].data_mut()[c] = orig + eps;
            let f_plus = eval(&work)?;
            work[p].data_mut()[c] = orig - eps;
            let f_minus = eval(&work)?;
            work[p].data_mut()[c] = orig;

            let d_plus = (f_plus - base) / eps;
            let d_minus = (base - f_minus) / eps;
            let denom = d_plus.abs().max(d_minus.abs()).max(1.0);
            if ((d_plus - d_minus).abs() / denom) > KINK_TOLERANCE {
                skipped.push((p, c));
                continue;
            }

            let g_fd = (f_plus - f_minus) / (2.0 * eps);
            let g_ad = analytic[p].data()[c];
            let rel = (g_ad - g_fd).abs() / f64::max(1e-8, g_ad.abs() + g_fd.abs());
            max_rel_error = max_rel_error.max(rel);
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        skipped,
        checked,
    })
}
