use std::rc::Rc;

use super::*;
use crate::rng::substream;
use crate::sparse::CsrMatrix;

fn mat(rows: usize, cols: usize, data: &[f64]) -> DenseMatrix<f64> {
    DenseMatrix::from_vec(rows, cols, data.to_vec())
}

fn random_mat(rows: usize, cols: usize, stream: &str) -> DenseMatrix<f64> {
    let mut rng = substream(91, stream);
    let mut m = DenseMatrix::zeros(rows, cols);
    for v in m.data_mut() {
        // Away from activation kinks: magnitude at least 0.1.
        let x = crate::rng::gaussian(&mut rng);
        *v = if x.abs() < 0.1 { x + 0.2 } else { x };
    }
    m
}

#[test]
fn forward_hand_values() {
    let mut tape = Tape::new();
    let x = tape.input(mat(1, 2, &[-1.0, 2.0]), false);
    let y = tape.relu(x);
    assert_eq!(tape.value(y).data(), &[0.0, 2.0]);

    let z = tape.input(mat(1, 1, &[0.0]), false);
    let s = tape.sigmoid(z);
    assert_eq!(tape.value(s).get(0, 0), 0.5);

    let logit = tape.input(mat(1, 1, &[0.0]), false);
    let loss = tape.bce_with_logits(logit, mat(1, 1, &[1.0])).unwrap();
    assert!((tape.value(loss).get(0, 0) - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn mean_gradient_is_uniform() {
    let mut tape = Tape::new();
    let w = tape.input(mat(2, 2, &[1.0, -2.0, 3.0, 4.0]), true);
    let loss = tape.reduce_mean(w);
    let grads = tape.backward(loss).unwrap();
    assert_eq!(grads.get(w).unwrap().data(), &[0.25; 4]);
}

#[test]
fn unreachable_parameter_has_zero_gradient() {
    let mut tape = Tape::new();
    let w = tape.input(mat(2, 2, &[1.0; 4]), true);
    let x = tape.input(mat(1, 1, &[3.0]), true);
    let loss = tape.reduce_mean(x);
    let grads = tape.backward(loss).unwrap();
    assert!(grads.get(w).is_none());
    assert_eq!(grads.get_or_zeros(w, 2, 2).data(), &[0.0; 4]);
}

#[test]
fn relu_subgradient_at_kink_is_zero() {
    let mut tape = Tape::new();
    let w = tape.input(mat(1, 3, &[-1.0, 2.0, 0.0]), true);
    let r = tape.relu(w);
    let mean = tape.reduce_mean(r);
    // scale by 3 so the loss is sum(relu(w))
    let loss = tape.scale(mean, 3.0).unwrap();
    let grads = tape.backward(loss).unwrap();
    assert_eq!(grads.get(w).unwrap().data(), &[0.0, 1.0, 0.0]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut tape = Tape::new();
    let w = tape.input(mat(2, 2, &[1.0; 4]), true);
    match tape.backward(w) {
        Err(Error::NonScalarLoss { rows: 2, cols: 2 }) => {}
        other => panic!("expected non-scalar loss error, got {other:?}"),
    }
}

#[test]
fn quadratic_gradient_check_is_tight() {
    let report = gradient_check(
        &[mat(1, 3, &[1.0, 2.0, 3.0])],
        |tape, ids| {
            let d = tape.rowwise_dot(ids[0], ids[0])?;
            Ok(tape.reduce_mean(d))
        },
        1e-5,
    )
    .unwrap();
    assert!(report.skipped.is_empty());
    assert!(report.max_rel_error < 1e-7, "err {}", report.max_rel_error);
}

#[test]
fn kink_at_zero_is_skipped_and_reported() {
    let report = gradient_check(
        &[mat(1, 2, &[0.0, 1.0])],
        |tape, ids| {
            let r = tape.relu(ids[0]);
            Ok(tape.reduce_mean(r))
        },
        1e-5,
    )
    .unwrap();
    assert_eq!(report.skipped, vec![(0, 0)]);
    assert_eq!(report.checked, 1);
    assert!(report.max_rel_error < 1e-7);
}

/// Every primitive, checked against finite differences away from kinks.
#[test]
fn primitive_gradients_match_finite_differences() {
    let tol = 1e-6;
    let check = |name: &str,
                 params: &[DenseMatrix<f64>],
                 f: &mut dyn FnMut(&mut Tape<f64>, &[TensorId]) -> crate::error::Result<TensorId>| {
        let report = gradient_check(params, f, 1e-5).unwrap();
        assert!(
            report.max_rel_error < tol,
            "{name}: max rel error {}",
            report.max_rel_error
        );
        assert!(report.skipped.is_empty(), "{name}: skipped {:?}", report.skipped);
    };

    let a = random_mat(3, 4, "a");
    let b = random_mat(4, 2, "b");
    check("matmul", &[a.clone(), b.clone()], &mut |tape, ids| {
        let c = tape.matmul(ids[0], ids[1])?;
        Ok(tape.reduce_mean(c))
    });

    let sp = CsrMatrix::from_triplets(
        3,
        3,
        vec![(0, 1, 0.7), (1, 0, -0.4), (1, 2, 1.3), (2, 2, 0.9)],
    );
    let x = random_mat(3, 2, "spmm-x");
    check("spmm", &[x.clone()], &mut |tape, ids| {
        let s = tape.sparse_input(sp.clone());
        let y = tape.spmm(s, ids[0])?;
        Ok(tape.reduce_mean(y))
    });

    check("transpose", &[a.clone()], &mut |tape, ids| {
        let t = tape.transpose(ids[0])?;
        let c = tape.matmul(ids[0], t)?;
        Ok(tape.reduce_mean(c))
    });

    let row = random_mat(1, 4, "row");
    check("add-broadcast", &[a.clone(), row.clone()], &mut |tape, ids| {
        let y = tape.add(ids[0], ids[1])?;
        Ok(tape.reduce_mean(y))
    });

    let same = random_mat(3, 4, "same");
    check("mul-same", &[a.clone(), same.clone()], &mut |tape, ids| {
        let y = tape.mul(ids[0], ids[1])?;
        Ok(tape.reduce_mean(y))
    });

    let scalar = mat(1, 1, &[0.8]);
    check("mul-scalar", &[a.clone(), scalar], &mut |tape, ids| {
        let y = tape.mul(ids[0], ids[1])?;
        Ok(tape.reduce_mean(y))
    });

    let col = random_mat(3, 1, "col");
    check("mul-column", &[a.clone(), col], &mut |tape, ids| {
        let y = tape.mul(ids[0], ids[1])?;
        Ok(tape.reduce_mean(y))
    });

    check("concat-columns", &[a.clone(), same], &mut |tape, ids| {
        let y = tape.concat_cols(ids[0], ids[1])?;
        let t = tape.tanh(y);
        Ok(tape.reduce_mean(t))
    });

    for (name, apply) in [
        ("relu", 0usize),
        ("leaky-relu", 1),
        ("elu", 2),
        ("tanh", 3),
        ("sigmoid", 4),
    ] {
        check(name, &[a.clone()], &mut |tape, ids| {
            let y = match apply {
                0 => tape.relu(ids[0]),
                1 => tape.leaky_relu(ids[0]),
                2 => tape.elu(ids[0]),
                3 => tape.tanh(ids[0]),
                _ => tape.sigmoid(ids[0]),
            };
            Ok(tape.reduce_mean(y))
        });
    }

    check("row-l2-normalize", &[a.clone()], &mut |tape, ids| {
        let y = tape.row_l2_normalize(ids[0]);
        let w = tape.tanh(y);
        Ok(tape.reduce_mean(w))
    });

    let gamma = mat(1, 4, &[1.1, 0.9, 1.3, 0.7]);
    let beta = mat(1, 4, &[0.1, -0.2, 0.05, 0.3]);
    check(
        "batch-norm",
        &[random_mat(5, 4, "bn"), gamma, beta],
        &mut |tape, ids| {
            let mut state = BatchNormState::new(4);
            let y = tape.batch_norm(ids[0], ids[1], ids[2], &mut state, true)?;
            let t = tape.tanh(y);
            Ok(tape.reduce_mean(t))
        },
    );

    check("dropout", &[a.clone()], &mut |tape, ids| {
        let mut rng = substream(7, "dropout-mask");
        let y = tape.dropout(ids[0], 0.4, true, &mut rng)?;
        Ok(tape.reduce_mean(y))
    });

    let idx = Rc::new(vec![2usize, 0, 2, 1]);
    check("gather-rows", &[a.clone()], &mut |tape, ids| {
        let y = tape.gather_rows(ids[0], idx.clone())?;
        Ok(tape.reduce_mean(y))
    });

    let scatter_idx = Rc::new(vec![4usize, 1, 3]);
    check("scatter-rows", &[a.clone()], &mut |tape, ids| {
        let y = tape.scatter_rows(ids[0], scatter_idx.clone(), 6)?;
        let t = tape.tanh(y);
        Ok(tape.reduce_mean(t))
    });

    let scores = random_mat(6, 1, "scores");
    let segments = Rc::new(Segments::new(vec![0, 3, 4, 6]));
    check("segment-softmax", &[scores.clone()], &mut |tape, ids| {
        let y = tape.segment_softmax(ids[0], segments.clone())?;
        let idx = Rc::new(vec![0usize, 1, 2, 3, 4, 5]);
        let g = tape.gather_rows(y, idx)?;
        let sq = tape.mul(g, g)?;
        Ok(tape.reduce_mean(sq))
    });

    let edge_feats = random_mat(6, 3, "edge-feats");
    check("segment-sum", &[edge_feats.clone()], &mut |tape, ids| {
        let y = tape.segment_sum(ids[0], segments.clone())?;
        let t = tape.tanh(y);
        Ok(tape.reduce_mean(t))
    });
    check("segment-mean", &[edge_feats], &mut |tape, ids| {
        let y = tape.segment_mean(ids[0], segments.clone())?;
        let t = tape.tanh(y);
        Ok(tape.reduce_mean(t))
    });

    check("rowwise-dot", &[a.clone(), random_mat(3, 4, "rd")], &mut |tape, ids| {
        let y = tape.rowwise_dot(ids[0], ids[1])?;
        Ok(tape.reduce_mean(y))
    });

    let targets = mat(3, 1, &[1.0, 0.0, 1.0]);
    check("bce-with-logits", &[random_mat(3, 1, "bce")], &mut |tape, ids| {
        let y = tape.bce_with_logits(ids[0], targets.clone())?;
        Ok(tape.reduce_mean(y))
    });
}

#[test]
fn segment_softmax_sums_to_one_per_segment() {
    let mut tape = Tape::new();
    let x = tape.input(random_mat(7, 1, "ss"), false);
    let segments = Rc::new(Segments::new(vec![0, 2, 5, 7]));
    let y = tape.segment_softmax(x, segments.clone()).unwrap();
    let v = tape.value(y);
    for s in 0..segments.len() {
        let total: f64 = segments.range(s).map(|i| v.get(i, 0)).sum();
        assert!((total - 1.0).abs() < 1e-12, "segment {s} sums to {total}");
        for i in segments.range(s) {
            assert!(v.get(i, 0) >= 0.0);
        }
    }
}

#[test]
fn replay_with_identical_seed_is_bit_identical() {
    let build = || {
        let mut tape = Tape::new();
        let mut rng = substream(33, "replay");
        let x = tape.input(random_mat(4, 3, "replay-x"), true);
        let d = tape.dropout(x, 0.5, true, &mut rng).unwrap();
        let t = tape.tanh(d);
        let loss = tape.reduce_mean(t);
        let grads = tape.backward(loss).unwrap();
        (
            tape.value(loss).get(0, 0),
            grads.get(x).unwrap().clone(),
        )
    };
    let (l1, g1) = build();
    let (l2, g2) = build();
    assert_eq!(l1.to_bits(), l2.to_bits());
    assert_eq!(g1.data(), g2.data());
}

#[test]
fn eval_mode_dropout_is_identity() {
    let mut tape = Tape::new();
    let mut rng = substream(1, "noop");
    let x = tape.input(random_mat(3, 3, "eval"), false);
    let y = tape.dropout(x, 0.5, false, &mut rng).unwrap();
    assert_eq!(x, y);
}

#[test]
fn batch_norm_updates_running_stats_only_in_train_mode() {
    let mut state = BatchNormState::new(2);
    let mut tape = Tape::new();
    let x = tape.input(mat(4, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]), false);
    let gamma = tape.input(mat(1, 2, &[1.0, 1.0]), false);
    let beta = tape.input(mat(1, 2, &[0.0, 0.0]), false);
    tape.batch_norm(x, gamma, beta, &mut state, true).unwrap();
    // mean of column 0 is 2.5; momentum 0.9 keeps 90% of the zero init.
    assert!((state.running_mean[0] - 0.25).abs() < 1e-12);
    let frozen = state.clone();
    tape.batch_norm(x, gamma, beta, &mut state, false).unwrap();
    assert_eq!(state.running_mean, frozen.running_mean);
    assert_eq!(state.running_var, frozen.running_var);
}

#[test]
fn works_in_single_precision_too() {
    let mut tape: Tape<f32> = Tape::new();
    let x = tape.input(DenseMatrix::from_vec(1, 2, vec![-1.0f32, 2.0]), true);
    let y = tape.relu(x);
    let loss = tape.reduce_mean(y);
    let grads = tape.backward(loss).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[0.0f32, 0.5]);
}
