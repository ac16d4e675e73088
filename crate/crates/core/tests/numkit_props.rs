use std::sync::Arc;

use mvgcn::numkit::dtn::{read_dtn, write_dtn};
use mvgcn::numkit::loss::{huber, huber_grad};
use mvgcn::numkit::{adam_step, finite_diff_grad, matmul, spmm, Activation, AdamState, CsrMatrix, Tape, Tensor};
use proptest::prelude::*;

fn tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
}

/// Dense matrix with roughly half its entries zeroed.
fn sparse_dense(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec((any::<bool>(), -3.0f64..3.0), rows * cols).prop_map(move |d| {
        Tensor::new(vec![rows, cols], d.into_iter().map(|(keep, v)| if keep { v } else { 0.0 }).collect()).unwrap()
    })
}

fn naive_product(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k) = (a.dims()[0], a.dims()[1]);
    let m = b.dims()[1];
    let mut out = Tensor::zeros(&[n, m]);
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for p in 0..k {
                if a.get2(i, p) != 0.0 {
                    acc += a.get2(i, p) * b.get2(p, j);
                }
            }
            out.set2(i, j, acc);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spmm_matches_dense_product((a, x) in (1usize..9, 1usize..9, 1usize..5).prop_flat_map(|(n, k, m)| (sparse_dense(n, k), tensor(k, m)))) {
        let s = CsrMatrix::from_dense(&a).unwrap();
        prop_assert_eq!(spmm(&s, &x).unwrap(), naive_product(&a, &x));
    }

    #[test]
    fn csr_dense_roundtrip(a in (1usize..8, 1usize..8).prop_flat_map(|(n, m)| sparse_dense(n, m))) {
        let s = CsrMatrix::from_dense(&a).unwrap();
        prop_assert_eq!(s.to_dense(), a.clone());
        prop_assert_eq!(s.nnz(), a.data().iter().filter(|v| **v != 0.0).count());
        prop_assert_eq!(s.transpose().transpose(), s);
    }

    #[test]
    fn block_diagonal_repeats_blocks(a in (1usize..5).prop_flat_map(|n| sparse_dense(n, n)), copies in 1usize..4) {
        let n = a.dims()[0];
        let big = CsrMatrix::from_dense(&a).unwrap().block_diagonal(copies).to_dense();
        for bi in 0..copies * n {
            for bj in 0..copies * n {
                let want = if bi / n == bj / n { a.get2(bi % n, bj % n) } else { 0.0 };
                prop_assert_eq!(big.get2(bi, bj), want);
            }
        }
    }

    #[test]
    fn dense_matmul_matches_naive((a, b) in (1usize..7, 1usize..7, 1usize..7).prop_flat_map(|(n, k, m)| (tensor(n, k), tensor(k, m)))) {
        let got = matmul(&a, &b).unwrap();
        prop_assert!(got.max_abs_diff(&naive_product(&a, &b)) < 1e-12);
    }

    #[test]
    fn dtn_roundtrip(dims in prop::collection::vec(0usize..4, 0..4), seed in any::<u64>()) {
        let len: usize = dims.iter().product();
        let data: Vec<f64> = (0..len).map(|i| (seed.wrapping_mul(i as u64 + 1) as f64).sin() * 1e3).collect();
        let t = Tensor::new(dims, data).unwrap();
        let mut buf = Vec::new();
        write_dtn(&mut buf, &t).unwrap();
        let back = read_dtn(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn truncated_dtn_is_rejected(cut in 0usize..40) {
        let t = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let mut buf = Vec::new();
        write_dtn(&mut buf, &t).unwrap();
        prop_assume!(cut < buf.len());
        prop_assert!(read_dtn(&mut &buf[..cut]).is_err());
    }

    #[test]
    fn huber_is_symmetric_and_continuous(e in -5.0f64..5.0, delta in 0.1f64..3.0) {
        prop_assert!((huber(e, 0.0, delta) - huber(-e, 0.0, delta)).abs() < 1e-15);
        prop_assert!(huber(e, 0.0, delta) >= 0.0);
        let left = huber(delta - 1e-9, 0.0, delta);
        let right = huber(delta + 1e-9, 0.0, delta);
        prop_assert!((left - right).abs() < 1e-8);
        // derivative with respect to the prediction
        let h = 1e-6;
        let fd = (huber(0.0, e + h, delta) - huber(0.0, e - h, delta)) / (2.0 * h);
        prop_assume!((e.abs() - delta).abs() > 1e-3);
        prop_assert!((fd - huber_grad(0.0, e, delta)).abs() < 1e-6);
    }

    #[test]
    fn adam_first_step_moves_by_lr(g in prop::collection::vec(prop_oneof![-3.0f64..-1e-3, 1e-3f64..3.0], 1..10), lr in 1e-4f64..1e-1) {
        let n = g.len();
        let mut params = vec![Tensor::zeros(&[n])];
        let grads = vec![Tensor::new(vec![n], g.clone()).unwrap()];
        let mut st = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut st, lr).unwrap();
        for (p, gi) in params[0].data().iter().zip(&g) {
            // bias-corrected first step is lr·g/(|g| + ε)
            let want = -lr * gi / (gi.abs() + 1e-8);
            prop_assert!((p - want).abs() < 1e-12);
        }
    }

    #[test]
    fn tape_gradients_match_finite_differences(
        (x, w1, w2, y) in (1usize..5, 1usize..4, 1usize..4).prop_flat_map(|(n, k, m)| (tensor(n, k), tensor(k, m), tensor(m, 2), tensor(n, 2))),
    ) {
        let s = Arc::new(CsrMatrix::from_dense(&Tensor::eye(x.dims()[0])).unwrap());
        let y = Arc::new(y);
        let build = |w1: &Tensor, w2: &Tensor| {
            let mut tape = Tape::new();
            let xin = tape.constant(x.clone());
            let a = tape.param(0, w1.clone());
            let b = tape.param(1, w2.clone());
            let h = tape.matmul(xin, a).unwrap();
            let h = tape.spmm(&s, h).unwrap();
            let h = tape.activation(h, Activation::Tanh).unwrap();
            let o = tape.matmul(h, b).unwrap();
            let g = tape.activation(o, Activation::Sigmoid).unwrap();
            let o = tape.mul(o, g).unwrap();
            let o = tape.add(o, o).unwrap();
            let loss = tape.huber_sum(o, Arc::clone(&y), 1.0).unwrap();
            (tape, loss)
        };
        let (tape, loss) = build(&w1, &w2);
        let grads = tape.backward(loss).unwrap().into_dense(&[w1.dims(), w2.dims()]);
        let f1 = |w: &Tensor| { let (t, l) = build(w, &w2); t.value(l).data()[0] };
        let f2 = |w: &Tensor| { let (t, l) = build(&w1, w); t.value(l).data()[0] };
        let fd1 = finite_diff_grad(f1, &w1, 1e-6);
        let fd2 = finite_diff_grad(f2, &w2, 1e-6);
        prop_assert!(grads[0].max_abs_diff(&fd1) < 1e-5, "{:?} vs {:?}", grads[0], fd1);
        prop_assert!(grads[1].max_abs_diff(&fd2) < 1e-5);
    }

    #[test]
    fn replay_reproduces_forward(x in tensor(3, 2), w in tensor(2, 2)) {
        let mut tape = Tape::new();
        let xin = tape.constant(x);
        let p = tape.param(0, w.clone());
        let h = tape.matmul(xin, p).unwrap();
        let out = tape.activation(h, Activation::Relu).unwrap();
        let values = tape.replay().unwrap();
        prop_assert_eq!(&values[out.index()], tape.value(out));
        let doubled = tape.replay_with(&[w.map(|v| 2.0 * v)]).unwrap();
        prop_assert!(doubled[out.index()].max_abs_diff(&tape.value(out).map(|v| 2.0 * v)) < 1e-12);
    }
}

#[test]
fn backward_rejects_non_scalar_seed() {
    let mut tape = Tape::new();
    let p = tape.param(0, Tensor::zeros(&[2, 2]));
    assert!(tape.backward(p).is_err());
}

#[test]
fn csr_rejects_out_of_bounds_triplets() {
    assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    assert!(CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0)]).is_err());
    let s = CsrMatrix::from_triplets(2, 2, &[(1, 0, 2.0), (0, 1, 1.0)]).unwrap();
    assert_eq!(s.to_dense(), Tensor::from_rows(&[&[0.0, 1.0], &[2.0, 0.0]]));
}
