use approx::assert_abs_diff_eq;
use bfcnn_core::dataset::{BatchView, Dataset};
use bfcnn_core::fcnn::{self, ReferenceState, Weights};
use bfcnn_core::netbuild::DualRailMatrices;
use proptest::prelude::*;

fn weights_from(v: &[f64]) -> Weights<f64> {
    let mut a = [0.0; 9];
    a.copy_from_slice(v);
    Weights::from_flat(&a)
}

fn batch_from(v: &[f64]) -> BatchView<f64> {
    BatchView {
        xi: v.chunks(3).map(|c| [c[0], c[1], 1.0]).collect(),
        delta: v.chunks(3).map(|c| c[2]).collect(),
    }
}

/// Scalar re-implementation of one gradient step, written out per weight.
fn hand_step(w: &Weights<f64>, b: &BatchView<f64>, eta: f64) -> Weights<f64> {
    let s = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut out = w.clone();
    for (x, &d) in b.xi.iter().zip(&b.delta) {
        let h1 = s(w.w1[0][0] * x[0] + w.w1[0][1] * x[1] + w.w1[0][2]);
        let h2 = s(w.w1[1][0] * x[0] + w.w1[1][1] * x[1] + w.w1[1][2]);
        let y = s(w.w2[0] * h1 + w.w2[1] * h2 + w.w2[2]);
        let delta_out = (d - y) * y * (1.0 - y);
        out.w2[0] += eta * delta_out * h1;
        out.w2[1] += eta * delta_out * h2;
        out.w2[2] += eta * delta_out;
        let d1 = delta_out * w.w2[0] * h1 * (1.0 - h1);
        let d2 = delta_out * w.w2[1] * h2 * (1.0 - h2);
        for j in 0..3 {
            let xj = if j < 2 { x[j] } else { 1.0 };
            out.w1[0][j] += eta * d1 * xj;
            out.w1[1][j] += eta * d2 * xj;
        }
    }
    out
}

#[test]
fn two_steps_on_or_batches_match_hand_rolled() {
    let ds = Dataset::<f64>::or();
    let w0 = weights_from(&[0.3, -0.2, 0.1, 0.5, 0.4, -0.3, 0.7, -0.6, 0.2]);
    let b0 = ds.batch(0, 2).unwrap();
    let b1 = ds.batch(1, 2).unwrap();
    let lib = fcnn::mbgd_step(&fcnn::mbgd_step(&w0, &b0, 0.5), &b1, 0.5);
    let hand = hand_step(&hand_step(&w0, &b0, 0.5), &b1, 0.5);
    for (a, b) in lib.flat().iter().zip(hand.flat()) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
    }
}

#[test]
fn bias_sign_convention() {
    // e = 0.5 at Ñ = 0 with η = 1: the output bias moves by +0.125.
    let w = Weights::zeros();
    let b = BatchView {
        xi: vec![[0.0, 0.0, 1.0]],
        delta: vec![1.0],
    };
    let g = fcnn::gradients(&w, &b, 1.0);
    assert_abs_diff_eq!(g.w2[2], 0.125, epsilon = 1e-15);
    assert_eq!(fcnn::mbgd_step(&w, &b, 0.0), w);
}

#[test]
fn identical_columns_give_identical_outputs() {
    let w = weights_from(&[0.3, -0.2, 0.1, 0.5, 0.4, -0.3, 0.7, -0.6, 0.2]);
    let b = batch_from(&[0.4, 0.9, 1.0, 0.4, 0.9, 1.0]);
    let y = fcnn::feedforward(&w, &b).y;
    assert_eq!(y[0], y[1]);
}

#[test]
fn zero_error_gives_zero_gradient() {
    let w = weights_from(&[0.3, -0.2, 0.1, 0.5, 0.4, -0.3, 0.7, -0.6, 0.2]);
    let mut b = batch_from(&[0.1, 0.2, 0.0, 0.7, 0.3, 0.0]);
    b.delta = fcnn::feedforward(&w, &b).y;
    assert!(fcnn::gradients(&w, &b, 1.0)
        .flat()
        .iter()
        .all(|&g| g == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rail_difference_equals_plain_gradient(
        pos in prop::collection::vec(0.0f64..2.0, 9),
        neg in prop::collection::vec(0.0f64..2.0, 9),
        data in prop::collection::vec(0.0f64..1.0, 6),
        eta in 0.01f64..1.0,
    ) {
        let mut rails = DualRailMatrices::from_weights(&weights_from(&pos));
        let n = DualRailMatrices::from_weights(&weights_from(&neg));
        rails.w1_neg = n.w1_pos;
        rails.w2_neg = n.w2_pos;
        let b = batch_from(&data);
        let st = ReferenceState::new(rails.clone());
        let dual = fcnn::dual_rail_step(&st, &b, eta);
        prop_assert!(dual.rails.is_nonnegative());
        let plain = fcnn::mbgd_step(&rails.represented(), &b, eta);
        for (a, b) in dual.weights().flat().iter().zip(plain.flat()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn summed_gradient_ignores_sample_order(
        w in prop::collection::vec(-2.0f64..2.0, 9),
        data in prop::collection::vec(0.0f64..1.0, 9),
    ) {
        let w = weights_from(&w);
        let b = batch_from(&data);
        let mut r = b.clone();
        r.xi.reverse();
        r.delta.reverse();
        let g1 = fcnn::gradients(&w, &b, 1.0).flat();
        let g2 = fcnn::gradients(&w, &r, 1.0).flat();
        for (a, b) in g1.iter().zip(g2) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }
}

#[test]
fn default_initial_rails_are_seeded_and_positive() {
    let a = fcnn::random_initial::<f64>(42, 0.1, 0.9);
    let b = fcnn::random_initial::<f64>(42, 0.1, 0.9);
    assert_eq!(a, b);
    assert!(a
        .w1_neg
        .iter()
        .flatten()
        .chain(&a.w2_neg)
        .all(|&v| v == 0.0));
    assert!(a
        .w1_pos
        .iter()
        .flatten()
        .chain(&a.w2_pos)
        .all(|&v| (0.1..=0.9).contains(&v)));
    assert_ne!(a, fcnn::random_initial::<f64>(7, 0.1, 0.9));
}
