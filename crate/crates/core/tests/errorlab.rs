use approx::assert_relative_eq;
use bfcnn_core::errorlab::{
    bfd_matrix, envelope_params, fit_by_iteration, fit_convergence_order, multiplication_bound,
    realization_error, sort_records, spearman, trim_overshoot, weight_error_bound,
    weight_error_bound_unrolled, write_error_records, write_fits, write_weights, BoundCoefficients,
    ErrorLabError, ErrorRecord,
};
use bfcnn_core::netbuild::DualRailMatrices;
use proptest::prelude::*;

fn record(t: f64, iteration: usize, err: f64) -> ErrorRecord {
    ErrorRecord {
        dataset: "OR".into(),
        t,
        iteration,
        err_w1: err / 2.0,
        err_w2: err / 2.0,
        err_total: err,
        train_err_max: 0.2,
        terminated: false,
    }
}

#[test]
fn fit_recovers_an_exact_exponential() {
    let pts: Vec<(f64, f64)> = [20.0, 26.0, 32.0, 38.0, 44.0, 50.0]
        .iter()
        .map(|&t: &f64| (t, 3.0 * (-0.25 * t).exp()))
        .collect();
    let f = fit_convergence_order(&pts).unwrap();
    assert_relative_eq!(f.v, 0.25, max_relative = 1e-12);
    assert_relative_eq!(f.intercept, 3f64.ln(), max_relative = 1e-10);
    assert_relative_eq!(f.r2, 1.0, max_relative = 1e-12);
    assert_eq!((f.t_min, f.t_max, f.n_points), (20.0, 50.0, 6));
}

#[test]
fn fit_needs_four_distinct_phase_lengths() {
    let pts = [
        (20.0, 1e-3),
        (20.0, 2e-3),
        (30.0, 1e-4),
        (40.0, 1e-5),
        (50.0, 0.0),
    ];
    assert!(matches!(
        fit_convergence_order(&pts),
        Err(ErrorLabError::InsufficientData { needed: 4, got: 3 })
    ));
    // A constant error fits with zero slope and R² = 1.
    let flat = [(1.0, 0.5), (2.0, 0.5), (3.0, 0.5), (4.0, 0.5)];
    let f = fit_convergence_order(&flat).unwrap();
    assert_eq!((f.v, f.r2), (0.0, 1.0));
}

#[test]
fn trimming_drops_overshoot() {
    let pts = [(30.0, 1e-4), (20.0, 1e-3), (40.0, 5e-4), (50.0, 1e-5)];
    assert_eq!(
        trim_overshoot(&pts),
        vec![(20.0, 1e-3), (30.0, 1e-4), (50.0, 1e-5)]
    );
}

#[test]
fn spearman_properties() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(spearman(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]), Some(1.0));
    assert_eq!(spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]), Some(-1.0));
    assert_eq!(spearman(&x, &[1.0; 5]), None);
    let tied = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 3.0]).unwrap();
    assert!(tied > 0.9 && tied < 1.0);
}

#[test]
fn realization_error_uses_the_largest_rail_entry() {
    let mut a = DualRailMatrices::<f64>::zeros();
    let mut b = DualRailMatrices::<f64>::zeros();
    a.set(1, '+', 2, 3, 0.5);
    b.set(1, '+', 2, 3, 0.2);
    a.set(2, '-', 1, 1, 0.1);
    let (e1, e2, total) = realization_error(&a, &b, 2.0);
    assert_relative_eq!(e1, 0.6, max_relative = 1e-15);
    assert_relative_eq!(e2, 0.2, max_relative = 1e-15);
    assert!(total >= e1.max(e2));
}

#[test]
fn csv_writers_are_sorted_and_stable() {
    let mut recs = vec![
        record(30.0, 2, 1e-3),
        record(20.0, 1, 1e-2),
        record(30.0, 1, 1e-4),
    ];
    sort_records(&mut recs);
    assert_eq!(
        recs.iter().map(|r| (r.t, r.iteration)).collect::<Vec<_>>(),
        vec![(20.0, 1), (30.0, 1), (30.0, 2)]
    );
    let mut out = Vec::new();
    write_error_records(&recs, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(!text.contains('\r'));

    let recs: Vec<ErrorRecord> = (0..5)
        .map(|k| record(20.0 + 6.0 * k as f64, 1, (-0.3 * k as f64).exp()))
        .collect();
    let rows = fit_by_iteration(&recs, false);
    assert_eq!(rows.len(), 1);
    let mut out = Vec::new();
    write_fits(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("dataset,iteration,v,intercept,r2,n_points\n"));

    let mut out = Vec::new();
    write_weights(&DualRailMatrices::<f64>::zeros(), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("layer,sign,row,col,value\n"));
    assert_eq!(text.lines().count(), 19);
}

#[test]
fn bound_helpers_reject_bad_inputs() {
    assert!(envelope_params(1.0, -1.0, 1.0).is_err());
    assert!(multiplication_bound(&[], &[], &[]).is_err());
    assert!(weight_error_bound(&[], 0).is_err());
    let b = bfd_matrix(2, 1.0, &[0.0; 5], &[0.0; 2]);
    assert_eq!(b, [[0.0; 2]; 2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_unrolled_sum(
        vals in prop::collection::vec(0.0f64..2.0, 30),
        m in 1usize..=5,
    ) {
        let coeffs: Vec<BoundCoefficients> = vals
            .chunks(6)
            .map(|c| BoundCoefficients { rs: [c[0], c[1]], transfer: [[c[2], c[3]], [c[4], c[5]]] })
            .collect();
        let a = weight_error_bound(&coeffs, m).unwrap();
        let b = weight_error_bound_unrolled(&coeffs, m).unwrap();
        for k in 0..2 {
            prop_assert!((a[k] - b[k]).abs() <= 1e-12 * a[k].abs().max(1.0));
        }
    }

    #[test]
    fn envelope_dominates_away_from_the_tangent(
        a in 0.1f64..6.0,
        b in 0.1f64..4.0,
        delta in 0.01f64..3.0,
        t in 1e-3f64..300.0,
    ) {
        let e = envelope_params(a, b, delta).unwrap();
        prop_assert!(e.v_max > 0.0 && e.v_max < b);
        prop_assert!(e.margin(t) >= -1e-9);
    }
}
