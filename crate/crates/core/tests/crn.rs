use approx::assert_relative_eq;
use bfcnn_core::{compose, parse_crn, write_crn, Crn64, CrnBuilder, CrnError, State64};
use proptest::prelude::*;

fn random_network(rates: &[f64]) -> Crn64 {
    let mut b = CrnBuilder::new();
    b.reaction(&[("A", 1), ("B", 1)], &[("C", 1)], rates[0]);
    b.reaction(&[("C", 2)], &[("A", 1), ("B", 3)], rates[1]);
    b.produce(&[&"A"], "D", rates[2]);
    b.decay("D", rates[3]);
    b.reaction(&[], &[("B", 1)], rates[4]);
    b.build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_is_linear_in_the_rate_constants(
        rates in prop::collection::vec(0.01f64..5.0, 5),
        scale in 0.1f64..10.0,
        x in prop::collection::vec(0.0f64..3.0, 4),
    ) {
        let crn = random_network(&rates);
        let scaled: Vec<f64> = rates.iter().map(|r| r * scale).collect();
        let crn2 = random_network(&scaled);
        let state = State64::new(x);
        let d1 = crn.derivative(&state).unwrap();
        let d2 = crn2.derivative(&state).unwrap();
        for (a, b) in d1.iter().zip(&d2) {
            assert_relative_eq!(a * scale, *b, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn catalysts_have_zero_net_change(k in 0.01f64..5.0, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let crn = parse_crn::<f64>(&format!("A + B -> A + B + C ; k={k}")).unwrap();
        let x = crn.state_from([("A", a), ("B", b)]).unwrap();
        let d = crn.derivative(&x).unwrap();
        prop_assert_eq!(d[crn.id("A").unwrap()], 0.0);
        prop_assert_eq!(d[crn.id("B").unwrap()], 0.0);
        assert_relative_eq!(d[crn.id("C").unwrap()], k * a * b, max_relative = 1e-14);
    }

    #[test]
    fn text_form_round_trips(rates in prop::collection::vec(0.001f64..100.0, 5)) {
        let crn = random_network(&rates);
        let back = parse_crn::<f64>(&write_crn(&crn)).unwrap();
        prop_assert_eq!(back, crn);
    }

    #[test]
    fn negative_entries_are_clamped_on_read(v in -1e-13f64..0.0) {
        let s = State64::new(vec![v, 1.0]);
        prop_assert_eq!(s.get(0), 0.0);
        prop_assert_eq!(s.raw(0), v);
    }
}

#[test]
fn composition_stacks_stoichiometry_over_the_merged_species() {
    let a = parse_crn::<f64>("A + B -> C ; k=1\nC -> 0 ; k=2").unwrap();
    let b = parse_crn::<f64>("C + D -> 2 A ; k=3").unwrap();
    let c = compose(&a, &b, &[]).unwrap();
    let names: Vec<&str> = c.crn.species().iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["A", "B", "C", "D"]);
    assert_eq!(
        c.crn.stoichiometric_matrix(),
        vec![
            vec![-1, 0, 2],
            vec![-1, 0, 0],
            vec![1, -1, -1],
            vec![0, 0, -1]
        ]
    );
    assert_eq!(c.b_to_merged, vec![2, 3, 0]);

    // Renaming B's species onto A's before merging.
    let b = parse_crn::<f64>("Z -> 0 ; k=1").unwrap();
    let c = compose(&a, &b, &[("Z", "C")]).unwrap();
    assert_eq!(c.crn.n_species(), 3);
    assert_eq!(c.crn.stoichiometric_matrix()[2], vec![1, -1, -1]);
}

#[test]
fn states_below_the_tolerance_are_rejected() {
    let crn = parse_crn::<f64>("A -> B ; k=1").unwrap();
    let x = State64::new(vec![-1e-6, 0.0]);
    assert!(matches!(
        crn.validate_state(&x),
        Err(CrnError::NegativeConcentration { .. })
    ));
    let cfg = bfcnn_core::IntegratorConfig64::default();
    assert!(bfcnn_core::integrate_endpoint(&crn, &x, 1.0, &cfg).is_err());
    // Reads clamp, so the derivative sees zero.
    assert_eq!(crn.derivative(&x).unwrap(), vec![0.0, 0.0]);
    assert!(crn.validate_state(&State64::new(vec![-1e-13, 0.0])).is_ok());
    let x = State64::new(vec![1.0]);
    assert!(matches!(
        crn.derivative(&x),
        Err(CrnError::DimensionMismatch { .. })
    ));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let err = parse_crn::<f64>("A -> B ; k=1\nA -> ; k=1").unwrap_err();
    assert!(matches!(err, CrnError::Parse { line: 2, .. }), "{err:?}");
    assert!(parse_crn::<f64>("A -> B ; k=-1").is_err());
}
