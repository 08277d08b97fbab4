use fbmoo_core::dyadic::*;
use fbmoo_core::gridfn::*;
use fbmoo_core::sparse::*;
use fbmoo_core::verify::*;

#[test]
fn weak_quasinorm_simple() {
    // q = 1 on half the cells: sup is 1·(1/2)^{1}
    let q = [1.0, 1.0, 0.0, 0.0];
    let nu = [0.25; 4];
    assert_eq!(weak_quasinorm(&q, &nu, 1.0), 0.5);
    assert_eq!(weak_quasinorm(&[0.0; 4], &nu, 1.0), 0.0);
}

#[test]
fn mean_pair_difference_matches_brute_force() {
    let v = [0.3, -1.0, 2.5, 0.3, 7.0];
    let mut brute = 0.0;
    for a in &v {
        for b in &v {
            brute += f64::abs(a - b);
        }
    }
    brute /= 25.0;
    let mut w = v.to_vec();
    assert!((mean_pair_difference(&mut w) - brute).abs() < 1e-14);
}

#[test]
fn corner_chain_is_half_sparse() {
    let fam = corner_chain_family(6).unwrap();
    assert!(is_sparse(&fam).sparse);
}

#[test]
fn random_tuples_are_admissible() {
    let mut rng = rng_from_seed(1);
    for _ in 0..50 {
        let t = random_exponent_tuple(2, true, &mut rng);
        assert!(t.identities_hold());
        assert!(t.check_factorizable().is_ok());
    }
}

#[test]
fn random_specs_validate() {
    let mut rng = rng_from_seed(2);
    assert!(random_shift_spec(2, &[1, 2, 0], 3, 0.5, &mut rng).is_ok());
    assert!(random_paraproduct_spec(4, 0.25, &mut rng).is_ok());
}

#[test]
fn report_timing_is_separable() {
    let tol = Tolerances::default();
    let a = check_haar_system(3, 5, 9, &tol).unwrap();
    let b = check_haar_system(3, 5, 9, &tol).unwrap();
    assert_eq!(a.without_timing(), b.without_timing());
    assert!(a.passed());
}

#[test]
fn maximal_weak_type_zero_input() {
    let l = Lattice::standard(4).unwrap();
    let rep = check_maximal_weak_type(&[GridFunction::zeros(6)], &[1.0], &[0.0], &l, &Tolerances::default()).unwrap();
    assert_eq!(rep.measured["ratio"], 0.0);
    assert!(rep.passed());
}

#[test]
fn fbmoo_constant_input_has_no_oscillation() {
    let l = Lattice::standard(5).unwrap();
    let f = GridFunction::constant(7, 2.0);
    let (_, c2) = fbmoo_ratios(OperatorKind::Maximal, &[f], &DyadicCube::standard(3, 2), &l, &[1.0], &[0.0]).unwrap();
    assert_eq!(c2, Some(0.0));
}

mod props {
    use fbmoo_core::verify::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn weak_quasinorm_is_homogeneous(q in proptest::collection::vec(0.0f64..10.0, 1..64), c in 0.1f64..5.0, e in 0.2f64..2.0) {
            let nu = vec![1.0 / q.len() as f64; q.len()];
            let a = weak_quasinorm(&q, &nu, e);
            let scaled: Vec<f64> = q.iter().map(|v| v * c).collect();
            prop_assert!((weak_quasinorm(&scaled, &nu, e) - c * a).abs() <= 1e-12 * (1.0 + c * a));
            // never larger than the sup norm times the total mass
            let sup = q.iter().copied().fold(0.0, f64::max);
            prop_assert!(a <= sup * (1.0 + 1e-12));
        }

        #[test]
        fn mean_pair_difference_brute(v in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            let n = v.len() as f64;
            let brute: f64 = v.iter().flat_map(|a| v.iter().map(move |b| (a - b).abs())).sum::<f64>() / (n * n);
            let mut w = v.clone();
            prop_assert!((mean_pair_difference(&mut w) - brute).abs() <= 1e-12 * (1.0 + brute));
        }

        #[test]
        fn slope_of_a_line(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let x: Vec<f64> = (0..10).map(f64::from).collect();
            let y: Vec<f64> = x.iter().map(|t| a * t + b).collect();
            prop_assert!((ls_slope(&x, &y) - a).abs() < 1e-9);
        }
    }
}
