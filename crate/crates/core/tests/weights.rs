use fbmoo_core::dyadic::*;
use fbmoo_core::gridfn::*;
use fbmoo_core::weights::*;
use num_traits::{One, Zero};

fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

fn e(s: &str) -> Exponent {
    s.parse().unwrap()
}

#[test]
fn exponent_parsing() {
    assert!(e("inf").is_infinite());
    assert_eq!(e("4/3").reciprocal(), q(3, 4));
    assert_eq!(e("2").reciprocal(), q(1, 2));
    assert_eq!(e("1.5").reciprocal(), q(2, 3));
    assert_eq!(e("4/3").to_string(), "4/3");
    assert!("x".parse::<Exponent>().is_err());
    assert!("-2".parse::<Exponent>().is_err());
    let v: Vec<Exponent> = serde_json::from_str(r#"["inf", 4, "4/3"]"#).unwrap();
    assert_eq!(v, vec![Exponent::INFINITY, Exponent::integer(4), e("4/3")]);
}

#[test]
fn linear_example() {
    let t = ExponentTuple::new(Q::zero(), &[e("2")], &[e("1")], Exponent::INFINITY).unwrap();
    assert_eq!(t.inv_p_tilde(), q(1, 2));
    assert_eq!(t.inv_delta(0), q(1, 2));
    assert_eq!(t.inv_delta(1), q(1, 2));
    assert_eq!(t.inv_gamma(), q(2, 1));
    assert_eq!(t.zeta(), Q::one());
    assert_eq!(t.inv_rho(), Q::one());
    assert!(t.identities_hold());
}

#[test]
fn bilinear_example() {
    let t = ExponentTuple::new(Q::zero(), &[e("2"), e("2")], &[e("1"), e("1")], Exponent::INFINITY).unwrap();
    assert_eq!(t.inv_p_tilde(), Q::one());
    assert_eq!(t.inv_p(2), Q::zero());
    assert_eq!((0..=2).map(|i| t.inv_p(i)).sum::<Q>(), Q::one());
    assert_eq!(t.inv_theta(0), q(3, 2));
    assert!(t.identities_hold());
}

#[test]
fn degenerate_tuple_is_flagged() {
    let t = ExponentTuple::new(Q::zero(), &[e("3"), e("6")], &[e("3"), e("6")], e("2")).unwrap();
    assert!(t.is_degenerate());
    assert_eq!(t.zeta(), Q::zero());
    assert!(t.inv_deltas().iter().all(Zero::is_zero));
    assert!(t.theta_sharp().is_none());
}

#[test]
fn sharp_exponent() {
    let t = ExponentTuple::new(Q::zero(), &[e("4")], &[e("2")], Exponent::INFINITY).unwrap();
    // δ_1/r_1 = 2, δ_2/s′ = 4
    assert_eq!(t.theta_sharp(), Some(q(4, 1)));
    assert_eq!(t.xi(), Some(q(4, 1)));
}

#[test]
fn inadmissible_tuples() {
    let err = ExponentTuple::new(Q::zero(), &[e("2")], &[e("4")], Exponent::INFINITY).unwrap_err();
    assert!(err.to_string().contains("(r,s) ⪯ (p,p̃)"));
    assert!(ExponentTuple::new(Q::zero(), &[e("2")], &[e("1")], e("1")).is_err());
    assert!(ExponentTuple::new(q(1, 1), &[e("2")], &[e("1")], Exponent::INFINITY).is_err());
    assert!(ExponentTuple::new(Q::zero(), &[e("1")], &[e("1")], Exponent::INFINITY).is_err());
}

#[test]
fn ap_examples() {
    let l = Lattice::standard(8).unwrap();
    for c in [1.0, 3.7] {
        let w = GridFunction::constant(8, c);
        for p in [1.0, 2.0, 3.5] {
            assert!((ap_constant(&w, p, &l).unwrap().constant - 1.0).abs() < 1e-12);
        }
    }
    let w = power_weight(0.5, 8).unwrap();
    let rep = ap_constant(&w, 2.0, &l).unwrap();
    assert!(rep.constant > 1.0 && rep.constant < 2.0);
    assert_eq!(rep.per_cube_values.len(), 511);
    assert!(ap_constant(&GridFunction::zeros(3), 2.0, &l).is_err());
}

#[test]
fn multilinear_examples() {
    let l = Lattice::standard(6).unwrap();
    let t = ExponentTuple::new(Q::zero(), &[e("4")], &[e("2")], Exponent::INFINITY).unwrap();
    let one = WeightTuple::new(vec![GridFunction::constant(8, 1.0)]).unwrap();
    assert!((multilinear_constant(&one, &t, &l).unwrap().constant - 1.0).abs() < 1e-12);
    let c = WeightTuple::new(vec![GridFunction::constant(8, 5.0)]).unwrap();
    assert!((multilinear_constant(&c, &t, &l).unwrap().constant - 1.0).abs() < 1e-12);

    let mut prev = 0.0;
    for d in [0.5, 1.0, 2.0] {
        let w = WeightTuple::new(vec![power_weight(d, 10).unwrap()]).unwrap();
        let k = multilinear_constant(&w, &t, &Lattice::standard(10).unwrap()).unwrap().constant;
        assert!(k > prev);
        prev = k;
    }
}

#[test]
fn factorization_trivial_weights() {
    let l = Lattice::standard(6).unwrap();
    let t = ExponentTuple::new(Q::zero(), &[e("2"), e("2")], &[e("1"), e("1")], Exponent::INFINITY).unwrap();
    let w = WeightTuple::new(vec![GridFunction::constant(6, 1.0); 2]).unwrap();
    let f = factorize_weights(&w, &t, &l).unwrap();
    assert!(f.omega_tilde.values().iter().all(|v| (*v - 1.0).abs() < 1e-15));
    assert!(f.w.values().iter().all(|v| (*v - 1.0).abs() < 1e-15));
    assert!(f.report.all_hold());
    for c in f.report.theta_constants.iter().chain([&f.report.tilde_constant, &f.report.w_constant]) {
        assert!((c - 1.0).abs() < 1e-12);
    }
}

#[test]
fn factorization_linear_uses_empty_product() {
    let l = Lattice::standard(6).unwrap();
    let t = ExponentTuple::new(Q::zero(), &[e("4")], &[e("2")], Exponent::INFINITY).unwrap();
    let w0 = power_weight(0.3, 6).unwrap();
    let f = factorize_weights(&WeightTuple::new(vec![w0.clone()]).unwrap(), &t, &l).unwrap();
    assert!(f.omega_tilde.values().iter().all(|v| *v == 1.0));
    for (a, b) in f.w.values().iter().zip(w0.values()) {
        assert!((a - b * b).abs() < 1e-14);
    }
}

#[test]
fn factorization_power_weight_bilinear() {
    let l = Lattice::standard(8).unwrap();
    let t = ExponentTuple::new(Q::zero(), &[e("2"), e("2")], &[e("1"), e("1")], Exponent::INFINITY).unwrap();
    let w = WeightTuple::new(vec![power_weight(0.3, 8).unwrap(), GridFunction::constant(8, 1.0)]).unwrap();
    let f = factorize_weights(&w, &t, &l).unwrap();
    assert!(f.report.checks.iter().filter(|c| c.name.starts_with("theta_power") || c.name == "tilde").all(|c| c.holds), "{:?}", f.report);
    let back = inverse_factorize(&w.weights()[..1], &f.w, &t).unwrap();
    for (a, b) in back.get(1).values().iter().zip(w.get(1).values()) {
        assert!((a - b).abs() <= 1e-12 * b);
    }
    assert!(check_inverse_bound(&back, &f.w, &t, &l).unwrap().holds);
}

#[test]
fn bloom_and_power_examples() {
    let x = power_weight(1.0, 6).unwrap();
    let one = GridFunction::constant(6, 1.0);
    assert!(bloom_weight(&x, &x, 3).unwrap().values().iter().all(|v| (*v - 1.0).abs() < 1e-15));
    let s = bloom_weight(&x, &one, 2).unwrap();
    let x_half = power_weight(0.5, 6).unwrap();
    for (a, b) in s.values().iter().zip(x_half.values()) {
        assert!((a - b).abs() < 1e-15);
    }
    let b = bloom_weight(&power_weight(0.4, 6).unwrap(), &power_weight(0.1, 6).unwrap(), 3).unwrap();
    for (a, c) in b.values().iter().zip(power_weight(0.1, 6).unwrap().values()) {
        assert!((a - c).abs() < 1e-14);
    }
    assert!(bloom_weight(&x, &one, 0).is_err());

    assert!(power_weight(0.0, 5).unwrap().values().iter().all(|v| *v == 1.0));
    assert_eq!(power_weight(1.0, 10).unwrap().values()[0], 2f64.powi(-11));
    let v = power_weight(-0.25, 10).unwrap().values()[0];
    assert!((v - 2f64.powi(-11).powf(-0.25)).abs() < 1e-14);
    assert!(power_weight(-1.0, 4).is_err());
}

mod props {
    use fbmoo_core::dyadic::*;
    use fbmoo_core::gridfn::*;
    use fbmoo_core::verify::{random_exponent_tuple, rng_from_seed};
    use fbmoo_core::weights::*;
    use proptest::prelude::*;

    fn weight(n: u32) -> impl Strategy<Value = GridFunction> {
        proptest::collection::vec(0.05f64..20.0, 1usize << n).prop_map(move |v| GridFunction::new(n, v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ap_constant_at_least_one_and_scale_invariant(w in weight(5), p in 1.1f64..6.0, c in 0.1f64..10.0) {
            let lat = Lattice::standard(5).unwrap();
            let a = ap_constant(&w, p, &lat).unwrap().constant;
            let b = ap_constant(&w.scale(c), p, &lat).unwrap().constant;
            prop_assert!(a >= 1.0 - 1e-12);
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }

        #[test]
        fn exponent_identities_exact(seed in any::<u64>(), m in 1usize..4) {
            let t = random_exponent_tuple(m, false, &mut rng_from_seed(seed));
            prop_assert!(t.identities_hold());
            let text = serde_json::to_string(&t.summary()).unwrap();
            prop_assert!(!text.is_empty());
        }

        #[test]
        fn exponent_string_round_trip(n in 1i128..50, d in 1i128..50) {
            prop_assume!(n > d);
            let e = Exponent::finite(Q::new(n, d)).unwrap();
            let back: Exponent = e.to_string().parse().unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
