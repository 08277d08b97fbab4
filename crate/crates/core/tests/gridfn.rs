use fbmoo_core::dyadic::*;
use fbmoo_core::gridfn::*;
use fbmoo_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn root() -> DyadicCube {
    DyadicCube::standard(0, 0)
}

#[test]
fn avg_examples() {
    let one = GridFunction::constant(8, 1.0);
    assert_eq!(avg(&one, &root(), 1.0, 0.0).unwrap(), 1.0);

    // ∫ x² = 1/3 on a fine midpoint grid
    let x = GridFunction::from_fn_midpoint(12, |x| x);
    let v = avg(&x, &root(), 2.0, 0.0).unwrap();
    assert!((v - 3f64.powf(-0.5)).abs() < 1e-7);

    let half = DyadicCube::standard(1, 0);
    let v = avg(&one, &half, 2.0, 0.5).unwrap();
    assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn avg_errors() {
    let one = GridFunction::constant(4, 1.0);
    assert!(avg(&one, &root(), 2.0, 0.6).is_err());
    assert!(avg(&one, &root(), 0.5, 0.0).is_err());
    assert!(avg(&one, &DyadicCube::standard(5, 0), 1.0, 0.0).is_err());
}

#[test]
fn maximal_avg_examples() {
    let l = Lattice::standard(4).unwrap();
    let one = GridFunction::constant(6, 1.0);
    let q = DyadicCube::standard(3, 5);
    assert_eq!(maximal_avg(&one, &q, &l, 1.0, 0.0).unwrap(), 1.0);

    let f = GridFunction::indicator(6, 0.0, 0.25);
    let q = DyadicCube::standard(2, 0);
    assert_eq!(maximal_avg(&f, &q, &l, 1.0, 0.0).unwrap(), 1.0);
    let q = DyadicCube::standard(1, 1);
    assert_eq!(maximal_avg(&f, &q, &l, 1.0, 0.0).unwrap(), 0.25);
}

#[test]
fn luxemburg_examples() {
    let q = root();
    assert_eq!(luxemburg_norm(&GridFunction::zeros(5), &q, YoungFunction::ExpL(1.0)).unwrap(), 0.0);
    for c in [0.3, 1.0, 7.5] {
        let f = GridFunction::constant(5, c);
        let v = luxemburg_norm(&f, &q, YoungFunction::ExpL(1.0)).unwrap();
        assert!((v - c / 2f64.ln()).abs() <= 1e-9 * c, "{v}");
        let v = luxemburg_norm(&f, &q, YoungFunction::Power(3.0)).unwrap();
        assert!((v - c).abs() <= 1e-9 * c);
    }
}

#[test]
fn luxemburg_power_matches_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in [1.0, 1.5, 2.0, 4.0] {
        let f = GridFunction::random_piecewise(8, 5, 0.0, 3.0, &mut rng);
        for q in [root(), DyadicCube::standard(2, 3)] {
            let lux = luxemburg_norm(&f, &q, YoungFunction::Power(p)).unwrap();
            let a = avg(&f, &q, p, 0.0).unwrap();
            assert!((lux - a).abs() <= 1e-9 * a, "p={p}: {lux} vs {a}");
        }
    }
}

#[test]
fn llogl_dominates_l1() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = GridFunction::random_piecewise(8, 6, 0.0, 5.0, &mut rng);
    let l1 = avg(&f, &root(), 1.0, 0.0).unwrap();
    let llogl = luxemburg_norm(&f, &root(), YoungFunction::LLogL(1.0)).unwrap();
    assert!(llogl >= l1);
}

#[test]
fn bmo_examples() {
    let l = Lattice::standard(6).unwrap();
    assert_eq!(bmo_norm(&GridFunction::constant(8, 2.0), &l).unwrap(), 0.0);
    let x = GridFunction::from_fn_midpoint(10, |x| x);
    assert!((bmo_norm(&x, &l).unwrap() - 0.25).abs() < 1e-12);
    let one = GridFunction::constant(10, 1.0);
    assert!((bmo_norm_weighted(&x, &one, &l).unwrap() - bmo_norm(&x, &l).unwrap()).abs() < 1e-15);
    let zero = GridFunction::zeros(10);
    assert!(matches!(
        bmo_norm_weighted(&x, &zero, &l),
        Err(Error::DegenerateWeight(_))
    ));
}

#[test]
fn fbmo_examples() {
    let l = Lattice::standard(5).unwrap();
    assert_eq!(fbmo_norm_haar(&GridFunction::constant(8, 3.0), &l, 0.0).unwrap(), 0.0);
    let h = GridFunction::haar(8, &root(), true).unwrap();
    assert!((fbmo_norm_haar(&h, &l, 0.0).unwrap() - 1.0).abs() < 1e-12);
    assert!((fbmo_norm_haar(&h, &l, 0.5).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn fbmo_haar_agrees_with_direct_bmo2() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for shift_num in [0u64, 3] {
        let l = Lattice::new(6, GridShift::new(shift_num, 3).unwrap()).unwrap();
        let b = GridFunction::random_piecewise(9, 9, -2.0, 2.0, &mut rng);
        let haar = fbmo_norm_haar(&b, &l, 0.0).unwrap();
        let direct = bmo2_norm(&b, &l).unwrap();
        assert!((haar - direct).abs() < 1e-8, "{haar} vs {direct}");
    }
}

#[test]
fn csv_round_trip() {
    let f = GridFunction::from_fn_midpoint(4, |x| x.powf(-0.125));
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("index,value\n0,"));
    let g = GridFunction::read_csv(buf.as_slice()).unwrap();
    assert_eq!(f, g);
    assert!(GridFunction::read_csv("index,value\n0,1\n1,2\n2,3\n".as_bytes()).is_err());
    assert!(GridFunction::read_csv("i,v\n0,1\n".as_bytes()).is_err());
}

#[test]
fn constructor_rejects_bad_data() {
    assert!(matches!(GridFunction::new(2, vec![0.0; 3]), Err(Error::BadLength { .. })));
    assert!(matches!(
        GridFunction::new(1, vec![0.0, f64::NAN]),
        Err(Error::NonFinite(1))
    ));
    assert!(GridFunction::new(1, vec![1.0, -1.0]).unwrap().check_nonnegative().is_err());
}

#[test]
fn pyramid_matches_direct_integrals() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = GridFunction::random_piecewise(7, 7, -1.0, 1.0, &mut rng);
    let l = Lattice::new(5, GridShift::new(5, 4).unwrap()).unwrap();
    let sums = f.cube_integrals(&l).unwrap();
    for c in l.cubes() {
        assert!((sums[l.id(&c)] - f.cube_integral(&c).unwrap()).abs() < 1e-13);
    }
}

fn arb_fn(resolution: u32) -> impl Strategy<Value = GridFunction> {
    prop::collection::vec(0.0f64..10.0, 1usize << resolution)
        .prop_map(move |v| GridFunction::new(resolution, v).unwrap())
}

proptest! {
    #[test]
    fn jensen_monotone_in_r(f in arb_fn(6), r in 1.0f64..4.0, dr in 0.0f64..3.0, level in 0u32..4, idx in 0u64..8) {
        let q = DyadicCube::standard(level, idx % (1 << level));
        let a = avg(&f, &q, r, 0.0).unwrap();
        let b = avg(&f, &q, r + dr, 0.0).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn maximal_dominates_average(f in arb_fn(6), level in 0u32..6, idx in 0u64..64, eta in 0.0f64..0.9) {
        let l = Lattice::standard(6).unwrap();
        let q = DyadicCube::standard(level, idx % (1 << level));
        prop_assert!(maximal_avg(&f, &q, &l, 1.0, eta).unwrap() >= avg(&f, &q, 1.0, eta).unwrap());
    }

    #[test]
    fn holder_on_averages(f in arb_fn(5), g in arb_fn(5), t1 in 1.0f64..5.0, t2 in 1.0f64..5.0, level in 0u32..4) {
        let t = 1.0 / (1.0 / t1 + 1.0 / t2);
        prop_assume!(t >= 1.0);
        let q = DyadicCube::standard(level, 0);
        let fg = f.zip_with(&g, |a, b| a * b).unwrap();
        let lhs = avg(&fg, &q, t, 0.0).unwrap();
        let rhs = avg(&f, &q, t1, 0.0).unwrap() * avg(&g, &q, t2, 0.0).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-300);
    }
}
