use fbmoo_core::dyadic::*;
use fbmoo_core::gridfn::*;
use fbmoo_core::operators::*;
use fbmoo_core::Error;

fn lat(k: u32) -> Lattice {
    Lattice::standard(k).unwrap()
}

#[test]
fn maximal_examples() {
    let l = lat(6);
    let f = GridFunction::indicator(8, 0.0, 0.5);
    assert_eq!(maximal(std::slice::from_ref(&f), 0.25, &l, &[1.0], &[0.0]).unwrap(), 1.0);
    assert_eq!(maximal(&[f], 0.75, &l, &[1.0], &[0.0]).unwrap(), 0.5);
    let one = GridFunction::constant(8, 1.0);
    let v = maximal(&[one.clone(), one], 0.3, &l, &[1.0, 2.0], &[0.0, 0.0]).unwrap();
    assert!((v - 1.0).abs() < 1e-15);
    let f = GridFunction::zeros(4);
    assert!(maximal(&[f], 1.0, &l, &[1.0], &[0.0]).is_err());
}

#[test]
fn maximal_grid_matches_pointwise() {
    let l = Lattice::new(5, GridShift::new(3, 3).unwrap()).unwrap();
    let f1 = GridFunction::from_fn_midpoint(7, |x| (7.0 * x).sin().abs());
    let f2 = GridFunction::from_fn_midpoint(7, |x| x * x + 0.1);
    let fs = [f1, f2];
    let (r, eta) = ([1.5, 1.0], [0.2, 0.3]);
    let g = maximal_grid(&fs, &l, &r, &eta).unwrap();
    for k in (0..128).step_by(5) {
        let x = k as f64 / 128.0;
        let v = maximal(&fs, x, &l, &r, &eta).unwrap();
        assert!((g.values()[k] - v).abs() <= 1e-12 * v);
        assert!(v <= maximal_tensor(&fs, x, &l, &r, &eta).unwrap() * (1.0 + 1e-12));
    }
}

#[test]
fn fractional_integral_examples() {
    let one = GridFunction::constant(12, 1.0);
    let k = KernelSpec::new(1, 0.5);
    let v = fractional_integral(std::slice::from_ref(&one), 0.0, &k).unwrap();
    assert!((v - 2.0).abs() < 0.02 * 2.0, "{v}");
    assert_eq!(fractional_integral(&[GridFunction::zeros(6)], 0.3, &k).unwrap(), 0.0);
    assert!(fractional_integral(std::slice::from_ref(&one), 0.0, &KernelSpec::new(1, 1.0)).is_err());
    assert!(fractional_integral(&[one], 0.0, &KernelSpec::new(2, 0.5)).is_err());
}

#[test]
fn bilinear_reference_value() {
    // ∫∫ (|½−y₁|+|½−y₂|)^{-1} = 4 ln 2
    let one = GridFunction::constant(8, 1.0);
    let k = KernelSpec::new(2, 1.0);
    let v = fractional_integral(&[one.clone(), one], 0.5, &k).unwrap();
    assert!((v - 4.0 * 2f64.ln()).abs() < 0.02 * 4.0 * 2f64.ln(), "{v}");
}

#[test]
fn grid_path_matches_brute_force() {
    let f1 = GridFunction::from_fn_midpoint(6, |x| if x < 0.3 { 2.0 } else { 0.5 });
    let f2 = GridFunction::from_fn_midpoint(6, |x| (3.0 * x).floor() + 1.0);
    for kernel in [KernelSpec::new(2, 0.5), KernelSpec::new(2, 1.0), KernelSpec::truncated(2, 1.0, 0.1)] {
        let fs = [f1.clone(), f2.clone()];
        let g = fractional_integral_grid(&fs, &kernel).unwrap();
        for a in [0usize, 1, 17, 40, 63] {
            let x = a as f64 / 64.0;
            let v = fractional_integral(&fs, x, &kernel).unwrap();
            assert!((g.values()[a] - v).abs() <= 1e-10 * v.abs().max(1.0), "{a}: {} vs {v}", g.values()[a]);
        }
    }
    let k1 = KernelSpec::truncated(1, 0.5, 0.05);
    let g = fractional_integral_grid(std::slice::from_ref(&f2), &k1).unwrap();
    for a in [0usize, 9, 33] {
        let v = fractional_integral(std::slice::from_ref(&f2), a as f64 / 64.0, &k1).unwrap();
        assert!((g.values()[a] - v).abs() <= 1e-12 * v.abs().max(1.0));
    }
}

#[test]
fn shift_examples() {
    let l = lat(4);
    let p = DyadicCube::standard(0, 0);
    let f1 = GridFunction::from_fn_midpoint(6, |x| x);
    let f2 = GridFunction::from_fn_midpoint(6, |x| 1.0 - x * x);
    let spec = ShiftSpec::new(
        0.5,
        vec![0, 0, 0],
        vec![true, true, true],
        1.0,
        vec![ShiftTerm { p, j: vec![p, p, p], beta: 1.0 }],
    )
    .unwrap();
    let out = apply_shift(&spec, &[f1.clone(), f2.clone()], &l).unwrap();
    let c = haar_coefficient(&f1, &p).unwrap() * haar_coefficient(&f2, &p).unwrap();
    let h = GridFunction::haar(6, &p, true).unwrap();
    for (a, b) in out.values().iter().zip(h.values()) {
        assert!((a - c * b).abs() < 1e-14);
    }
    let zero = ShiftSpec::new(0.5, vec![0, 0, 0], vec![true, false, true], 1.0, vec![
        ShiftTerm { p, j: vec![p, p, p], beta: 0.0 },
    ])
    .unwrap();
    assert!(apply_shift(&zero, &[f1, f2], &l).unwrap().values().iter().all(|v| *v == 0.0));
    let consts = [GridFunction::constant(6, 2.0), GridFunction::constant(6, 3.0)];
    assert!(apply_shift(&spec, &consts, &l).unwrap().values().iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn shift_validation() {
    let p = DyadicCube::standard(1, 1);
    let j = p.children()[0];
    let ok = |beta: f64| {
        ShiftSpec::new(0.0, vec![1, 0], vec![true, true], 1.0, vec![ShiftTerm { p, j: vec![j, p], beta }])
    };
    // bound: |J|^{1/2}|P|^{1/2}/|P| = (1/4·1/2)^{1/2}·2
    let bound = (0.25f64 * 0.5).sqrt() / 0.5;
    assert!(ok(bound).is_ok());
    assert!(ok(bound * 1.01).is_err());
    assert!(ShiftSpec::new(0.0, vec![1, 0], vec![false, true], 1.0, vec![]).is_err());
    assert!(ShiftSpec::new(0.0, vec![0, 0], vec![true, true], 1.0, vec![ShiftTerm { p, j: vec![j, p], beta: 0.0 }]).is_err());
}

#[test]
fn paraproduct_examples() {
    let l = lat(3);
    let root = DyadicCube::standard(0, 0);
    let spec = ParaproductSpec::new(0.5, vec![(root, 1.0)]).unwrap();
    let one = GridFunction::constant(5, 1.0);
    let out = apply_paraproduct(&spec, &[one.clone(), one.clone()], &l).unwrap();
    assert_eq!(out, GridFunction::haar(5, &root, true).unwrap());
    let out = apply_paraproduct(&spec, &[GridFunction::zeros(5), one.clone()], &l).unwrap();
    assert!(out.values().iter().all(|v| *v == 0.0));
    let empty = ParaproductSpec::new(0.5, vec![]).unwrap();
    assert!(apply_paraproduct(&empty, &[one.clone(), one], &l).unwrap().values().iter().all(|v| *v == 0.0));
}

#[test]
fn carleson_validation() {
    let c = DyadicCube::standard(2, 1);
    // |c|^{-2η-1} β² <= 1 with η = 0.5: β <= |c| = 1/4
    assert!(ParaproductSpec::new(0.5, vec![(c, 0.25)]).is_ok());
    assert!(matches!(ParaproductSpec::new(0.5, vec![(c, 0.26)]), Err(Error::Carleson { .. })));
    let two = vec![(DyadicCube::standard(0, 0), 0.8), (DyadicCube::standard(1, 0), 0.5)];
    assert!(ParaproductSpec::new(0.0, two.clone()).is_ok());
    assert!(ParaproductSpec::new(0.0, vec![(two[0].0, 0.9), two[1]]).is_err());
}

mod props {
    use fbmoo_core::dyadic::*;
    use fbmoo_core::gridfn::*;
    use fbmoo_core::operators::*;
    use proptest::prelude::*;

    fn grid_fn(n: u32) -> impl Strategy<Value = GridFunction> {
        proptest::collection::vec(0.0f64..4.0, 1usize << n).prop_map(move |v| GridFunction::new(n, v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn maximal_dominates_every_average(f in grid_fn(6), x in 0.0f64..1.0) {
            let lat = Lattice::standard(6).unwrap();
            let m = maximal(std::slice::from_ref(&f), x, &lat, &[1.0], &[0.25]).unwrap();
            for c in lat.chain(x).unwrap() {
                prop_assert!(m >= avg(&f, &c, 1.0, 0.25).unwrap() * (1.0 - 1e-12));
            }
        }

        #[test]
        fn fractional_integral_is_homogeneous_and_monotone(f in grid_fn(5), g in grid_fn(5), c in 0.1f64..3.0) {
            let k = KernelSpec::new(2, 0.75);
            let t = fractional_integral_grid(&[f.clone(), g.clone()], &k).unwrap();
            let ts = fractional_integral_grid(&[f.scale(c), g.clone()], &k).unwrap();
            let bigger = f.map(|v| v + 1.0);
            let tb = fractional_integral_grid(&[bigger, g], &k).unwrap();
            for ((a, b), d) in t.values().iter().zip(ts.values()).zip(tb.values()) {
                prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + b.abs()));
                prop_assert!(*d >= *a - 1e-12);
            }
        }

        #[test]
        fn grid_path_agrees_with_brute_force(f in grid_fn(4), cell in 0usize..16) {
            let k = KernelSpec::new(1, 0.5);
            let grid = fractional_integral_grid(std::slice::from_ref(&f), &k).unwrap();
            let x = cell as f64 / 16.0;
            let direct = fractional_integral(std::slice::from_ref(&f), x, &k).unwrap();
            prop_assert!((grid.values()[cell] - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        }
    }
}
