use fbmoo_core::dyadic::*;
use fbmoo_core::gridfn::*;
use fbmoo_core::sparse::*;

fn std_cube(level: u32, index: u64) -> DyadicCube {
    DyadicCube::standard(level, index)
}

#[test]
fn sparse_examples() {
    let root = std_cube(0, 0);
    let fam = SparseFamily::full(1.0, 4, vec![root]).unwrap();
    assert!(is_sparse(&fam).sparse);

    let fam = SparseFamily::new(
        0.5,
        4,
        vec![root, std_cube(1, 0)],
        vec![(8..16).collect(), (0..4).collect()],
    )
    .unwrap();
    assert!(is_sparse(&fam).sparse);

    let bad = SparseFamily::new(0.5, 4, vec![root, std_cube(1, 0)], vec![(0..16).collect(), (0..4).collect()]).unwrap();
    let cert = is_sparse(&bad);
    assert!(!cert.sparse);
    assert_eq!(cert.cube, Some(1));
    assert_eq!(cert.violation, Some(Violation::Overlap { cell: 0, other: 0 }));

    let small = SparseFamily::new(0.5, 4, vec![root], vec![(0..7).collect()]).unwrap();
    assert!(matches!(is_sparse(&small).violation, Some(Violation::TooSmall { .. })));
    let outside = SparseFamily::new(0.5, 4, vec![std_cube(1, 0)], vec![vec![9]]).unwrap();
    assert!(matches!(is_sparse(&outside).violation, Some(Violation::NotContained { cell: 9 })));
}

#[test]
fn cz_constant_inputs_stop_immediately() {
    let one = GridFunction::constant(6, 1.0);
    let (fam, trace) = build_sparse_cz(&[one.clone(), one.clone()], &one, &std_cube(0, 0), 0.5).unwrap();
    assert_eq!(fam.cubes, vec![std_cube(0, 0)]);
    assert_eq!(fam.exceptional[0].len(), 64);
    assert!(trace.markov_holds());
}

#[test]
fn cz_hand_trace() {
    let f = GridFunction::indicator(6, 0.0, 0.25).scale(4.0);
    let g = GridFunction::constant(6, 1.0);
    let (fam, trace) = build_sparse_cz(&[f], &g, &std_cube(0, 0), 0.5).unwrap();
    assert_eq!(trace.threshold, 4.0);
    assert_eq!(fam.cubes[0], std_cube(0, 0));
    assert_eq!(fam.cubes[1], std_cube(2, 0));
    assert_eq!(fam.exceptional[0], (16..64).collect::<Vec<_>>());
    assert!(is_sparse(&fam).sparse);
}

#[test]
fn cz_all_zero_inputs() {
    let z = GridFunction::zeros(5);
    let (fam, _) = build_sparse_cz(std::slice::from_ref(&z), &z, &std_cube(1, 1), 0.25).unwrap();
    assert_eq!(fam.cubes, vec![std_cube(1, 1)]);
    assert_eq!(fam.exceptional[0], (16..32).collect::<Vec<_>>());
}

#[test]
fn operator_and_form_examples() {
    let root = std_cube(0, 0);
    let fam = SparseFamily::full(0.5, 6, vec![root]).unwrap();
    let sym = SymbolData::trivial(1, 6);
    let f = GridFunction::indicator(6, 0.0, 0.5);
    for x in [0.1, 0.9] {
        assert_eq!(sparse_operator(&fam, &sym, std::slice::from_ref(&f), &[1.0], 0.0, x).unwrap(), 0.5);
    }
    assert_eq!(sparse_operator(&fam, &sym, &[GridFunction::zeros(6)], &[1.0], 0.0, 0.3).unwrap(), 0.0);
    let b = SymbolData::new(vec![GridFunction::constant(6, 3.0)], vec![1], vec![0]).unwrap();
    assert_eq!(sparse_operator(&fam, &b, &[f], &[1.0], 0.0, 0.3).unwrap(), 0.0);

    let one = GridFunction::constant(6, 1.0);
    assert_eq!(sparse_form(&fam, &sym, std::slice::from_ref(&one), &one, &[1.0], 1.0, 0.0).unwrap(), 1.0);
    assert_eq!(sparse_form(&fam, &sym, std::slice::from_ref(&one), &GridFunction::zeros(6), &[1.0], 1.0, 0.0).unwrap(), 0.0);
    let two = SparseFamily::full(0.5, 6, vec![root, std_cube(1, 0)]).unwrap();
    assert_eq!(sparse_form(&two, &sym, std::slice::from_ref(&one), &one, &[1.0], 1.0, 0.0).unwrap(), 1.5);
}

#[test]
fn symbol_validation() {
    assert!(SymbolData::new(vec![GridFunction::zeros(2)], vec![1], vec![2]).is_err());
    assert!(SymbolData::new(vec![GridFunction::zeros(2)], vec![1, 1], vec![0]).is_err());
}

#[test]
fn json_round_trip() {
    let fam = SparseFamily::new(0.5, 4, vec![std_cube(0, 0), std_cube(1, 0)], vec![(8..16).collect(), (0..4).collect()]).unwrap();
    let s = fam.to_json().unwrap();
    assert!(s.contains("exceptional_cells"));
    assert_eq!(SparseFamily::from_json(&s).unwrap(), fam);
}

mod props {
    use fbmoo_core::dyadic::*;
    use fbmoo_core::gridfn::*;
    use fbmoo_core::sparse::*;
    use proptest::prelude::*;

    fn grid_fn(n: u32) -> impl Strategy<Value = GridFunction> {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], 1usize << n)
            .prop_map(move |v| GridFunction::new(n, v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stopping_time_is_sparse(f in grid_fn(7), g in grid_fn(7), delta in 0.05f64..0.95) {
            let (fam, trace) = build_sparse_cz(std::slice::from_ref(&f), &g, &DyadicCube::standard(0, 0), delta).unwrap();
            prop_assert!(is_sparse(&fam).sparse);
            prop_assert!(trace.markov_holds());
            // sparse operator is nonnegative and vanishes off the family
            let a = sparse_operator_grid(&fam, &SymbolData::trivial(1, 7), &[f], &[1.0], 0.0).unwrap();
            prop_assert!(a.values().iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn json_round_trip(f in grid_fn(6), delta in 0.1f64..0.9) {
            let (fam, _) = build_sparse_cz(std::slice::from_ref(&f), &f, &DyadicCube::standard(0, 0), delta).unwrap();
            prop_assert_eq!(SparseFamily::from_json(&fam.to_json().unwrap()).unwrap(), fam);
        }
    }
}
