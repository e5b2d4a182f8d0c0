use proptest::prelude::*;

use ftcdim::dimension::{
    assemble_matrix, perron_measure, solve_dimension, spectral_radius_at, WeightedIncidenceMatrix,
};
use ftcdim::ftc::{explore, representative_checks, wsc_multiplicity_probe, Limits, System};
use ftcdim::index_sets::{validate_nested_properties, FreeAlphabet, IndexSetRule};
use ftcdim::model_io::preset;
use ftcdim::render::{stereographic, stereographic_inverse};
use ftcdim::{ConvexPolygon, Error, QuadScalar, Similitude};

fn q(n: i64, d: i64) -> QuadScalar {
    QuadScalar::ratio(n, d)
}

/// Irreducible-enough random matrices: a cycle through every type plus
/// random extra entries, ratios from a small set.
fn matrix() -> impl Strategy<Value = WeightedIncidenceMatrix> {
    (1usize..5).prop_flat_map(|n| {
        proptest::collection::vec((0usize..3, 0usize..3), n * n).prop_map(move |cells| {
            let ratios = [q(1, 2), q(1, 3), q(2, 5)];
            let mut entries = vec![vec![Vec::new(); n]; n];
            for (k, (count, r)) in cells.into_iter().enumerate() {
                let (i, j) = (k / n, k % n);
                let count = count + usize::from(j == (i + 1) % n);
                if count > 0 {
                    entries[i][j].push((ratios[r].clone(), count));
                }
            }
            WeightedIncidenceMatrix { q: n, entries }
        })
    })
}

/// Overlapping homogeneous systems on [0, 1] with translations on a grid,
/// so that exact coincidences occur.
fn line_system() -> impl Strategy<Value = System> {
    (
        prop::sample::select(vec![2i64, 3, 4]),
        proptest::collection::btree_set(0i64..=12, 2..4),
    )
        .prop_map(|(den, ts)| {
            let r = q(1, den);
            let slack = 12 * (den - 1);
            let maps = ts
                .into_iter()
                .map(|t| {
                    Similitude::homothety(r.clone(), vec![q(t * slack / 12, 12 * den)]).unwrap()
                })
                .collect();
            System::ifs(maps, ConvexPolygon::interval(q(0, 1), q(1, 1)).unwrap()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_root_is_monotone_and_permutation_invariant(m in matrix(), shift in 0usize..4) {
        let d = match solve_dimension(&m, 2, 1e-12) {
            Ok(d) => d,
            Err(Error::Model(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!((d.lambda_at_alpha - 1.0).abs() < 1e-9);
        let (lo, hi) = d.bracket;
        let grid: Vec<f64> = (0..20).map(|k| spectral_radius_at(&m, lo + (hi - lo) * k as f64 / 19.0).unwrap()).collect();
        prop_assert!(grid.windows(2).all(|w| w[1] < w[0]));
        let perm: Vec<usize> = (0..m.q).map(|i| (i + shift) % m.q).collect();
        let p = solve_dimension(&m.permute(&perm), 2, 1e-12).unwrap();
        prop_assert!((p.alpha - d.alpha).abs() <= 1e-12);
    }

    #[test]
    fn finite_type_line_systems_are_consistent(s in line_system()) {
        let rule = s.default_rule();
        let limits = Limits { max_types: 48, max_level: 12, vertex_budget: 50_000, verify_depth: 1 };
        let a = match explore(&s, &rule, &limits) {
            Ok(a) => a,
            Err(Error::NotDetected { .. }) | Err(Error::Resource(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(representative_checks(&s, &a).unwrap().iter().all(|c| c.agree));
        let again = explore(&s, &rule, &limits).unwrap();
        prop_assert_eq!(
            a.types.iter().map(|t| &t.signature).collect::<Vec<_>>(),
            again.types.iter().map(|t| &t.signature).collect::<Vec<_>>()
        );
        // every type keeps at least one offspring edge
        prop_assert!(a.types.iter().all(|t| !t.edges.is_empty()));
        let m = assemble_matrix(&a);
        let d = solve_dimension(&m, 1, 1e-12).unwrap();
        prop_assert!(d.alpha <= 1.0 + 1e-12);
        let table = perron_measure(&s, &a, &d, 3, 50_000).unwrap();
        prop_assert!(table.max_additivity_error < 1e-10);
    }

    #[test]
    fn ratio_stopping_sets_are_nested(
        rs in proptest::collection::vec(prop::sample::select(vec![q(1, 2), q(1, 3), q(1, 4), q(2, 3)]), 2..4),
    ) {
        let alphabet = FreeAlphabet::new(rs.clone()).unwrap();
        let rule = IndexSetRule::default_for(&rs);
        let report = validate_nested_properties(&rule, &alphabet, &[0], 4).unwrap();
        prop_assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn stereographic_round_trip(x in -0.99f64..0.99, y in -0.99f64..0.99) {
        prop_assume!(x * x + y * y < 0.98);
        let p = stereographic_inverse(&[x, y]);
        prop_assert!((p.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p[2] > 0.0);
        let back = stereographic(&p);
        prop_assert!((back[0] - x).abs() < 1e-12 && (back[1] - y).abs() < 1e-12);
    }
}

#[test]
fn torus_probe_agrees_at_one_eighth_and_one_sixteenth() {
    let s = preset("torus_gifs").unwrap().build_system().unwrap();
    let a = wsc_multiplicity_probe(&s, &q(1, 8), 200, 3, 100_000).unwrap();
    let b = wsc_multiplicity_probe(&s, &q(1, 16), 200, 3, 100_000).unwrap();
    assert_eq!(a.max_multiplicity, b.max_multiplicity);
}
