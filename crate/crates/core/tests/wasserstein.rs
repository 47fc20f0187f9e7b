mod common;

use proptest::prelude::*;
use topojscc::diagram::{Cell, PersistenceDiagram, PersistencePoint};
use topojscc::wasserstein::{brute_force_wasserstein, wasserstein, wasserstein_grad};

fn point(b: f64, d: f64) -> PersistencePoint {
    PersistencePoint {
        dim: 0,
        birth: b,
        death: d,
        essential: false,
        birth_cell: Cell::Pixel(0),
        death_cell: Cell::Pixel(1),
    }
}

fn diagram_strategy(max: usize) -> impl Strategy<Value = PersistenceDiagram> {
    proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 0..=max)
        .prop_map(|v| PersistenceDiagram::new(v.into_iter().map(|(a, b)| point(a.max(b), a.min(b))).collect()))
}

fn pair_strategy() -> impl Strategy<Value = (PersistenceDiagram, PersistenceDiagram)> {
    (0usize..=8).prop_flat_map(|n| (diagram_strategy(n), diagram_strategy(8 - n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn assignment_matches_enumeration((a, b) in pair_strategy(), p in prop_oneof![Just(1.0), Just(2.0), Just(3.5)]) {
        let fast = wasserstein(&a, &b, p).unwrap().cost;
        let lib_brute = brute_force_wasserstein(&a, &b, p).unwrap();
        let oracle = common::wasserstein_enumerate(&a, &b, p);
        prop_assert!((fast - oracle).abs() < 1e-9, "{} vs {}", fast, oracle);
        prop_assert!((lib_brute - oracle).abs() < 1e-9);
    }

    #[test]
    fn metric_axioms(a in diagram_strategy(5), b in diagram_strategy(5), c in diagram_strategy(5)) {
        let w = |x: &PersistenceDiagram, y: &PersistenceDiagram| wasserstein(x, y, 2.0).unwrap().cost;
        prop_assert!(w(&a, &a).abs() < 1e-12);
        prop_assert!((w(&a, &b) - w(&b, &a)).abs() < 1e-12);
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-12);
        prop_assert!(w(&a, &b) >= 0.0);
    }

    #[test]
    fn non_increasing_in_order((a, b) in pair_strategy()) {
        let w1 = wasserstein(&a, &b, 1.0).unwrap().cost;
        let w2 = wasserstein(&a, &b, 2.0).unwrap().cost;
        let w4 = wasserstein(&a, &b, 4.0).unwrap().cost;
        prop_assert!(w2 <= w1 + 1e-12 && w4 <= w2 + 1e-12);
        prop_assert!(common::bottleneck(&a, &b) <= w4 + 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences((a, b) in pair_strategy()) {
        let m = wasserstein(&a, &b, 2.0).unwrap();
        prop_assume!(m.cost > 1e-3);
        let g = wasserstein_grad(&m, &a, &b).unwrap();
        // Probing each coordinate of the right diagram; skip near-ties where
        // the cost is not differentiable.
        for j in 0..b.len() {
            for coord in 0..2 {
                let shift = |h: f64| {
                    let mut pts = b.points.clone();
                    if coord == 0 { pts[j].birth += h } else { pts[j].death += h }
                    wasserstein(&a, &PersistenceDiagram::new(pts), 2.0).unwrap().cost
                };
                let h = 1e-7;
                let (up, down) = (shift(h) - m.cost, m.cost - shift(-h));
                if (up - down).abs() > 1e-11 {
                    continue;
                }
                let numeric = (up + down) / (2.0 * h);
                prop_assert!((numeric - g.right[j][coord]).abs() < 1e-5, "{} vs {}", numeric, g.right[j][coord]);
            }
        }
    }
}

#[test]
fn distance_to_empty_is_diagonal_cost() {
    let a = PersistenceDiagram::new(vec![point(1.0, 0.0), point(0.6, 0.2)]);
    let e = PersistenceDiagram::default();
    let w = wasserstein(&a, &e, 2.0).unwrap().cost;
    assert!((w - (0.25f64 + 0.04).sqrt()).abs() < 1e-12);
    assert_eq!(wasserstein(&e, &e, 2.0).unwrap().cost, 0.0);
}
