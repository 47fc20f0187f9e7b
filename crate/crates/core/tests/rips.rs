mod common;

use proptest::prelude::*;
use topojscc::diagram::Cell;
use topojscc::rips::{default_eps_max, pairwise_distances, rips_diagram, PointCloud};

fn cloud_strategy(integer: bool) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=8, 1usize..=4).prop_flat_map(move |(n, dim)| {
        let coord = if integer {
            (-2i32..=2).prop_map(f64::from).boxed()
        } else {
            (-1.0..1.0f64).boxed()
        };
        proptest::collection::vec(proptest::collection::vec(coord, dim), n)
    })
}

fn diagram(points: &[Vec<f64>], eps: Option<f64>) -> topojscc::diagram::PersistenceDiagram {
    let cloud = PointCloud::from_points(points).unwrap();
    let dist = pairwise_distances(&cloud);
    let eps = eps.unwrap_or_else(|| default_eps_max(&dist));
    rips_diagram(&dist, 1, eps).unwrap()
}

fn mst_weight(d: &[Vec<f64>]) -> f64 {
    let n = d.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..n {
        let u = (0..n).filter(|&i| !in_tree[i]).min_by(|&a, &b| best[a].total_cmp(&best[b])).unwrap();
        in_tree[u] = true;
        total += best[u];
        for v in 0..n {
            if !in_tree[v] {
                best[v] = best[v].min(d[u][v]);
            }
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_clique_complex_reduction(pts in cloud_strategy(false)) {
        let cloud = PointCloud::from_points(&pts).unwrap();
        let dist = pairwise_distances(&cloud);
        let eps = default_eps_max(&dist);
        prop_assume!(eps > 0.0);
        let d = rips_diagram(&dist, 1, eps).unwrap();
        prop_assert_eq!(common::triples(&d), common::rips_oracle(&common::distance_matrix(&pts), eps));
    }

    #[test]
    fn matches_reduction_on_lattice_points(pts in cloud_strategy(true)) {
        let cloud = PointCloud::from_points(&pts).unwrap();
        let dist = pairwise_distances(&cloud);
        let eps = default_eps_max(&dist);
        prop_assume!(eps > 0.0);
        let d = rips_diagram(&dist, 1, eps).unwrap();
        prop_assert_eq!(common::triples(&d), common::rips_oracle(&common::distance_matrix(&pts), eps));
    }

    #[test]
    fn truncated_filtration_matches_reduction(pts in cloud_strategy(false), frac in 0.2..0.9f64) {
        let dist = common::distance_matrix(&pts);
        let diam = dist.iter().flatten().copied().fold(0.0, f64::max);
        prop_assume!(diam > 0.0);
        let eps = frac * diam;
        prop_assert_eq!(common::triples(&diagram(&pts, Some(eps))), common::rips_oracle(&dist, eps));
    }

    #[test]
    fn permutation_invariant(pts in cloud_strategy(false), seed in any::<u64>()) {
        let mut shuffled = pts.clone();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assume!(common::distance_matrix(&pts).iter().flatten().any(|&d| d > 0.0));
        prop_assert_eq!(common::triples(&diagram(&pts, None)), common::triples(&diagram(&shuffled, None)));
    }

    #[test]
    fn isometry_invariant(pts in cloud_strategy(false), angle in 0.0..6.28f64, shift in proptest::collection::vec(-5.0..5.0f64, 4)) {
        prop_assume!(common::distance_matrix(&pts).iter().flatten().any(|&d| d > 1e-6));
        let (c, s) = (angle.cos(), angle.sin());
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| {
                let mut q = p.clone();
                if q.len() >= 2 {
                    let (x, y) = (q[0], q[1]);
                    q[0] = c * x - s * y;
                    q[1] = s * x + c * y;
                }
                q.iter().zip(&shift).map(|(a, b)| a + b).collect()
            })
            .collect();
        let (a, b) = (common::triples(&diagram(&pts, None)), common::triples(&diagram(&moved, None)));
        // Rounding in the moved coordinates can split exact ties into
        // tiny-persistence pairs; compare the persistent part.
        let keep = |v: Vec<common::Triple>| -> Vec<common::Triple> { v.into_iter().filter(|t| t.2 - t.1 > 1e-9).collect() };
        let (a, b) = (keep(a), keep(b));
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!((x.0, x.3), (y.0, y.3));
            prop_assert!((x.1 - y.1).abs() < 1e-9 && (x.2 - y.2).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_dim0_deaths_sum_to_mst_weight(pts in cloud_strategy(false)) {
        let dist = common::distance_matrix(&pts);
        prop_assume!(dist.iter().flatten().any(|&d| d > 0.0));
        let d = diagram(&pts, None);
        let sum: f64 = d.of_dim(0).iter().filter(|p| !p.essential).map(|p| p.death).sum();
        prop_assert!((sum - mst_weight(&dist)).abs() < 1e-9);
        prop_assert_eq!(d.of_dim(0).iter().filter(|p| p.essential).count(), 1);
    }

    #[test]
    fn generator_edges_carry_the_coordinates(pts in cloud_strategy(false)) {
        let dist = common::distance_matrix(&pts);
        prop_assume!(dist.iter().flatten().any(|&d| d > 0.0));
        for p in diagram(&pts, None).iter() {
            if let Cell::Edge(u, v) = p.death_cell {
                prop_assert_eq!(dist[u][v], p.death);
            }
            if let Cell::Edge(u, v) = p.birth_cell {
                prop_assert_eq!(dist[u][v], p.birth);
            }
        }
    }
}

#[test]
fn regular_hexagon_has_one_loop() {
    let pts: Vec<Vec<f64>> = (0..6)
        .map(|i| {
            let a = i as f64 * std::f64::consts::PI / 3.0;
            vec![a.cos(), a.sin()]
        })
        .collect();
    let d = diagram(&pts, None);
    let loops = d.of_dim(1);
    assert_eq!(loops.len(), 1);
    let p = loops.iter().next().unwrap();
    assert!((p.birth - 1.0).abs() < 1e-12);
    assert!((p.death - 3f64.sqrt()).abs() < 1e-12);
}
