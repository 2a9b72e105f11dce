mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use oodlens::ensemble::{average_distributions, ensemble_score, entropy};
use oodlens::grid;
use oodlens::hierarchy::{Hierarchy, HierarchyConfig, Region, SampleInfo};
use oodlens::knn::{build_knn_graph, repair};
use oodlens::lap::{brute_force, solve_dense, solve_sparse, CostMatrix};
use oodlens::metrics;

fn square(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0.0..100.0f64, n), n))
}

fn points(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| [x, y]), n)
}

fn distribution(c: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, c).prop_map(|v| {
        let s: f64 = v.iter().sum();
        if s == 0.0 {
            vec![1.0 / v.len() as f64; v.len()]
        } else {
            v.iter().map(|x| x / s).collect()
        }
    })
}

fn ensemble() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..8usize, 1..6usize).prop_flat_map(|(c, m)| prop::collection::vec(distribution(c), m))
}

fn labelled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2..40usize).prop_flat_map(|n| {
        (
            prop::collection::vec((0..6u8).prop_map(|v| v as f64), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(s, mut y)| {
                y[0] = true;
                let last = y.len() - 1;
                y[last] = false;
                (s, y)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dense_solver_is_optimal(rows in square(6)) {
        let c = CostMatrix::from_rows(&rows).unwrap();
        let a = solve_dense(&c).unwrap();
        let b = brute_force(&c).unwrap();
        prop_assert!(a.is_bijection());
        prop_assert!((a.total_cost - b.total_cost).abs() <= 1e-9 * (1.0 + b.total_cost.abs()));
    }

    #[test]
    fn repaired_graph_is_regular_and_matchable(xs in points(4..=120), k in 1usize..6) {
        let n = xs.len();
        let k = k.min(n);
        let side = grid::ceil_sqrt(n);
        let ys: Vec<[f64; 2]> = (0..n).map(|j| [(j % side) as f64 / side as f64, (j / side) as f64 / side as f64]).collect();
        let g = repair(build_knn_graph(&xs, &ys, k).unwrap()).unwrap();
        prop_assert!(g.is_regular());
        prop_assert_eq!(g.degree_sum(), 2 * k * n);
        let a = solve_sparse(&g).unwrap();
        prop_assert!(a.is_bijection());
    }

    #[test]
    fn layout_places_every_point_once(xs in points(1..=150), k in 1usize..40) {
        let a = grid::layout(&xs, k).unwrap();
        let ids: Vec<usize> = (0..xs.len()).collect();
        let doc = a.to_document(&ids);
        let placed: Vec<usize> = doc.cells.iter().filter_map(|c| c.sample_id).collect();
        let unique: BTreeSet<usize> = placed.iter().copied().collect();
        prop_assert_eq!(placed.len(), xs.len());
        prop_assert_eq!(unique.len(), xs.len());
        prop_assert!(doc.grid.m * doc.grid.n >= xs.len());
    }

    #[test]
    fn ensemble_entropy_is_bounded(dists in ensemble()) {
        let c = dists[0].len();
        let refs: Vec<&[f64]> = dists.iter().map(Vec::as_slice).collect();
        let (avg, h) = ensemble_score(&refs);
        prop_assert!((avg.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(h >= -1e-12 && h <= (c as f64).ln() + 1e-12);
        // averaging never lowers the mean member entropy (concavity)
        let mean_member = dists.iter().map(|d| entropy(d)).sum::<f64>() / dists.len() as f64;
        prop_assert!(h >= mean_member - 1e-9);
    }

    #[test]
    fn ensemble_ignores_member_order(mut dists in ensemble()) {
        let refs: Vec<&[f64]> = dists.iter().map(Vec::as_slice).collect();
        let a = average_distributions(&refs);
        dists.reverse();
        let refs: Vec<&[f64]> = dists.iter().map(Vec::as_slice).collect();
        let b = average_distributions(&refs);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_match_oracles((s, y) in labelled_scores(), k in 1usize..40) {
        prop_assert!((metrics::auroc(&s, &y).unwrap() - common::auroc_pairs(&s, &y)).abs() < 1e-12);
        prop_assert!((metrics::aupr(&s, &y).unwrap() - common::aupr_ranks(&s, &y)).abs() < 1e-12);
        let k = k.min(s.len());
        prop_assert!((metrics::prec_at_k(&s, &y, k).unwrap() - common::prec_top(&s, &y, k)).abs() < 1e-12);
    }

    #[test]
    fn auroc_is_rank_based((s, y) in labelled_scores()) {
        let a = metrics::auroc(&s, &y).unwrap();
        let shifted: Vec<f64> = s.iter().map(|v| 3.0 * v + 1.0).collect();
        let flipped: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((metrics::auroc(&shifted, &y).unwrap() - a).abs() < 1e-12);
        prop_assert!((metrics::auroc(&flipped, &y).unwrap() - (1.0 - a)).abs() < 1e-12);
    }

    #[test]
    fn zoom_partitions_the_selection(
        xs in points(2..=70),
        seed in 0u64..1000,
        corner in (0usize..4, 0usize..4, 1usize..5, 1usize..5),
    ) {
        let samples: Vec<SampleInfo> = xs
            .iter()
            .enumerate()
            .map(|(id, &pos)| SampleInfo { id, pos, ood_norm: (id % 7) as f64 / 6.0, class: id % 3 })
            .collect();
        let mut h = Hierarchy::new(samples, HierarchyConfig { max_side: 4, alpha: 0.5, k: 100, seed }).unwrap();
        let root = h.root().clone();
        let (m, n) = (root.grid.m, root.grid.n);
        let row0 = corner.0.min(m - 1);
        let col0 = corner.1.min(n - 1);
        let r = Region { row0, col0, row1: (row0 + corner.2).min(m), col1: (col0 + corner.3).min(n) };
        let kept: Vec<usize> = root
            .cells
            .iter()
            .enumerate()
            .filter_map(|(c, s)| s.filter(|_| r.contains(c / n, c % n)))
            .collect();
        match h.zoom(0, r) {
            Ok(child) => {
                let shown: BTreeSet<usize> = child.displayed.iter().copied().collect();
                prop_assert!(kept.iter().all(|k| shown.contains(k)));
                let mut expected: BTreeSet<usize> = kept.iter().copied().collect();
                expected.extend(root.hidden_assignment.iter().filter(|(_, d)| kept.contains(d)).map(|(&h, _)| h));
                prop_assert_eq!(child.universe().into_iter().collect::<BTreeSet<_>>(), expected);
            }
            Err(_) => prop_assert!(kept.is_empty()),
        }
    }
}
