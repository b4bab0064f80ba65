mod common;

use common::*;
use curveseg::allocation::{allocate, allocation_tables, build_error_curves};
use curveseg::cost::CostProvider;
use curveseg::segmentation::{run_dp, Aggregator};
use curveseg::{ModelKind, ModelSpec};
use proptest::prelude::*;

/// Non-increasing error curves with values in `0..100`.
fn curves(k: std::ops::RangeInclusive<usize>, len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0u32..100, len), k).prop_map(|rows| {
        rows.into_iter()
            .map(|mut r| {
                r.sort_unstable_by(|a, b| b.cmp(a));
                r.into_iter().map(f64::from).collect()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Integer curves make ties exact, so the allocation itself is pinned:
    /// among optimal splits, the last cluster takes the fewest segments,
    /// then the one before it, and so on.
    #[test]
    fn integer_curves_match_enumeration(rows in curves(1..=4, 1..=6), extra in 0usize..8, cap in prop::option::of(1usize..6)) {
        let budget = rows.len() + extra;
        let Some((want, _)) = exhaustive_allocation(&rows, budget, cap) else {
            prop_assert!(allocate(&rows, budget, cap).is_err());
            return Ok(());
        };
        let got = allocate(&rows, budget, cap).unwrap();
        prop_assert_eq!(got.cost, want);
        let limits: Vec<usize> = rows.iter().map(|r| r.len().min(cap.unwrap_or(usize::MAX))).collect();
        let canonical = compositions(budget, &limits)
            .into_iter()
            .filter(|u| u.iter().zip(&rows).map(|(&u, r)| r[u - 1]).sum::<f64>() == want)
            .min_by(|a, b| a.iter().rev().cmp(b.iter().rev()))
            .unwrap();
        prop_assert_eq!(got.counts, canonical);
    }

    #[test]
    fn budget_is_spent_exactly(rows in curves(1..=6, 1..=10), extra in 0usize..30, cap in prop::option::of(1usize..10)) {
        let budget = rows.len() + extra;
        if let Ok(a) = allocate(&rows, budget, cap) {
            prop_assert_eq!(a.counts.iter().sum::<usize>(), budget);
            for (u, r) in a.counts.iter().zip(&rows) {
                prop_assert!(*u >= 1 && *u <= r.len());
                prop_assert!(*u <= cap.unwrap_or(usize::MAX));
            }
            let total: f64 = a.counts.iter().zip(&rows).map(|(&u, r)| r[u - 1]).sum();
            prop_assert_eq!(total, a.cost);
        }
    }

    #[test]
    fn never_worse_than_an_even_split(rows in curves(1..=5, 12..=12), per in 1usize..=12) {
        let k = rows.len();
        let a = allocate(&rows, k * per, None).unwrap();
        let even: f64 = rows.iter().map(|r| r[per - 1]).sum();
        prop_assert!(a.cost <= even);
    }
}

#[test]
fn single_cluster_takes_the_whole_budget() {
    let rows = vec![vec![9.0, 4.0, 1.0, 0.5]];
    for p in 1..=4 {
        let a = allocate(&rows, p, None).unwrap();
        assert_eq!(a.counts, vec![p]);
        assert_eq!(a.cost, rows[0][p - 1]);
    }
}

#[test]
fn flat_curves_favor_the_first_cluster() {
    let rows = vec![vec![1.0; 9]; 4];
    let a = allocate(&rows, 9, None).unwrap();
    assert_eq!(a.counts, vec![6, 1, 1, 1]);
}

#[test]
fn three_clusters_nine_segments() {
    let mut r = rng(17);
    for _ in 0..20 {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let m = 30;
                let t = uniform_grid(m);
                let y = random_curve(&mut r, m);
                let prov = CostProvider::for_curve(&curveseg::SampleGrid::new(t).unwrap(), &y, ModelKind::ConstantL2).unwrap();
                run_dp(&prov, 7, Aggregator::Sum).unwrap().errors()
            })
            .collect();
        assert_eq!(compositions(9, &[7, 7, 7]).len(), 28);
        let (want, _) = exhaustive_allocation(&rows, 9, None).unwrap();
        let got = allocate(&rows, 9, None).unwrap();
        assert!(close(got.cost, want, 1e-12, 0.0));
    }
}

#[test]
fn infeasible_requests_fail() {
    let rows = vec![vec![3.0, 2.0], vec![3.0, 2.0]];
    assert!(allocate(&rows, 1, None).is_err());
    assert!(allocate(&rows, 5, None).is_err());
    assert!(allocate(&rows, 3, Some(1)).is_err());
    assert!(allocate(&rows, 2, Some(0)).is_err());
    assert!(allocate(&[], 2, None).is_err());
    assert!(allocate(&[vec![f64::NAN]], 1, None).is_err());
}

#[test]
fn tables_expose_partial_optima() {
    let rows = vec![vec![5.0, 1.0, 0.0], vec![4.0, 2.0, 0.0]];
    let t = allocation_tables(&rows, 4, None).unwrap();
    assert_eq!(t.cost_at(0, 2), Some(1.0));
    assert_eq!(t.cost_at(1, 1), None);
    assert_eq!(t.cost_at(1, 4), Some(3.0));
    assert_eq!(t.winner_at(1, 4), Some(2));
}

#[test]
fn error_curves_come_from_each_cluster() {
    let mut r = rng(3);
    let set = blobs(&mut r, 3, 5, 20, 0.5);
    let clusters: Vec<Vec<usize>> = (0..3).map(|g| (g * 5..g * 5 + 5).collect()).collect();
    let model = ModelSpec::sum(ModelKind::LineL2);
    let curves = build_error_curves(&set, &clusters, model, 6).unwrap();
    assert_eq!(curves.rows.len(), 3);
    for (members, row) in clusters.iter().zip(&curves.rows) {
        let prov = CostProvider::for_set(&set, members, model).unwrap();
        assert_eq!(row, &run_dp(&prov, 6, Aggregator::Sum).unwrap().errors());
    }
    assert!(build_error_curves(&set, &clusters, model, 21).is_err());
}
