//! Distribution of a global segment budget across clusters.
//!
//! Given per-cluster optimal error curves `R_k(p)`, the budget `P` is split
//! by a second dynamic program over `S(l, p)`, the best total error of the
//! first `l` clusters using exactly `p` segments. The candidate share `u`
//! of cluster `l` is scanned upwards with strict-improvement replacement,
//! so the smallest optimal share wins ties.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostProvider;
use crate::error::{Error, Result};
use crate::segmentation::{Aggregator, SummaryTables};
use crate::types::{CurveSet, ModelSpec};

/// Per-cluster error curves: `rows[k][p - 1] = R_k(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurves {
    pub rows: Vec<Vec<f64>>,
}

/// Result of the budget allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub counts: Vec<usize>,
    pub cost: f64,
}

/// Cost and winner tables of the allocation program.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTables {
    // cost[l][p] for clusters 0..=l and p segments; INFINITY when infeasible
    cost: Vec<Vec<f64>>,
    winner: Vec<Vec<usize>>,
}

impl AllocationTables {
    pub fn cost_at(&self, l: usize, p: usize) -> Option<f64> {
        let v = *self.cost.get(l)?.get(p)?;
        v.is_finite().then_some(v)
    }

    pub fn winner_at(&self, l: usize, p: usize) -> Option<usize> {
        let w = *self.winner.get(l)?.get(p)?;
        (w != 0).then_some(w)
    }
}

/// Fills the allocation tables for a budget of `budget` segments.
pub fn allocation_tables(
    curves: &[Vec<f64>],
    budget: usize,
    cap: Option<usize>,
) -> Result<AllocationTables> {
    let k = curves.len();
    if k == 0 {
        return Err(Error::domain("no clusters to allocate segments to"));
    }
    if budget < k {
        return Err(Error::domain(format!(
            "a budget of {budget} segments cannot give one to each of {k} clusters"
        )));
    }
    if cap == Some(0) {
        return Err(Error::domain("the per-cluster cap must be at least 1"));
    }
    let usable = |row: &Vec<f64>| row.len().min(cap.unwrap_or(usize::MAX));
    let reachable: usize = curves.iter().map(usable).sum();
    if reachable < budget {
        return Err(Error::domain(format!(
            "per-cluster limits allow at most {reachable} segments, budget is {budget}"
        )));
    }
    if let Some((l, _)) = curves
        .iter()
        .enumerate()
        .find(|(_, row)| row.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::internal(format!("error curve of cluster {l} is not finite")));
    }

    let mut cost = vec![vec![f64::INFINITY; budget + 1]; k];
    let mut winner = vec![vec![0usize; budget + 1]; k];
    for u in 1..=usable(&curves[0]).min(budget) {
        cost[0][u] = curves[0][u - 1];
        winner[0][u] = u;
    }
    for l in 1..k {
        let row = &curves[l];
        let max_u = usable(row);
        for p in (l + 1)..=budget {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for u in 1..=(p - l).min(max_u) {
                let prev = cost[l - 1][p - u];
                if !prev.is_finite() {
                    continue;
                }
                let v = prev + row[u - 1];
                if v < best {
                    best = v;
                    arg = u;
                }
            }
            cost[l][p] = best;
            winner[l][p] = arg;
        }
    }
    Ok(AllocationTables { cost, winner })
}

/// Optimal split of `budget` segments with every cluster getting between 1
/// and `cap` segments (and no more than its error curve covers).
pub fn allocate(curves: &[Vec<f64>], budget: usize, cap: Option<usize>) -> Result<Allocation> {
    let tables = allocation_tables(curves, budget, cap)?;
    let k = curves.len();
    let total = tables.cost[k - 1][budget];
    if !total.is_finite() {
        return Err(Error::domain("no feasible allocation"));
    }
    let mut counts = vec![0; k];
    let mut left = budget;
    for l in (0..k).rev() {
        let u = tables.winner[l][left];
        counts[l] = u;
        left -= u;
    }
    debug_assert_eq!(left, 0);
    Ok(Allocation {
        counts,
        cost: total,
    })
}

/// Largest per-cluster count worth computing: at least one segment must be
/// left for each other cluster.
pub fn error_curve_length(
    clusters: usize,
    budget: usize,
    cap: Option<usize>,
    capacity: usize,
) -> usize {
    (budget + 1 - clusters)
        .min(cap.unwrap_or(usize::MAX))
        .min(capacity)
}

/// Optimal error curves of each cluster of a partition, one dynamic
/// program per cluster.
pub fn build_error_curves(
    set: &CurveSet,
    clusters: &[Vec<usize>],
    model: ModelSpec,
    max_count: usize,
) -> Result<ErrorCurves> {
    let capacity = SummaryTables::capacity(model.kind(), set.width());
    if max_count > capacity {
        return Err(Error::domain(format!(
            "{max_count} segments exceed the {capacity} available on {} grid points",
            set.width()
        )));
    }
    let rows = clusters
        .par_iter()
        .map(|members| {
            let provider = CostProvider::for_set(set, members, model)?;
            Ok(SummaryTables::build(&provider, max_count, Aggregator::Sum)?.errors())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorCurves { rows })
}
