use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{groups, ClusterState, ClusteringConfig, IterationRecord, Mode, StopReason};
use crate::allocation::{allocate, error_curve_length};
use crate::cost::{mean_curve, CostProvider};
use crate::error::{Error, Result};
use crate::segmentation::{Aggregator, SummaryTables};
use crate::summary::{SegmentModel, Summary, SummaryLayout};
use crate::types::{CurveSet, Segmentation};

use super::squared_distance;

/// Prototypes fitted to a fixed partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub allocation: Vec<usize>,
    pub summaries: Vec<Summary>,
    pub error: f64,
}

struct Fit {
    allocation: Vec<usize>,
    summaries: Vec<Summary>,
    prototypes: Vec<Vec<f64>>,
}

fn saturated(set: &CurveSet, members: &[usize]) -> Result<Summary> {
    let mean = mean_curve(set, members);
    let m = set.width();
    Summary::new(
        crate::types::ModelSpec::sum(crate::types::ModelKind::ConstantL2),
        set.grid().clone(),
        SummaryLayout::Segments {
            segmentation: Segmentation::new(m, (1..m).collect())?,
            params: mean.into_iter().map(|level| SegmentModel::Level { level }).collect(),
        },
    )
}

fn fit(set: &CurveSet, assignment: &[usize], config: &ClusteringConfig) -> Result<Fit> {
    let clusters = groups(assignment, config.k);
    if let Some(c) = clusters.iter().position(Vec::is_empty) {
        return Err(Error::internal(format!("cluster {c} is empty before fitting")));
    }
    let model = config.model();
    let (allocation, summaries) = match config.mode {
        Mode::KMeans => {
            let summaries = clusters
                .par_iter()
                .map(|members| saturated(set, members))
                .collect::<Result<Vec<_>>>()?;
            (vec![set.width(); config.k], summaries)
        }
        Mode::Uniform => {
            let share = config.budget / config.k;
            let summaries = clusters
                .par_iter()
                .map(|members| {
                    let provider = CostProvider::for_set(set, members, model)?;
                    SummaryTables::build(&provider, share, Aggregator::Sum)?.summary(&provider, share)
                })
                .collect::<Result<Vec<_>>>()?;
            (vec![share; config.k], summaries)
        }
        Mode::Optimal => {
            let capacity = SummaryTables::capacity(config.kind, set.width());
            let len = error_curve_length(config.k, config.budget, config.cap, capacity);
            let built = clusters
                .par_iter()
                .map(|members| {
                    let provider = CostProvider::for_set(set, members, model)?;
                    let tables = SummaryTables::build(&provider, len, Aggregator::Sum)?;
                    Ok((provider, tables))
                })
                .collect::<Result<Vec<_>>>()?;
            let curves: Vec<Vec<f64>> = built.iter().map(|(_, t)| t.errors()).collect();
            let counts = allocate(&curves, config.budget, config.cap)?.counts;
            let summaries = built
                .par_iter()
                .zip(&counts)
                .map(|((provider, tables), &p)| tables.summary(provider, p))
                .collect::<Result<Vec<_>>>()?;
            (counts, summaries)
        }
    };
    let prototypes = summaries.iter().map(Summary::grid_values).collect();
    Ok(Fit {
        allocation,
        summaries,
        prototypes,
    })
}

/// Fits prototypes to a fixed partition without reassigning any curve.
pub fn summarize_partition(
    set: &CurveSet,
    assignment: &[usize],
    config: &ClusteringConfig,
) -> Result<PartitionSummary> {
    let config = config.clone().with_init(super::Init::Given(assignment.to_vec()));
    config.validate(set)?;
    let f = fit(set, assignment, &config)?;
    let error = error_of(set, assignment, &f.prototypes);
    Ok(PartitionSummary {
        allocation: f.allocation,
        summaries: f.summaries,
        error,
    })
}

pub(crate) fn error_of(set: &CurveSet, assignment: &[usize], prototypes: &[Vec<f64>]) -> f64 {
    let per_curve: Vec<f64> = (0..set.len())
        .into_par_iter()
        .map(|i| squared_distance(set.row(i), &prototypes[assignment[i]]))
        .collect();
    per_curve.iter().sum()
}

/// Nearest prototype of every curve and the distance to it. Ties go to
/// the smallest cluster index.
fn nearest(set: &CurveSet, prototypes: &[Vec<f64>]) -> Vec<(usize, f64)> {
    (0..set.len())
        .into_par_iter()
        .map(|i| {
            let row = set.row(i);
            let mut best = (0, squared_distance(row, &prototypes[0]));
            for (c, p) in prototypes.iter().enumerate().skip(1) {
                let d = squared_distance(row, p);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect()
}

/// Assigns every curve to the summary closest to it in squared grid
/// distance, smallest index first on ties. Clusters may come out empty.
pub fn assign_step(set: &CurveSet, summaries: &[Summary]) -> Result<Vec<usize>> {
    if summaries.is_empty() {
        return Err(Error::domain("no summaries to assign to"));
    }
    let prototypes: Vec<Vec<f64>> = summaries.iter().map(Summary::grid_values).collect();
    if prototypes.iter().any(|p| p.len() != set.width()) {
        return Err(Error::domain("summary grid does not match the curve set"));
    }
    Ok(nearest(set, &prototypes).into_iter().map(|(c, _)| c).collect())
}

/// Reseeds each empty cluster, lowest index first, with the curve farthest
/// from its prototype among clusters that have at least two members.
fn repair(assignment: &mut [usize], distance: &[f64], k: usize) -> Result<()> {
    let mut sizes = vec![0usize; k];
    for &c in assignment.iter() {
        sizes[c] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut pick: Option<usize> = None;
        for (i, &c) in assignment.iter().enumerate() {
            if sizes[c] >= 2 && pick.is_none_or(|p| distance[i] > distance[p]) {
                pick = Some(i);
            }
        }
        let i = pick.ok_or_else(|| Error::internal("no curve available to refill an empty cluster"))?;
        sizes[assignment[i]] -= 1;
        assignment[i] = empty;
        sizes[empty] = 1;
    }
    Ok(())
}

pub(super) fn run(
    set: &CurveSet,
    config: &ClusteringConfig,
    mut assignment: Vec<usize>,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<ClusterState> {
    let mut trace: Vec<f64> = Vec::new();
    let mut accepted: Option<(Vec<usize>, Fit)> = None;
    let mut stop = StopReason::MaxIter;
    while trace.len() < config.max_iter {
        let f = fit(set, &assignment, config)?;
        let error = error_of(set, &assignment, &f.prototypes);
        if !error.is_finite() {
            return Err(Error::internal("global error is not finite"));
        }
        if trace.last().is_some_and(|&prev| error >= prev) {
            stop = StopReason::NoImprovement;
            break;
        }
        trace.push(error);
        observer(&IterationRecord {
            iteration: trace.len(),
            assignment: assignment.clone(),
            allocation: f.allocation.clone(),
            error,
        });
        let near = nearest(set, &f.prototypes);
        let mut next: Vec<usize> = near.iter().map(|&(c, _)| c).collect();
        let distance: Vec<f64> = near.iter().map(|&(_, d)| d).collect();
        repair(&mut next, &distance, config.k)?;
        let stable = next == assignment;
        accepted = Some((std::mem::replace(&mut assignment, next), f));
        if stable {
            stop = StopReason::Stable;
            break;
        }
    }
    let (assignment, f) = accepted.ok_or_else(|| Error::internal("no iteration completed"))?;
    Ok(ClusterState {
        assignment,
        allocation: f.allocation,
        summaries: f.summaries,
        error: *trace.last().expect("trace has an entry per accepted fit"),
        iterations: trace.len(),
        trace,
        stop,
    })
}
