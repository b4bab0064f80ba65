//! Exact optimal segmentation by dynamic programming.
//!
//! `F(k, j)` is the best cost of splitting the suffix `k..M` into `j`
//! segments, and `W(k, j)` the last index of that solution's first
//! segment. Candidate split points are scanned left to right and the
//! incumbent is replaced only on strict improvement, so among equal-cost
//! solutions the one with the shortest leading segments wins. One table
//! serves every segment count `p <= P`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{minimax_level, median, CostProvider, DenseCost, SegmentCost};
use crate::error::{Error, Result};
use crate::summary::{SegmentModel, Summary, SummaryLayout};
use crate::types::{KnotSet, ModelKind, SampleGrid, Segmentation};

/// How segment costs combine into the cost of a segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    #[default]
    Sum,
    Max,
}

impl Aggregator {
    #[inline]
    pub fn combine(self, segment: f64, rest: f64) -> f64 {
        match self {
            Aggregator::Sum => segment + rest,
            Aggregator::Max => segment.max(rest),
        }
    }
}

const NONE: usize = usize::MAX;

/// Cost and winner tables of a segmentation run.
#[derive(Debug, Clone, PartialEq)]
pub struct DpTables {
    len: usize,
    min_len: usize,
    aggregator: Aggregator,
    // layer j - 1 holds F(., j) for k = 0..=len
    cost: Vec<Vec<f64>>,
    winner: Vec<Vec<usize>>,
}

#[inline]
fn checked<C: SegmentCost + ?Sized>(cost: &C, first: usize, last: usize) -> Result<f64> {
    let c = cost.cost(first, last);
    if c >= 0.0 && c.is_finite() {
        Ok(c)
    } else {
        Err(Error::internal(format!(
            "segment cost {c} for {first}..={last} is not a nonnegative finite value"
        )))
    }
}

fn solve_cell<C: SegmentCost + ?Sized>(
    cost: &C,
    prev: &[f64],
    k: usize,
    j: usize,
    min_len: usize,
    aggregator: Aggregator,
) -> Result<(f64, usize)> {
    let m = cost.len();
    let last_end = m - (j - 1) * min_len - 1;
    let mut best = f64::INFINITY;
    let mut arg = NONE;
    for l in (k + min_len - 1)..=last_end {
        let v = aggregator.combine(checked(cost, k, l)?, prev[l + 1]);
        if v < best {
            best = v;
            arg = l;
        }
    }
    if arg == NONE {
        return Err(Error::internal(format!("no finite split for suffix {k} into {j} segments")));
    }
    Ok((best, arg))
}

fn run_dp_impl<C: SegmentCost + ?Sized>(
    cost: &C,
    max_segments: usize,
    aggregator: Aggregator,
    parallel: bool,
) -> Result<DpTables> {
    let m = cost.len();
    let min_len = cost.min_segment_len().max(1);
    if max_segments == 0 || max_segments * min_len > m {
        return Err(Error::domain(format!(
            "cannot split {m} points into {max_segments} segments of at least {min_len} points"
        )));
    }
    let mut first = vec![f64::INFINITY; m + 1];
    for (k, cell) in first.iter_mut().enumerate().take(m + 1 - min_len) {
        *cell = checked(cost, k, m - 1)?;
    }
    let mut table = vec![first];
    let mut winner = vec![vec![NONE; m + 1]];
    for j in 2..=max_segments {
        let prev = &table[j - 2];
        let rows = m - j * min_len + 1;
        let solve = |k: usize| solve_cell(cost, prev, k, j, min_len, aggregator);
        let cells: Vec<(f64, usize)> = if parallel {
            (0..rows).into_par_iter().map(solve).collect::<Result<_>>()?
        } else {
            (0..rows).map(solve).collect::<Result<_>>()?
        };
        let mut f = vec![f64::INFINITY; m + 1];
        let mut w = vec![NONE; m + 1];
        for (k, (v, l)) in cells.into_iter().enumerate() {
            f[k] = v;
            w[k] = l;
        }
        table.push(f);
        winner.push(w);
    }
    Ok(DpTables {
        len: m,
        min_len,
        aggregator,
        cost: table,
        winner,
    })
}

/// Optimal segmentations into `1..=max_segments` segments.
pub fn run_dp<C: SegmentCost + ?Sized>(
    cost: &C,
    max_segments: usize,
    aggregator: Aggregator,
) -> Result<DpTables> {
    run_dp_impl(cost, max_segments, aggregator, false)
}

/// Same as [`run_dp`], filling each layer's rows concurrently. The tables
/// are identical to the serial ones.
pub fn run_dp_parallel<C: SegmentCost + ?Sized>(
    cost: &C,
    max_segments: usize,
    aggregator: Aggregator,
) -> Result<DpTables> {
    run_dp_impl(cost, max_segments, aggregator, true)
}

impl DpTables {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_segments(&self) -> usize {
        self.cost.len()
    }

    pub fn aggregator(&self) -> Aggregator {
        self.aggregator
    }

    /// `F(k, j)`, or `None` where the suffix is too short for `j` segments.
    pub fn cost_at(&self, k: usize, j: usize) -> Option<f64> {
        let v = *self.cost.get(j.checked_sub(1)?)?.get(k)?;
        v.is_finite().then_some(v)
    }

    /// `W(k, j)`; undefined for `j = 1`.
    pub fn winner_at(&self, k: usize, j: usize) -> Option<usize> {
        let w = *self.winner.get(j.checked_sub(1)?)?.get(k)?;
        (w != NONE).then_some(w)
    }

    /// Optimal cost with `p` segments for the whole range.
    pub fn optimal_cost(&self, p: usize) -> Result<f64> {
        self.check_count(p)?;
        Ok(self.cost[p - 1][0])
    }

    /// Optimal costs for `p = 1..=max_segments`.
    pub fn errors(&self) -> Vec<f64> {
        self.cost.iter().map(|layer| layer[0]).collect()
    }

    fn check_count(&self, p: usize) -> Result<()> {
        if p == 0 || p > self.max_segments() {
            return Err(Error::domain(format!(
                "segment count {p} outside 1..={}",
                self.max_segments()
            )));
        }
        Ok(())
    }

    /// The optimal segmentation into `p` segments.
    pub fn backtrack(&self, p: usize) -> Result<Segmentation> {
        self.check_count(p)?;
        let mut breaks = Vec::with_capacity(p - 1);
        let mut k = 0;
        for j in (2..=p).rev() {
            let l = self.winner[j - 1][k];
            breaks.push(l + 1);
            k = l + 1;
        }
        Segmentation::new(self.len, breaks)
    }
}

/// Free-function form of [`DpTables::backtrack`].
pub fn backtrack(tables: &DpTables, p: usize) -> Result<Segmentation> {
    tables.backtrack(p)
}

/// Tables of the shared-knot interpolation program. `F(k, j)` is the best
/// cost of interpolating from knot `k` to the last grid point with `j`
/// pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotTables {
    len: usize,
    cost: Vec<Vec<f64>>,
    winner: Vec<Vec<usize>>,
}

#[inline]
fn checked_knot<C: SegmentCost + ?Sized>(cost: &C, first: usize, last: usize) -> Result<f64> {
    let c = cost.knot_cost(first, last);
    if c >= 0.0 && c.is_finite() {
        Ok(c)
    } else {
        Err(Error::internal(format!(
            "interpolation cost {c} for {first}..={last} is not a nonnegative finite value"
        )))
    }
}

/// Optimal knot placements with `1..=max_pieces` interpolation pieces.
pub fn knot_dp<C: SegmentCost + ?Sized>(cost: &C, max_pieces: usize) -> Result<KnotTables> {
    let m = cost.len();
    if max_pieces == 0 || max_pieces >= m {
        return Err(Error::domain(format!(
            "{max_pieces} interpolation pieces need between 1 and {} for {m} points",
            m.saturating_sub(1)
        )));
    }
    let mut first = vec![f64::INFINITY; m];
    for (k, cell) in first.iter_mut().enumerate().take(m - 1) {
        *cell = checked_knot(cost, k, m - 1)?;
    }
    let mut table = vec![first];
    let mut winner = vec![vec![NONE; m]];
    for j in 2..=max_pieces {
        let prev = &table[j - 2];
        let mut f = vec![f64::INFINITY; m];
        let mut w = vec![NONE; m];
        for k in 0..m - j {
            let mut best = f64::INFINITY;
            let mut arg = NONE;
            for (l, &rest) in prev.iter().enumerate().take(m - j + 1).skip(k + 1) {
                let v = checked_knot(cost, k, l)? + rest;
                if v < best {
                    best = v;
                    arg = l;
                }
            }
            f[k] = best;
            w[k] = arg;
        }
        table.push(f);
        winner.push(w);
    }
    Ok(KnotTables {
        len: m,
        cost: table,
        winner,
    })
}

impl KnotTables {
    pub fn max_pieces(&self) -> usize {
        self.cost.len()
    }

    pub fn optimal_cost(&self, p: usize) -> Result<f64> {
        self.check_count(p)?;
        Ok(self.cost[p - 1][0])
    }

    pub fn errors(&self) -> Vec<f64> {
        self.cost.iter().map(|layer| layer[0]).collect()
    }

    fn check_count(&self, p: usize) -> Result<()> {
        if p == 0 || p > self.max_pieces() {
            return Err(Error::domain(format!(
                "piece count {p} outside 1..={}",
                self.max_pieces()
            )));
        }
        Ok(())
    }

    pub fn backtrack(&self, p: usize) -> Result<KnotSet> {
        self.check_count(p)?;
        let mut knots = Vec::with_capacity(p + 1);
        knots.push(0);
        let mut k = 0;
        for j in (2..=p).rev() {
            k = self.winner[j - 1][k];
            knots.push(k);
        }
        knots.push(self.len - 1);
        KnotSet::new(knots)
    }
}

/// Best continuous piecewise-linear interpolation of one curve with
/// `pieces` pieces.
pub fn run_knot_dp(grid: &SampleGrid, values: &[f64], pieces: usize) -> Result<KnotSet> {
    let provider = CostProvider::for_curve(grid, values, ModelKind::InterpL2)?;
    knot_dp(&provider, pieces)?.backtrack(pieces)
}

/// A segmentation or a knot set, whichever the model uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Partition {
    Segments(Segmentation),
    Knots(KnotSet),
}

fn line_fit(t: &[f64], y: &[f64]) -> SegmentModel {
    let n = y.len() as f64;
    if y.len() == 1 {
        return SegmentModel::Line {
            slope: 0.0,
            intercept: y[0],
        };
    }
    let tbar = t.iter().sum::<f64>() / n;
    let ybar = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (ti, yi) in t.iter().zip(y) {
        sxy += (ti - tbar) * (yi - ybar);
        sxx += (ti - tbar) * (ti - tbar);
    }
    let slope = sxy / sxx;
    SegmentModel::Line {
        slope,
        intercept: ybar - slope * tbar,
    }
}

/// Optimal per-segment parameters for a given partition.
pub fn fit_summary(provider: &CostProvider, partition: &Partition) -> Result<Summary> {
    let model = provider.model();
    let grid = provider.grid();
    let pts = grid.points();
    let layout = match partition {
        Partition::Knots(knots) => {
            let y = provider
                .fitted_curve()
                .filter(|_| model.kind() == ModelKind::InterpL2)
                .ok_or_else(|| Error::domain("knot summaries require the interp-l2 model"))?;
            SummaryLayout::Knots {
                knots: knots.clone(),
                values: knots.knots().iter().map(|&k| y[k]).collect(),
            }
        }
        Partition::Segments(segmentation) => {
            if segmentation.len() != grid.len() {
                return Err(Error::domain("segmentation does not match the grid"));
            }
            let mut params = Vec::with_capacity(segmentation.segment_count());
            for seg in segmentation.segments() {
                let (a, b) = (*seg.start(), *seg.end());
                let p = match model.kind() {
                    ModelKind::ConstantL2 => match provider.max_members() {
                        Some(members) => SegmentModel::Level {
                            level: minimax_level(members, a, b).0,
                        },
                        None => {
                            let y = &provider.fitted_curve().expect("squared-loss source")[a..=b];
                            SegmentModel::Level {
                                level: y.iter().sum::<f64>() / y.len() as f64,
                            }
                        }
                    },
                    ModelKind::ConstantL1 => SegmentModel::Level {
                        level: median(&provider.pooled_segment(a, b).expect("absolute-loss source")),
                    },
                    ModelKind::LineL2 => {
                        let y = provider.fitted_curve().expect("squared-loss source");
                        line_fit(&pts[a..=b], &y[a..=b])
                    }
                    ModelKind::InterpL2 => {
                        if a == b {
                            return Err(Error::domain("chord segments need two points"));
                        }
                        let y = provider.fitted_curve().expect("squared-loss source");
                        let slope = (y[b] - y[a]) / (pts[b] - pts[a]);
                        SegmentModel::Line {
                            slope,
                            intercept: y[a] - slope * pts[a],
                        }
                    }
                };
                params.push(p);
            }
            SummaryLayout::Segments {
                segmentation: segmentation.clone(),
                params,
            }
        }
    };
    Summary::new(model, grid.clone(), layout)
}

/// Optimal summaries of one curve or group for every count up to a cap:
/// shared-knot interpolation for `interp-l2`, ordered partitions otherwise.
#[derive(Debug, Clone)]
pub enum SummaryTables {
    Segments(DpTables),
    Knots(KnotTables),
}

impl SummaryTables {
    /// Largest count usable for a grid of `len` points under `kind`.
    pub fn capacity(kind: ModelKind, len: usize) -> usize {
        match kind {
            ModelKind::InterpL2 => len - 1,
            _ => len,
        }
    }

    /// Builds the tables, precomputing per-query costs when they are not
    /// constant time.
    pub fn build(provider: &CostProvider, max_count: usize, aggregator: Aggregator) -> Result<Self> {
        let kind = provider.model().kind();
        if kind == ModelKind::InterpL2 {
            if aggregator != Aggregator::Sum {
                return Err(Error::config("interpolation summaries only combine by sum"));
            }
            return Ok(SummaryTables::Knots(knot_dp(provider, max_count)?));
        }
        let tables = if provider.is_constant_time() {
            run_dp(provider, max_count, aggregator)?
        } else {
            run_dp(&DenseCost::new(provider), max_count, aggregator)?
        };
        Ok(SummaryTables::Segments(tables))
    }

    pub fn max_count(&self) -> usize {
        match self {
            SummaryTables::Segments(t) => t.max_segments(),
            SummaryTables::Knots(t) => t.max_pieces(),
        }
    }

    pub fn errors(&self) -> Vec<f64> {
        match self {
            SummaryTables::Segments(t) => t.errors(),
            SummaryTables::Knots(t) => t.errors(),
        }
    }

    pub fn optimal_cost(&self, p: usize) -> Result<f64> {
        match self {
            SummaryTables::Segments(t) => t.optimal_cost(p),
            SummaryTables::Knots(t) => t.optimal_cost(p),
        }
    }

    pub fn partition(&self, p: usize) -> Result<Partition> {
        Ok(match self {
            SummaryTables::Segments(t) => Partition::Segments(t.backtrack(p)?),
            SummaryTables::Knots(t) => Partition::Knots(t.backtrack(p)?),
        })
    }

    pub fn summary(&self, provider: &CostProvider, p: usize) -> Result<Summary> {
        fit_summary(provider, &self.partition(p)?)
    }
}
