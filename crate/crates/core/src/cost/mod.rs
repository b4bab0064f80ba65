//! Per-segment approximation errors.
//!
//! Squared-loss costs are answered in `O(1)` from prefix statistics after
//! `O(M)` preprocessing (`O(NM)` for a group of curves). The absolute-loss
//! and max-over-curves costs are computed per query; wrap them in a
//! [`DenseCost`] when a dynamic program will query every pair many times.

mod dd;
mod prefix;
mod set;

pub use prefix::{
    build_prefix_stats, cost_constant_l1, cost_constant_l2, cost_interp_l2, cost_line_l2, median,
    PrefixArrays, PrefixStats,
};
pub use set::{build_set_stats, cost_set_max, cost_set_sum, mean_curve, SetStats};

pub(crate) use prefix::absolute_deviation;
pub(crate) use set::minimax_level;

use crate::error::{Error, Result};
use crate::types::{CurveSet, ModelKind, ModelSpec, SampleGrid, SetAggregate};

/// Something that prices a contiguous run of grid indices.
///
/// Indices are 0-based and inclusive. Implementations must return a
/// nonnegative finite value for every segment at least
/// [`min_segment_len`](SegmentCost::min_segment_len) long.
pub trait SegmentCost: Sync {
    /// Number of grid points `M`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn min_segment_len(&self) -> usize {
        1
    }

    fn cost(&self, first: usize, last: usize) -> f64;

    /// Cost of one piece of a shared-knot interpolation. Defaults to
    /// [`cost`](SegmentCost::cost).
    fn knot_cost(&self, first: usize, last: usize) -> f64 {
        self.cost(first, last)
    }
}

#[derive(Debug, Clone)]
enum Source {
    Curve(PrefixStats),
    Set(SetStats),
    Pooled { rows: Vec<f64>, members: usize },
    Max(Vec<PrefixStats>),
}

/// Segment cost for one curve or one group of curves under a model spec.
#[derive(Debug, Clone)]
pub struct CostProvider {
    model: ModelSpec,
    grid: SampleGrid,
    source: Source,
}

impl CostProvider {
    pub fn for_curve(grid: &SampleGrid, values: &[f64], kind: ModelKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "curve has {} values, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            model: ModelSpec::sum(kind),
            grid: grid.clone(),
            source: Source::Curve(PrefixStats::new(grid.points(), values)),
        })
    }

    pub fn for_set(set: &CurveSet, members: &[usize], model: ModelSpec) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::domain("cannot summarize an empty group of curves"));
        }
        let source = match (model.aggregate(), model.kind()) {
            (SetAggregate::MaxOverCurves, _) => Source::Max(
                members
                    .iter()
                    .map(|&i| PrefixStats::new(set.grid().points(), set.row(i)))
                    .collect(),
            ),
            (SetAggregate::SumOverCurves, ModelKind::ConstantL1) => {
                let mut rows = Vec::with_capacity(members.len() * set.width());
                for &i in members {
                    rows.extend_from_slice(set.row(i));
                }
                Source::Pooled {
                    rows,
                    members: members.len(),
                }
            }
            (SetAggregate::SumOverCurves, _) => Source::Set(build_set_stats(set, members)?),
        };
        Ok(Self {
            model,
            grid: set.grid().clone(),
            source,
        })
    }

    pub fn model(&self) -> ModelSpec {
        self.model
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn member_count(&self) -> usize {
        match &self.source {
            Source::Curve(_) => 1,
            Source::Set(s) => s.member_count(),
            Source::Pooled { members, .. } => *members,
            Source::Max(m) => m.len(),
        }
    }

    /// The curve a squared-loss model is fitted to: the curve itself, or the
    /// group's mean curve.
    pub fn fitted_curve(&self) -> Option<&[f64]> {
        match &self.source {
            Source::Curve(st) => Some(st.values()),
            Source::Set(s) => Some(s.mean().values()),
            _ => None,
        }
    }

    /// True when costs are answered from prefix sums in constant time.
    pub fn is_constant_time(&self) -> bool {
        match &self.source {
            Source::Curve(_) => self.model.kind() != ModelKind::ConstantL1,
            Source::Set(_) => true,
            _ => false,
        }
    }

    pub(crate) fn pooled_segment(&self, first: usize, last: usize) -> Option<Vec<f64>> {
        match &self.source {
            Source::Pooled { rows, members } => {
                let m = self.grid.len();
                let mut vals = Vec::with_capacity(members * (last - first + 1));
                for r in 0..*members {
                    vals.extend_from_slice(&rows[r * m + first..=r * m + last]);
                }
                Some(vals)
            }
            Source::Curve(st) if self.model.kind() == ModelKind::ConstantL1 => {
                Some(st.values()[first..=last].to_vec())
            }
            _ => None,
        }
    }

    pub(crate) fn max_members(&self) -> Option<&[PrefixStats]> {
        match &self.source {
            Source::Max(m) => Some(m),
            _ => None,
        }
    }
}

impl SegmentCost for CostProvider {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn min_segment_len(&self) -> usize {
        self.model.kind().min_segment_len()
    }

    #[inline]
    fn cost(&self, first: usize, last: usize) -> f64 {
        let kind = self.model.kind();
        match &self.source {
            Source::Curve(st) => match kind {
                ModelKind::ConstantL2 => st.constant_l2(first, last),
                ModelKind::LineL2 => st.line_l2(first, last),
                ModelKind::InterpL2 => st.interp_l2(first, last),
                ModelKind::ConstantL1 => absolute_deviation(&st.values()[first..=last]),
            },
            Source::Set(s) => s.cost(kind, first, last),
            Source::Pooled { .. } => {
                let vals = self.pooled_segment(first, last).unwrap_or_default();
                absolute_deviation(&vals)
            }
            Source::Max(m) => minimax_level(m, first, last).1,
        }
    }

    #[inline]
    fn knot_cost(&self, first: usize, last: usize) -> f64 {
        match &self.source {
            Source::Set(s) if self.model.kind() == ModelKind::InterpL2 => {
                s.knot_piece_cost(first, last)
            }
            _ => self.cost(first, last),
        }
    }
}

/// All segment costs of another provider, precomputed into an `M x M`
/// upper-triangular table.
#[derive(Debug, Clone)]
pub struct DenseCost {
    len: usize,
    min_len: usize,
    table: Vec<f64>,
    knot_table: Option<Vec<f64>>,
}

impl DenseCost {
    pub fn new<C: SegmentCost + ?Sized>(inner: &C) -> Self {
        Self::build(inner, false)
    }

    /// Also tabulates [`SegmentCost::knot_cost`].
    pub fn with_knots<C: SegmentCost + ?Sized>(inner: &C) -> Self {
        Self::build(inner, true)
    }

    fn build<C: SegmentCost + ?Sized>(inner: &C, knots: bool) -> Self {
        use rayon::prelude::*;
        let m = inner.len();
        let min_len = inner.min_segment_len();
        let fill = |f: &(dyn Fn(usize, usize) -> f64 + Sync)| {
            let mut table = vec![f64::NAN; m * m];
            table.par_chunks_mut(m).enumerate().for_each(|(k, row)| {
                for (l, cell) in row.iter_mut().enumerate().skip(k + min_len - 1) {
                    *cell = f(k, l);
                }
            });
            table
        };
        let table = fill(&|k, l| inner.cost(k, l));
        let knot_table = knots.then(|| fill(&|k, l| inner.knot_cost(k, l)));
        Self {
            len: m,
            min_len,
            table,
            knot_table,
        }
    }
}

impl SegmentCost for DenseCost {
    fn len(&self) -> usize {
        self.len
    }

    fn min_segment_len(&self) -> usize {
        self.min_len
    }

    #[inline]
    fn cost(&self, first: usize, last: usize) -> f64 {
        self.table[first * self.len + last]
    }

    #[inline]
    fn knot_cost(&self, first: usize, last: usize) -> f64 {
        match &self.knot_table {
            Some(t) => t[first * self.len + last],
            None => self.cost(first, last),
        }
    }
}
