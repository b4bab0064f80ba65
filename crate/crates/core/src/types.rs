//! Value types shared by every stage of the pipeline.
//!
//! Indices are 0-based everywhere in the API. A segment is described by
//! the inclusive index pair `(first, last)`, and a segmentation stores its
//! breaks as prefix lengths: a break `b` means one segment ends at index
//! `b - 1` and the next starts at index `b`.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered abscissae shared by all curves of a data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SampleGrid {
    points: Vec<f64>,
}

impl SampleGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain(format!(
                "a sample grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|t| !t.is_finite()) {
            return Err(Error::domain(format!("grid point {i} is not finite")));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::domain(format!(
                "grid is not strictly increasing at index {}: {} >= {}",
                i + 1,
                points[i],
                points[i + 1]
            )));
        }
        Ok(Self { points })
    }

    /// The grid `1, 2, ..., len`.
    pub fn uniform(len: usize) -> Result<Self> {
        Self::new((1..=len).map(|k| k as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Index of the last grid point `<= t`, or a domain error when `t` is
    /// outside `[first, last]`.
    pub fn locate(&self, t: f64) -> Result<usize> {
        if !(t >= self.first() && t <= self.last()) {
            return Err(Error::domain(format!(
                "t = {t} outside grid range [{}, {}]",
                self.first(),
                self.last()
            )));
        }
        Ok(self.points.partition_point(|&p| p <= t) - 1)
    }
}

impl TryFrom<Vec<f64>> for SampleGrid {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<SampleGrid> for Vec<f64> {
    fn from(grid: SampleGrid) -> Self {
        grid.points
    }
}

/// `N` curves sampled on one grid, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurveSet", into = "RawCurveSet")]
pub struct CurveSet {
    grid: SampleGrid,
    values: Vec<f64>,
    ids: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawCurveSet {
    grid: SampleGrid,
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawCurveSet> for CurveSet {
    type Error = Error;

    fn try_from(raw: RawCurveSet) -> Result<Self> {
        Self::new(raw.grid, raw.rows, Some(raw.ids))
    }
}

impl From<CurveSet> for RawCurveSet {
    fn from(set: CurveSet) -> Self {
        let rows = set.rows().map(<[f64]>::to_vec).collect();
        RawCurveSet {
            grid: set.grid,
            ids: set.ids,
            rows,
        }
    }
}

impl CurveSet {
    /// Builds a curve set. When `ids` is `None` curves are labelled by their
    /// 0-based row index.
    pub fn new(grid: SampleGrid, rows: Vec<Vec<f64>>, ids: Option<Vec<String>>) -> Result<Self> {
        let m = grid.len();
        if rows.is_empty() {
            return Err(Error::domain("a curve set needs at least one curve"));
        }
        let mut values = Vec::with_capacity(rows.len() * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::domain(format!(
                    "curve {i} has {} values, grid has {m}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::domain(format!("curve {i} value {j} is not finite")));
            }
            values.extend_from_slice(row);
        }
        let ids = match ids {
            Some(ids) if ids.len() != rows.len() => {
                return Err(Error::domain(format!(
                    "{} ids for {} curves",
                    ids.len(),
                    rows.len()
                )))
            }
            Some(ids) => ids,
            None => (0..rows.len()).map(|i| i.to_string()).collect(),
        };
        Ok(Self { grid, values, ids })
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    /// Number of curves `N`.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of grid points `M`.
    pub fn width(&self) -> usize {
        self.grid.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.width();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.width())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Row-major copy of the values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum over curves of the squared deviations of each curve from its own
    /// mean value.
    pub fn total_variability(&self) -> f64 {
        self.rows()
            .map(|row| {
                let mean = row.iter().sum::<f64>() / row.len() as f64;
                row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            })
            .sum()
    }
}

/// Ordered partition of `0..len` into contiguous, nonempty segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSegmentation", into = "RawSegmentation")]
pub struct Segmentation {
    len: usize,
    breaks: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawSegmentation {
    len: usize,
    breaks: Vec<usize>,
}

impl TryFrom<RawSegmentation> for Segmentation {
    type Error = Error;

    fn try_from(raw: RawSegmentation) -> Result<Self> {
        Self::new(raw.len, raw.breaks)
    }
}

impl From<Segmentation> for RawSegmentation {
    fn from(s: Segmentation) -> Self {
        RawSegmentation {
            len: s.len,
            breaks: s.breaks,
        }
    }
}

impl Segmentation {
    /// `breaks` must be strictly increasing and lie in `1..len`.
    pub fn new(len: usize, breaks: Vec<usize>) -> Result<Self> {
        if len == 0 {
            return Err(Error::domain("cannot segment an empty index range"));
        }
        let mut prev = 0;
        for &b in &breaks {
            if b <= prev || b >= len {
                return Err(Error::domain(format!(
                    "invalid break {b} for length {len} (previous {prev})"
                )));
            }
            prev = b;
        }
        Ok(Self { len, breaks })
    }

    /// The single-segment partition.
    pub fn whole(len: usize) -> Result<Self> {
        Self::new(len, Vec::new())
    }

    /// Inverse of [`Segmentation::segments`].
    pub fn from_segments(segments: &[RangeInclusive<usize>]) -> Result<Self> {
        let Some(last) = segments.last() else {
            return Err(Error::domain("no segments"));
        };
        let mut expected = 0;
        for s in segments {
            if *s.start() != expected || s.end() < s.start() {
                return Err(Error::domain(format!(
                    "segment {s:?} does not continue at index {expected}"
                )));
            }
            expected = s.end() + 1;
        }
        let breaks = segments[1..].iter().map(|s| *s.start()).collect();
        Self::new(last.end() + 1, breaks)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn breaks(&self) -> &[usize] {
        &self.breaks
    }

    pub fn segment_count(&self) -> usize {
        self.breaks.len() + 1
    }

    pub fn segments(&self) -> Vec<RangeInclusive<usize>> {
        let mut out = Vec::with_capacity(self.segment_count());
        let mut start = 0;
        for &b in self.breaks.iter().chain(std::iter::once(&self.len)) {
            out.push(start..=b - 1);
            start = b;
        }
        out
    }

    /// Index of the segment containing grid index `j`.
    pub fn segment_of(&self, j: usize) -> usize {
        self.breaks.partition_point(|&b| b <= j)
    }
}

/// Interpolation knots `0 = k_0 < k_1 < ... < k_P = len - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawKnots", into = "RawKnots")]
pub struct KnotSet {
    knots: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawKnots {
    knots: Vec<usize>,
}

impl TryFrom<RawKnots> for KnotSet {
    type Error = Error;

    fn try_from(raw: RawKnots) -> Result<Self> {
        Self::new(raw.knots)
    }
}

impl From<KnotSet> for RawKnots {
    fn from(k: KnotSet) -> Self {
        RawKnots { knots: k.knots }
    }
}

impl KnotSet {
    pub fn new(knots: Vec<usize>) -> Result<Self> {
        if knots.len() < 2 || knots[0] != 0 {
            return Err(Error::domain(
                "knots need at least two entries starting at index 0",
            ));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("knots must be strictly increasing"));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[usize] {
        &self.knots
    }

    /// Number of interpolation pieces `P`.
    pub fn piece_count(&self) -> usize {
        self.knots.len() - 1
    }

    /// Length of the index range covered, `last knot + 1`.
    pub fn len(&self) -> usize {
        self.knots[self.knots.len() - 1] + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Local model fitted on each segment, together with its loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Constant level, squared loss.
    #[serde(rename = "const-l2")]
    ConstantL2,
    /// Constant level, absolute loss.
    #[serde(rename = "const-l1")]
    ConstantL1,
    /// Least-squares line, squared loss.
    LineL2,
    /// Chord through the segment end points; adjacent pieces share knots.
    InterpL2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::ConstantL2,
        ModelKind::ConstantL1,
        ModelKind::LineL2,
        ModelKind::InterpL2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ConstantL2 => "const-l2",
            ModelKind::ConstantL1 => "const-l1",
            ModelKind::LineL2 => "line-l2",
            ModelKind::InterpL2 => "interp-l2",
        }
    }

    /// Shortest segment on which the model's cost is defined.
    pub fn min_segment_len(self) -> usize {
        match self {
            ModelKind::InterpL2 => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown model '{s}'")))
    }
}

/// How per-curve errors are combined when one model summarizes a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetAggregate {
    #[default]
    SumOverCurves,
    MaxOverCurves,
}

/// A validated model kind / set aggregation pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawModelSpec", into = "RawModelSpec")]
pub struct ModelSpec {
    kind: ModelKind,
    aggregate: SetAggregate,
}

#[derive(Serialize, Deserialize)]
struct RawModelSpec {
    kind: ModelKind,
    aggregate: SetAggregate,
}

impl TryFrom<RawModelSpec> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawModelSpec) -> Result<Self> {
        Self::new(raw.kind, raw.aggregate)
    }
}

impl From<ModelSpec> for RawModelSpec {
    fn from(m: ModelSpec) -> Self {
        RawModelSpec {
            kind: m.kind,
            aggregate: m.aggregate,
        }
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind, aggregate: SetAggregate) -> Result<Self> {
        if aggregate == SetAggregate::MaxOverCurves && kind != ModelKind::ConstantL2 {
            return Err(Error::config(format!(
                "max-over-curves aggregation is only available for const-l2, not {kind}"
            )));
        }
        Ok(Self { kind, aggregate })
    }

    /// Sum-over-curves spec, always valid.
    pub fn sum(kind: ModelKind) -> Self {
        Self {
            kind,
            aggregate: SetAggregate::SumOverCurves,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn aggregate(&self) -> SetAggregate {
        self.aggregate
    }
}
