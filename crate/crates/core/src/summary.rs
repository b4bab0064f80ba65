//! Fitted piecewise prototypes and their evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{KnotSet, ModelKind, ModelSpec, SampleGrid, Segmentation};

/// Parameters of the model on one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SegmentModel {
    Level { level: f64 },
    /// `intercept + slope * t`, with `t` in grid units.
    Line { slope: f64, intercept: f64 },
}

impl SegmentModel {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            SegmentModel::Level { level } => level,
            SegmentModel::Line { slope, intercept } => intercept + slope * t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "kebab-case")]
pub enum SummaryLayout {
    Segments {
        segmentation: Segmentation,
        params: Vec<SegmentModel>,
    },
    Knots {
        knots: KnotSet,
        values: Vec<f64>,
    },
}

/// A piecewise function on a sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSummary", into = "RawSummary")]
pub struct Summary {
    model: ModelSpec,
    grid: SampleGrid,
    layout: SummaryLayout,
}

#[derive(Serialize, Deserialize)]
struct RawSummary {
    model: ModelSpec,
    grid: SampleGrid,
    #[serde(flatten)]
    layout: SummaryLayout,
}

impl TryFrom<RawSummary> for Summary {
    type Error = Error;

    fn try_from(raw: RawSummary) -> Result<Self> {
        Self::new(raw.model, raw.grid, raw.layout)
    }
}

impl From<Summary> for RawSummary {
    fn from(s: Summary) -> Self {
        RawSummary {
            model: s.model,
            grid: s.grid,
            layout: s.layout,
        }
    }
}

impl Summary {
    pub fn new(model: ModelSpec, grid: SampleGrid, layout: SummaryLayout) -> Result<Self> {
        match &layout {
            SummaryLayout::Segments {
                segmentation,
                params,
            } => {
                if model.kind() == ModelKind::InterpL2
                    && segmentation.segments().iter().any(|s| s.end() == s.start())
                {
                    return Err(Error::domain("chord segments need two points"));
                }
                if segmentation.len() != grid.len() {
                    return Err(Error::domain(format!(
                        "segmentation covers {} points, grid has {}",
                        segmentation.len(),
                        grid.len()
                    )));
                }
                if params.len() != segmentation.segment_count() {
                    return Err(Error::domain(format!(
                        "{} parameter sets for {} segments",
                        params.len(),
                        segmentation.segment_count()
                    )));
                }
            }
            SummaryLayout::Knots { knots, values } => {
                if model.kind() != ModelKind::InterpL2 {
                    return Err(Error::domain("knot summaries require the interp-l2 model"));
                }
                if knots.len() != grid.len() {
                    return Err(Error::domain("knots must end at the last grid point"));
                }
                if values.len() != knots.knots().len() {
                    return Err(Error::domain("one value per knot is required"));
                }
            }
        }
        Ok(Self {
            model,
            grid,
            layout,
        })
    }

    pub fn model(&self) -> ModelSpec {
        self.model
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn layout(&self) -> &SummaryLayout {
        &self.layout
    }

    /// Number of segments (interpolation pieces for knot summaries).
    pub fn segment_count(&self) -> usize {
        match &self.layout {
            SummaryLayout::Segments { segmentation, .. } => segmentation.segment_count(),
            SummaryLayout::Knots { knots, .. } => knots.piece_count(),
        }
    }

    /// Value at abscissa `t`. Between two grid points lying in different
    /// segments, the left segment's model is used.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        let j = self.grid.locate(t)?;
        Ok(match &self.layout {
            SummaryLayout::Segments {
                segmentation,
                params,
            } => params[segmentation.segment_of(j)].at(t),
            SummaryLayout::Knots { knots, values } => {
                let ks = knots.knots();
                let pts = self.grid.points();
                // Last knot at or before j, capped so a right neighbour exists.
                let p = (ks.partition_point(|&k| k <= j) - 1).min(ks.len() - 2);
                let (t0, t1) = (pts[ks[p]], pts[ks[p + 1]]);
                let (v0, v1) = (values[p], values[p + 1]);
                if t == t1 {
                    v1
                } else {
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        })
    }

    /// Values at every grid point.
    pub fn grid_values(&self) -> Vec<f64> {
        let pts = self.grid.points();
        match &self.layout {
            SummaryLayout::Segments {
                segmentation,
                params,
            } => {
                let mut out = Vec::with_capacity(pts.len());
                for (seg, p) in segmentation.segments().into_iter().zip(params) {
                    out.extend(seg.map(|j| p.at(pts[j])));
                }
                out
            }
            SummaryLayout::Knots { knots, values } => {
                let mut out = vec![0.0; pts.len()];
                for (w, v) in knots.knots().windows(2).zip(values.windows(2)) {
                    let (k0, k1) = (w[0], w[1]);
                    let (t0, t1) = (pts[k0], pts[k1]);
                    for j in k0..=k1 {
                        out[j] = if j == k0 {
                            v[0]
                        } else if j == k1 {
                            v[1]
                        } else {
                            v[0] + (v[1] - v[0]) * (pts[j] - t0) / (t1 - t0)
                        };
                    }
                }
                out
            }
        }
    }
}

/// Public alias of [`Summary::evaluate`].
pub fn evaluate_summary(summary: &Summary, t: f64) -> Result<f64> {
    summary.evaluate(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(levels: &[f64], breaks: Vec<usize>, m: usize) -> Summary {
        Summary::new(
            ModelSpec::sum(ModelKind::ConstantL2),
            SampleGrid::uniform(m).unwrap(),
            SummaryLayout::Segments {
                segmentation: Segmentation::new(m, breaks).unwrap(),
                params: levels.iter().map(|&level| SegmentModel::Level { level }).collect(),
            },
        )
        .unwrap()
    }

    #[test]
    fn single_level() {
        let s = constant(&[3.0], vec![], 5);
        for t in [1.0, 2.2, 5.0] {
            assert_eq!(s.evaluate(t).unwrap(), 3.0);
        }
        assert!(s.evaluate(0.5).is_err());
        assert!(s.evaluate(5.5).is_err());
    }

    #[test]
    fn half_and_half_levels() {
        let s = constant(&[0.5, 1.0], vec![5], 10);
        assert_eq!(s.evaluate(2.0).unwrap(), 0.5);
        assert_eq!(s.evaluate(5.0).unwrap(), 0.5);
        // Between the last point of segment 1 and the first of segment 2.
        assert_eq!(s.evaluate(5.7).unwrap(), 0.5);
        assert_eq!(s.evaluate(6.0).unwrap(), 1.0);
        assert_eq!(s.grid_values(), [0.5, 0.5, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn interpolated_midpoint() {
        let s = Summary::new(
            ModelSpec::sum(ModelKind::InterpL2),
            SampleGrid::new(vec![0.0, 1.0]).unwrap(),
            SummaryLayout::Knots {
                knots: KnotSet::new(vec![0, 1]).unwrap(),
                values: vec![0.0, 2.0],
            },
        )
        .unwrap();
        assert_eq!(s.evaluate(0.5).unwrap(), 1.0);
        assert_eq!(s.evaluate(1.0).unwrap(), 2.0);
    }

    #[test]
    fn knot_grid_values() {
        let s = Summary::new(
            ModelSpec::sum(ModelKind::InterpL2),
            SampleGrid::uniform(5).unwrap(),
            SummaryLayout::Knots {
                knots: KnotSet::new(vec![0, 2, 4]).unwrap(),
                values: vec![0.0, 2.0, -2.0],
            },
        )
        .unwrap();
        assert_eq!(s.grid_values(), vec![0.0, 1.0, 2.0, 0.0, -2.0]);
        assert_eq!(s.evaluate(4.5).unwrap(), -1.0);
    }

    #[test]
    fn parameter_count_checked() {
        let r = Summary::new(
            ModelSpec::sum(ModelKind::ConstantL2),
            SampleGrid::uniform(4).unwrap(),
            SummaryLayout::Segments {
                segmentation: Segmentation::new(4, vec![2]).unwrap(),
                params: vec![SegmentModel::Level { level: 1.0 }],
            },
        );
        assert!(r.is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let s = constant(&[0.1 + 0.2, -1.0 / 3.0], vec![2], 4);
        let back: Summary = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
