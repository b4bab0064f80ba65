//! Summaries of sets of sampled curves.
//!
//! Curves are clustered and each cluster is represented by a simple
//! piecewise prototype (constant, linear, or a continuous interpolation).
//! For a fixed partition the prototypes are exact optima found by dynamic
//! programming over ordered segmentations, and the number of segments each
//! cluster receives out of a global budget is chosen by a second dynamic
//! program. The clustering itself alternates between refitting prototypes
//! and reassigning curves, like K-means with constrained centres.

pub mod allocation;
pub mod clustering;
pub mod cost;
pub mod error;
pub mod init;
pub mod io;
pub mod segmentation;
pub mod summary;
pub mod types;

pub use error::{Error, Result};
pub use segmentation::{Aggregator, Partition};
pub use summary::{evaluate_summary, SegmentModel, Summary, SummaryLayout};
pub use types::{CurveSet, KnotSet, ModelKind, ModelSpec, SampleGrid, Segmentation, SetAggregate};
