//! Reading and writing curve tables, run manifests and figures.
//!
//! Numbers are written with 17 significant digits, which reads back to the
//! same `f64`. Column indices in diagnostics are 0-based.

mod manifest;
mod svg;
mod table;

pub use manifest::{
    build_report, fingerprint, write_atomic, DatasetFingerprint, Report, ReportRow, RunManifest,
};
pub use svg::{curve_svg, heights_svg, panel_svg, set_svg};
pub use table::{format_real, read_curves, read_curves_from, write_assignment, write_curves, ReadOptions};
