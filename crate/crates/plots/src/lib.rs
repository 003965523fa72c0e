//! Trace plots (conditional estimates against the heterogeneity `τ`), forest
//! plots, and a long-format CSV of the trace data.

#![allow(clippy::needless_range_loop)]

mod csv_export;
mod error;
mod svg;
mod trace;

pub use csv_export::{export_trace_csv, parse_trace_csv};
pub use error::{Error, Result};
pub use svg::{render_forest_svg, render_trace_svg, TraceSvgOptions, HEIGHT, PALETTE, WIDTH};
pub use trace::{
    compute_trace, BottomPanel, GridSpec, InfinityRefs, Series, TraceData, TraceMode,
    DEFAULT_GRID_POINTS, MIN_GRID_POINTS,
};
