//! Block segmentation of neural network weight tensors over their index
//! grid, box-counting dimension estimates across integer dilation factors,
//! and executable checks of the coarse-geometric laws the segmentation obeys.
//!
//! - [`grid`]: the index lattice, its ℓ¹ metric, block enumeration and scale schedules
//! - [`segment`]: 2D/4D segmentation, reassembly, lifting, permutations
//! - [`dimension`]: log-log fits and per-layer dimension profiles
//! - [`laws`]: seeded verification suites
//! - [`io`]: checkpoint files, shape manifests, builtin architectures
//! - [`report`]: JSON/CSV/SVG emission for the command-line tool

pub mod dimension;
pub mod error;
pub mod grid;
pub mod io;
pub mod laws;
pub mod report;
pub mod segment;

pub use dimension::{
    classify_schedule, estimate_dimension, fit_loglog, profile_layer, Classification,
    DimensionEstimate, LambdaOutcome, LayerProfile, LogLogFit, TilingVerdict,
};
pub use error::{Error, Result};
pub use grid::{
    block_count, block_indices, entourage_contains, floor_schedule, geometric_schedule,
    l1_distance, BlockIndex, Grid, GridPoint, ScaleSchedule, ScheduleKind,
};
pub use laws::{LawReport, Suite};
pub use segment::{
    lift_block, permute, reassemble, segment_2d, segment_4d, BlockPartition, BlockPartition4D,
    Matrix2D, Permutation, Tensor4D,
};
