//! Cauchy evolution on a uniform grid and the hyperboloid crossing recorder.

pub mod crossing;
mod grid;
pub mod mms;
mod run;
pub mod snapshot;
pub mod stencil;
pub mod stepper;

pub use crossing::{CrossingRecorder, CrossingSink, SliceChunk, SlicePoint};
pub use grid::{FieldLayout, FieldState, Grid2D};
pub use run::{run, run_with, RunMeta, RunOptions, RunOutput, Termination};
pub use stencil::laplacian;
pub use stepper::{Domain, Stepper, TimeGrid};
