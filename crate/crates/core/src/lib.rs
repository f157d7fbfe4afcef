//! Numerical laboratory for the coupled 2D wave / Klein-Gordon system
//!
//! ```text
//! -□w      = Pᵅ∂ᵅ(|v|²) + F⁰(w, v)
//! -□vⁱ + vⁱ = P̃ᵅ vⁱ ∂ᵅw + Fⁱ(w, v)
//! ```
//!
//! The crate evolves the system on a Cartesian grid, records 2-jets of every
//! field on hyperboloids `t² - r² = s²`, and evaluates the energies, weighted
//! norms and vector-field identities that govern its long-time behaviour.
//!
//! Module map:
//!
//!   * [`model`]: parameters, nonlinearity tensors, pointwise right-hand sides, data.
//!   * [`evolve`]: method-of-lines RK4 evolution and hyperboloid-crossing recording.
//!   * [`vfcalc`]: Lorentz boosts, scaling, `K`, frames and identities on 2-jets.
//!   * [`foliation`]: norms and energies on hyperboloidal slices.
//!   * [`diagnostics`]: decay fits, boundedness verdicts, energy-inequality monitors.
//!   * [`config`]: run configuration, presets and validation.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod foliation;
pub mod model;
pub mod vfcalc;

pub use config::{Preset, RunConfig};
pub use diagnostics::{DecayFit, DiagnosticsRow, SliceReducer, TheoremVerdict};
pub use error::{Error, Result};
pub use evolve::{FieldState, Grid2D, RunOutput};
pub use foliation::{FieldSel, HyperboloidSlice};
pub use model::{CoefficientSet, Model, ModelParams, ProfileSpec, WaveSource};
pub use vfcalc::{Event, Jet1, Jet2};
