//! Phase-field simulation of a Cahn–Hilliard–Darcy system with chemotaxis-type
//! coupling on uniform 1D/2D grids, together with the diagnostics needed to
//! study its sharp-interface limit.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod model;
pub mod potential;
pub mod rng;
mod spectral;
pub mod sweep;

pub use diagnostics::{DiagnosticsRecord, InterfaceProbe, Snapshot};
pub use dynamics::{Observer, RunOutput, RunSettings, SimState, Simulator, SnapshotSchedule, StepSettings};
pub use elliptic::{LinSolveConfig, SolveStats};
pub use error::{Error, Result};
pub use grid::{AdvectionScheme, FaceVectorField, GridSpec, ScalarField};
pub use model::{CosineMode, InitKind, InitialData, Mobility, ModelSpec, SourceSpec, Variant};
pub use potential::{DoubleWell, Quartic, WTransform};
