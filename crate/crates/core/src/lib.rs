//! Immiscible incompressible two-phase flow on structured grids with a
//! nudging term that synchronizes a wrongly initialized run to a reference
//! run from coarse saturation observations.
//!
//! The building blocks are layered bottom-up: [`grid`] and [`field`] hold
//! meshes and cell data, [`model`] the constitutive laws and wells,
//! [`pressure`] the elliptic solve, [`transport`] the explicit saturation
//! update with optional nudging, [`observe`] the coarse observation
//! operator and [`diagnostics`] the error metrics. [`harness`] ties them
//! into reference, assimilation and sweep runs.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod model;
pub mod observe;
pub mod pressure;
pub mod transport;

pub use error::{Error, Result};
pub use field::{CellField, FaceFlux};
pub use grid::{CoarseMap, Grid, Mask};
pub use model::{FluidModel, FluidParams, WellConfig};
pub use observe::{Observation, Observer};
pub use pressure::PressureSystem;
pub use transport::{NudgingMode, Transport};
