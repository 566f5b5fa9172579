//! Voltage-tunable electromagnetically induced transparency of an asymmetric
//! quantum-dot molecule placed inside a ring cavity.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`, which is what the tolerances in the test
//! suites assume.

pub mod cavity;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod output;
pub mod scalar;
pub mod susceptibility;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;
pub use susceptibility::Convention;

pub type QdmParams = model::QdmParams<f64>;
pub type ProbeField = model::ProbeField<f64>;
pub type UnitContext = model::UnitContext<f64>;
pub type PhysicalPreset = model::PhysicalPreset<f64>;
pub type ComplexResponse = susceptibility::ComplexResponse<f64>;
pub type DispersionReport = susceptibility::DispersionReport<f64>;
pub type CavityParams = cavity::CavityParams<f64>;
pub type CavityResponse = cavity::CavityResponse<f64>;
pub type DensityMatrix = dynamics::DensityMatrix<f64>;
pub type GridSpec = sweep::GridSpec<f64>;
pub type SurfaceResult = sweep::SurfaceResult<f64>;
