//! Structured-grid simulator and diagnostics for the dynamic linear relaxed micromorphic model.

pub mod config;
pub mod dispersion;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod initial;
pub mod mms;
pub mod model;
pub mod ops;
pub mod output;
pub mod probe;
pub mod snapshot;

pub use error::{Error, Result};
pub use grid::{BoundaryClosure, CartesianGrid, NodalField, ScalarField, SimulationState, TensorField, Topology, VectorField};
pub use model::{cauchy_stress, micro_stress, MaterialParameters, Tensor3};
