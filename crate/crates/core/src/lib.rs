//! Simulation and verification toolkit for state-constrained optimal consumption with
//! a distributed delay in the state equation.

pub mod config;
pub mod dde;
pub mod hjb;
pub mod error;
pub mod lift;
pub mod model;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod scalar;
pub mod state;
pub mod value;
pub mod verify;

pub use error::{Error, Result};
pub use model::Model;
pub use scalar::Real;
pub use state::HState;

pub type HState64 = HState<f64>;
pub type HState32 = HState<f32>;
pub type Model64 = Model<f64>;
pub type Model32 = Model<f32>;
