//! Boundary-controlled irreversible port-Hamiltonian systems on a 1D domain.
//!
//! The crate is organised bottom-up:
//!
//! * [`structure`]: constant structure matrices, thermodynamic closures,
//!   grids and field states, plus their validators.
//! * [`brackets`]: co-energy variables, pseudo-brackets, modulated driving
//!   forces and pointwise entropy production.
//! * [`ports`]: the extended port matrix, its rank factorization and the
//!   boundary input/output maps.
//! * [`discretization`]: difference operators, the semi-discrete right-hand
//!   side and its frozen dense counterpart.
//! * [`simulator`]: RK4 time stepping with boundary-input enforcement and the
//!   energy/entropy balance audits.
//! * [`models`]: built-in models (p-system, viscous fluid, heat conduction,
//!   A -> B diffusion-reaction).

pub mod brackets;
pub mod discretization;
pub mod error;
pub mod models;
pub mod ports;
pub mod simulator;
pub mod structure;

pub use error::{Error, Result};

/// Dense real matrix used for all structure and port data.
pub type Matrix = nalgebra::DMatrix<f64>;
