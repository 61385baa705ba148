//! Matching-based stabilization of underactuated mechanical systems: the
//! general matching equations, a cart-pendulum controller built from them,
//! a linear baseline, a quartic example and a simulation harness.

pub mod abstract_quartic;
pub mod cartpole;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod linear_compare;
pub mod matching;
pub mod ode;
pub mod quadrature;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
