//! Simulation laboratory for asynchronous stochastic gradient descent (ASGD)
//! with random staleness, the stochastic modified equations (SMEs) that model
//! it in continuous time, closed-form moment dynamics for the quadratic case,
//! and the optimal time-dependent mini-batch schedule obtained from the
//! associated Hamilton-Jacobi-Bellman equation.
//!
//! Layout:
//! - [`objectives`]: test problems as averages of component gradients
//! - [`discrete`]: ASGD, mini-batch ASGD, momentum SGD, and the exact
//!   expected-read / auxiliary-accumulator reformulations
//! - [`sme`]: Euler-Maruyama integrators for the four continuous models,
//!   including the covariance evolution equations
//! - [`moments`]: first/second moment ODE systems, spectra, stationary
//!   solutions, optimal staleness parameter
//! - [`control`]: optimal mini-batch schedule, value function, constraint
//!   dynamics
//! - [`ensemble`]: reproducible Monte Carlo harness and cross-model error
//!   metrics
//! - [`chart`], [`export`], [`presets`]: deterministic SVG rendering, CSV/JSON
//!   output, and canned experiment configurations

pub mod chart;
pub mod control;
pub mod discrete;
pub mod ensemble;
mod error;
pub mod export;
pub mod linalg;
pub mod moments;
pub mod objectives;
pub mod presets;
pub mod rng;
pub mod sme;

pub use error::Error;

/// Column vector of `f64`, the working state type throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense square matrix of `f64`, used for noise covariances.
pub type Matrix = nalgebra::DMatrix<f64>;

pub type Result<T> = std::result::Result<T, Error>;
