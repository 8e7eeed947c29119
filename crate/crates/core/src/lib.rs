//! Closed-form statistical-arbitrage strategies on the residuals of a factor
//! model, with an exact Ornstein-Uhlenbeck Monte Carlo harness.
//!
//! The residual process `dX = A(μ - X)dt + σ dB` is traded through the
//! market-neutral portfolios of [`factorbasis`]. Strategies:
//!
//! * [`frictionless`]: exponential utility and mean-variance closed forms;
//! * [`constrained`]: soft dollar-neutrality penalties;
//! * [`frictions`]: quadratic transaction costs (aim portfolio / trading rate).
//!
//! [`simharness`] runs the Monte Carlo campaigns and [`output`] writes the
//! CSV/JSON artifacts consumed by the `statarb` binary.

pub mod config;
pub mod constrained;
pub mod diagnose;
pub mod error;
pub mod factorbasis;
pub mod frictionless;
pub mod frictions;
pub mod matkernels;
pub mod oumodel;
pub mod output;
pub mod par;
pub mod policy;
pub mod rng;
pub mod simharness;

pub use error::{Error, Result};

pub type Mat = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
