//! Adjoint-based estimation of the acid aggressiveness parameter `delta1` in a 1D
//! acid-mediated tumor invasion model.
//!
//! The forward problem couples healthy tissue, tumor tissue and excess H+ ions through a
//! reaction-diffusion system on `[0, 1]`. It is solved with linear finite elements and
//! implicit Euler ([`forward`]). A backward adjoint sweep ([`adjoint`]) yields the gradient
//! of the data misfit ([`objective`]), which drives a bound-constrained scalar minimizer
//! ([`optimizer`]). [`estimator`] provides a residual-based a posteriori error indicator and
//! [`experiments`] reproduces the synthetic recovery and noise studies.

pub mod adjoint;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod fem;
pub mod forward;
pub mod model;
pub mod objective;
pub mod optimizer;

pub use error::{Error, Result};
