//! Nonlinear Schrödinger equation with a time-dependent magnetic potential
//! on a periodic box:
//!
//! ```text
//! i ∂_t u = (i∇ - bA(t, x))² u + sign · b^γ · u g(|u|²)
//! ```
//!
//! The crate provides gauge-covariant discretizations ([`field`]), analytic
//! potentials ([`potential`]), the nonlinearity and its energy functionals
//! ([`nonlinearity`]), a split-step propagator with truncation and
//! piecewise-constant-potential ladders ([`propagator`]), conservation-law
//! diagnostics ([`diagnostics`]) and the semiclassical WKB system with phase
//! reconstruction ([`wkb`]). The [`app`] module drives all of it from INI
//! configuration files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod initial;
pub mod nonlinearity;
pub mod potential;
pub mod propagator;
pub mod sweep;
pub mod wkb;

pub use error::{AbortReason, Error, Result};
pub use field::{ComplexField, Grid, RealField, RealVectorField};
pub use nonlinearity::NonlinearitySpec;
pub use potential::PotentialSpec;
pub use propagator::{solve, Solution, SolverConfig};
