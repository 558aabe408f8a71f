//! Regularized propagators and secondary generalized scattering operators.
//!
//! The crate solves `∂S/∂t = −iεV(t)S` for perturbations whose tails
//! `C± + B±/t` are not integrable, removes the divergence with deviation
//! factors, and certifies norm convergence of the regularized limit. It also
//! contains a finite-dimensional checker for the commutation identities of
//! generalized wave and scattering operators, and the ultraviolet example with
//! linear divergence built from four-dimensional spherical integrals.

pub mod commutation;
pub mod error;
pub mod evolution;
pub mod operator;
pub mod quadrature;
pub mod regularization;
pub mod uv;

pub use error::{Error, Result};
