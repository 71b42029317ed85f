//! Fifth-order KdV, `u_t + ∂_x⁵u + u u_x = 0`, on the half-line `x > 0`
//! with three Dirichlet-type boundary traces at `x = 0`.
//!
//! The solution is built as free evolution of an extended datum, plus a
//! boundary potential correcting the traces, plus a Duhamel term, iterated
//! to a fixed point in Bourgain-type norms.

pub mod boundary;
pub mod bourgain;
pub mod cutoffs;
pub mod error;
pub mod io;
pub mod par;
pub mod propagator;
pub mod quadrature;
pub mod spectral;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
