//! Numerical laboratory for the time-periodically forced parabolic-elliptic
//! Keller-Segel system
//!
//! ```text
//!   u_t = Δu − χ ∇·(u ∇v) + ∇·f(t),     −Δv + γv = κu
//! ```
//!
//! on a periodic box (a surrogate for R^n) and on radially symmetric real
//! hyperbolic space H^n. The crate provides the spectral and finite-volume
//! operators, exponential time stepping of the mild (Duhamel) formulation,
//! Poincaré/Cesàro construction of periodic solutions, Lorentz-space norms
//! and the decay-rate analysis used to probe the estimates numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod domain;
pub mod duhamel;
pub mod error;
pub mod estimates;
pub mod hyperbolic;
pub mod lorentz;
pub mod periodic;
pub mod snapshot;
pub mod spectral;
pub mod tridiag;

pub use domain::{Domain, Field};
pub use error::{Error, Result};
pub use hyperbolic::{RadialDomain, RadialField, RadialGrid};
pub use spectral::{TorusDomain, TorusField, TorusGrid, TorusVectorField};
