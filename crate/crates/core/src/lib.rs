//! Numerical and exact-algebraic laboratory for attracting sets of holomorphic
//! endomorphisms of P^k: Green functions, attracting currents, their
//! equilibrium measures, and entropy estimates, with full support at `k = 2`.

pub mod algebraic;
pub mod attractor;
pub mod cli;
pub mod currents;
pub mod endomorphism;
pub mod entropy;
pub mod equilibrium;
pub mod error;
pub mod green;
pub mod poly;
pub mod projective;
pub mod rng;

pub use error::{Error, Result};
pub use projective::{CenterProjection, FubiniStudyForm, HomogeneousPoint, LinearSubspace, C64};
