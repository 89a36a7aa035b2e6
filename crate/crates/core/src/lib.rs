//! Numerical core for boundary renormalisation of singular SPDEs.
//!
//! The crate is `no_std` (it needs `alloc`) and contains:
//!
//! * [`mollifier`] — compactly supported bump profiles, their parabolic
//!   rescaling and the autocorrelation `η = ρ̄ ∗ ρ`;
//! * [`kernels`] — Gaussian heat kernels, method-of-images kernels on the
//!   interval and the square, and an implicit Robin heat semigroup;
//! * [`renorm`] — the boundary constants `a`, `c`, the bulk constants `C_ε`
//!   for KPZ and generalised PAM, and the boundary-layer functions `B₀ᵋ`, `C₀ᵋ`;
//! * [`noise`] — counter-based discrete white noise and its mollification;
//! * [`solvers`] — finite-difference schemes for the stochastic heat equation
//!   with Robin data, renormalised KPZ and generalised PAM.
//!
//! Conventions: the heat operator is `∂ₜ − ½∂ₓ²` in one dimension (so the
//! kernel at time `t` is a Gaussian of variance `t`), while the generalised
//! PAM uses the full Laplacian.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod fd;
pub mod kernels;
pub mod mollifier;
pub mod noise;
pub mod quad;
pub mod renorm;
pub mod solvers;

pub use error::{Error, Result};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
