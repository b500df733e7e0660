//! Numerical analysis of collision kernels b(c) on the unit sphere S^{d-1}.
//!
//! The crate computes lower bounds for the log-Sobolev constant Λ_b of the
//! spherical jump operator
//!
//! ```text
//! Bf(σ) = ∫_{S^{d-1}} (f(σ') − f(σ)) b(σ'·σ) dσ',
//! ```
//!
//! decides the Fisher-information monotonicity criterion
//! sup_r r|α'(r)|/(2α(r)) ≤ √Λ_b, and verifies the underlying functional
//! inequalities (log-Sobolev, Hardy, Γ² curvature, Gâteaux identity) by
//! quadrature, Funk-Hecke spectral decomposition, and flow simulation.
//!
//! Module map:
//! - [`quadrature`]: Gauss-Jacobi rules that absorb endpoint singularities.
//! - [`sphere`]: surface measures, zonal integral reduction, tangent maps.
//! - [`gegenbauer`]: Legendre/Gegenbauer polynomials with P_ℓ(1) = 1,
//!   Laplace-Beltrami eigendata, the zonal heat kernel.
//! - [`kernels`]: kernel representations, Lévy moments, spectra λ̃_ℓ,
//!   comparison, subordination.
//! - [`constants`]: C_K, C_P, Λ_Δ, assembled Λ_b bounds, criterion verdicts.
//! - [`function`]: positive even functions on the sphere and the discrete
//!   operators B, Δ, Γ_Δ, Γ², Fisher information.
//! - [`verifier`]: inequality checks and empirical best-constant search.
//! - [`flow`]: exact spectral evolution of the heat and jump semigroups.

pub mod constants;
pub mod error;
pub mod flow;
pub mod function;
pub mod gegenbauer;
pub mod kernels;
pub mod quadrature;
pub mod sphere;
pub mod verifier;

pub use error::{Error, Result};
