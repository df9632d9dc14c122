//! C⁰ interior penalty finite elements for the phase field crystal equation.
//!
//! The density `φ` lives in continuous P2, the chemical potential `μ` in
//! continuous P1. Each time step solves the convex-splitting system
//!
//! ```text
//! ((φᵐ − φᵐ⁻¹)/τ, ν) + (∇μᵐ, ∇ν) = 0                                 ∀ν ∈ P1
//! a(φᵐ, ψ) + ((φᵐ)³ + (1−ε)φᵐ, ψ) − 2(∇φᵐ⁻¹, ∇ψ) − (μᵐ, ψ) = 0       ∀ψ ∈ P2
//! ```
//!
//! where `a` is the interior-penalty form in [`forms`].

pub mod app;
pub mod diagnostics;
pub mod error;
pub mod fespace;
pub mod forms;
pub mod ic;
pub mod mesh;
pub mod operators;
pub mod quadrature;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
