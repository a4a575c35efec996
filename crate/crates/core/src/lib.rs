//! Closed discrete planar curves and the periodic Toda lattice.
//!
//! The phase space of closed discrete curves of length N in ℝ² is ℝ^{2N}
//! with its canonical symplectic structure. The spectral map
//! a_k = g_k^{-2}, b_k = u_k/(g_{k−1} g_k) − λ — built from the determinant
//! invariants g_k = det(γ_k, γ_{k+1}) and u_k = det(γ_{k−1}, γ_{k+1}) —
//! carries that structure to the tri-Hamiltonian bracket family of the
//! periodic Toda lattice. This crate makes the claim checkable:
//!
//! * [`curve`] — curves, invariants, frames, transfer matrices, monodromy,
//!   and reconstruction from invariants.
//! * [`flow`] — arbitrary (α, β) flows, their induced motion on g and u,
//!   the V-matrices, and zero-curvature residuals.
//! * [`bracket`] — the spectral map, exact chain-rule gradients, the
//!   canonical bracket engine, the closed-form relations, λ-grading into
//!   three structure tables, and Jacobi certification.
//! * [`dynamics`] — the first Toda flow on both representations, fixed-step
//!   integration, and conserved quantities from the transfer-matrix trace.
//!
//! Everything is pure and deterministic; batch drivers may fan out over
//! independent inputs freely.

pub mod bracket;
pub mod curve;
pub mod dynamics;
pub mod error;
pub mod flow;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
