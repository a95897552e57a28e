//! Dense solvers for continuous-time Lyapunov equations and algebraic
//! Riccati equations, built on an ordered real Schur decomposition.
//!
//! The Riccati solver selects the stabilizing or anti-stabilizing solution
//! by reordering the Schur form of the associated Hamiltonian matrix so the
//! leading invariant subspace carries the chosen half-plane.

mod lyapunov;
mod riccati;
mod schur;

pub use lyapunov::{solve_lyapunov, LyapunovSolver};
pub use riccati::{riccati_residual, solve_riccati, RiccatiMode, RiccatiSolution};
pub(crate) use riccati::NegDefR;
pub use schur::{real_schur, reorder_schur, schur_eigenvalues, RealSchur};

use thiserror::Error;

/// Errors raised by the matrix-equation kernels.
#[derive(Debug, Error)]
pub enum EquationError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The QR iteration did not converge to a real Schur form.
    #[error("real Schur decomposition failed to converge")]
    SchurFailed,
    /// Eigenvalue reordering could not swap two blocks reliably.
    #[error("Schur reordering failed: {0}")]
    ReorderFailed(String),
    /// The Lyapunov operator X -> M'X + XM is singular (eigenvalue sums
    /// too close to zero).
    #[error("singular pencil: eigenvalue pair sum within axis tolerance")]
    SingularPencil,
    /// R is not negative definite, so the Riccati operator is undefined.
    #[error("R is not negative definite")]
    NotNegativeDefinite,
    /// A Hamiltonian eigenvalue sits within the axis tolerance of the
    /// imaginary axis; no (anti-)stabilizing solution exists there.
    #[error("not in domain: Hamiltonian eigenvalue on the imaginary axis")]
    NotInDomain,
    /// The invariant-subspace top block X1 is too ill conditioned to invert.
    #[error("invariant subspace ill conditioned: cond(X1) = {cond:.3e}")]
    IllConditioned { cond: f64 },
    /// The inverse gap matrix is too ill conditioned to invert.
    #[error("inverse gap nearly singular: cond = {cond:.3e}")]
    NearSingularY { cond: f64 },
    /// A computed solution violated its residual contract.
    #[error("residual {residual:.3e} exceeds bound {bound:.3e}")]
    ResidualTooLarge { residual: f64, bound: f64 },
}
