//! Structure-exploiting solver for KYP semidefinite programs.
//!
//! Instead of optimizing over the O(n^2) entries of the Lyapunov matrix in
//! the KYP linear matrix inequality, the solver works on the equivalent
//! program in the multiplier vector alone: the Lyapunov matrix is recovered
//! as the anti-stabilizing solution of an algebraic Riccati equation, and
//! the gap between the two Riccati solutions acts as a barrier for Riccati
//! solvability. A path-following Newton method minimizes the resulting
//! log-det barrier, driving one Riccati and a handful of Lyapunov solves
//! per iteration instead of a full semidefinite program.
//!
//! Crate layout:
//! - [`model`]: affine matrix families, the standard problem form, validation
//! - [`equations`]: ordered-Schur Riccati and Bartels–Stewart Lyapunov kernels
//! - [`calculus`]: solution pair, gap matrix and their derivatives
//! - [`barrier`]: the path-following interior-point solver and phase-I
//! - [`synthesis`]: robust state-feedback front end and plant generators
//! - [`verify`]: independent oracles (LMI margin, frequency sampling,
//!   finite differences, grid search)
//! - [`instances`]: canned and random test instances

pub mod barrier;
pub mod calculus;
pub mod equations;
pub mod instances;
pub mod model;
pub mod par;
pub mod synthesis;
pub mod tol;
pub mod verify;

pub use barrier::{phase1, solve, Phase1Outcome, SolveReport, SolveStatus, SolverConfig};
pub use calculus::{compute_pair, PairStrategy, RiccatiPair};
pub use model::{AffineMatrixFamily, KypProblem, ValidationReport};
pub use tol::Tolerances;
