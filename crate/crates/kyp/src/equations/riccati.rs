//! Algebraic Riccati solver via an ordered Schur form of the Hamiltonian.
//!
//! Solves `F(P) = A'P + PA + Q - (PB + S) R^{-1} (PB + S)' = 0` with
//! negative definite R, returning either the stabilizing solution (all
//! closed-loop eigenvalues in the open left half-plane) or the
//! anti-stabilizing one (right half-plane).

use nalgebra::{Complex, DMatrix};

use super::lyapunov::LyapunovSolver;
use super::schur::{real_schur, reorder_schur, schur_eigenvalues};
use super::EquationError;
use crate::model::{symmetric_part, symmetrize};
use crate::tol::Tolerances;

/// Which Riccati solution branch to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiccatiMode {
    /// Closed loop `A - BK` has all eigenvalues with negative real part.
    Stabilizing,
    /// Closed loop `A - BK` has all eigenvalues with positive real part.
    AntiStabilizing,
}

/// A Riccati solution together with its gain and diagnostics.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// Symmetric solution P.
    pub p: DMatrix<f64>,
    /// Gain `K = R^{-1} (PB + S)'`.
    pub k: DMatrix<f64>,
    /// Spectrum of the closed loop `A - BK` (the selected Hamiltonian half).
    pub closed_loop_eigs: Vec<Complex<f64>>,
    /// Frobenius norm of the Riccati residual at P.
    pub residual_norm: f64,
    pub mode: RiccatiMode,
}

/// Negative-definite data wrapper: factors `-R = L L'` once and exposes the
/// products the solver needs.
pub(crate) struct NegDefR {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl NegDefR {
    pub(crate) fn new(r: &DMatrix<f64>) -> Result<Self, EquationError> {
        let neg_r = -symmetric_part(r);
        let chol = neg_r.cholesky().ok_or(EquationError::NotNegativeDefinite)?;
        Ok(Self { chol })
    }

    /// `R^{-1} W = -(-R)^{-1} W`.
    pub(crate) fn r_inv_mul(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        -self.chol.solve(w)
    }

    /// `W (-R)^{-1} W' = -W R^{-1} W'`, positive semidefinite by construction.
    pub(crate) fn sandwich_neg_inv(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let half = self.chol.l().solve_lower_triangular(&w.transpose()).expect("L is nonsingular");
        let mut out = half.transpose() * half;
        symmetrize(&mut out);
        out
    }
}

/// Riccati residual `F(P) = A'P + PA + Q - (PB + S) R^{-1} (PB + S)'`,
/// evaluated through the negative-definite factorization of R.
pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    s: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>, EquationError> {
    let neg = NegDefR::new(r)?;
    let w = p * b + s;
    let mut f = a.transpose() * p + p * a + q + neg.sandwich_neg_inv(&w);
    symmetrize(&mut f);
    Ok(f)
}

/// Solve the algebraic Riccati equation for the requested solution branch.
///
/// Builds the 2n x 2n Hamiltonian
/// `[[A - B R^{-1} S', -B R^{-1} B'], [-(Q - S R^{-1} S'), -(A - B R^{-1} S')']]`,
/// reorders its real Schur form so the leading invariant subspace `[X1; X2]`
/// carries the chosen half-plane, and returns `P = X2 X1^{-1}` symmetrized,
/// with one Newton residual-correction step when warranted.
pub fn solve_riccati(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    s: &DMatrix<f64>,
    r: &DMatrix<f64>,
    mode: RiccatiMode,
    tol: &Tolerances,
) -> Result<RiccatiSolution, EquationError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || s.shape() != (n, m)
        || r.shape() != (m, m)
    {
        return Err(EquationError::DimensionMismatch(
            "inconsistent Riccati data dimensions".into(),
        ));
    }

    let neg = NegDefR::new(r)?;
    let r_inv_st = neg.r_inv_mul(&s.transpose()); // R^{-1} S'
    let a_hat = a - b * &r_inv_st;
    let g_pos = neg.sandwich_neg_inv(b); // B (-R)^{-1} B' >= 0
    // Q - S R^{-1} S' = Q + S (-R)^{-1} S'
    let q_hat = symmetric_part(q) + neg.sandwich_neg_inv(s);

    let mut ham = DMatrix::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(&a_hat);
    ham.view_mut((0, n), (n, n)).copy_from(&g_pos);
    ham.view_mut((n, 0), (n, n)).copy_from(&(-&q_hat));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a_hat.transpose()));

    let axis = tol.axis_margin(ham.norm());
    let mut schur = real_schur(&ham)?;
    for e in schur_eigenvalues(&schur.t) {
        if e.re.abs() <= axis {
            return Err(EquationError::NotInDomain);
        }
    }

    let selected = match mode {
        RiccatiMode::Stabilizing => reorder_schur(&mut schur, |e| e.re < 0.0)?,
        RiccatiMode::AntiStabilizing => reorder_schur(&mut schur, |e| e.re > 0.0)?,
    };
    if selected != n {
        // The spectrum of a Hamiltonian with no axis eigenvalues splits
        // evenly; an uneven split means the axis margin was optimistic.
        return Err(EquationError::NotInDomain);
    }

    let x1 = schur.q.view((0, 0), (n, n)).into_owned();
    let x2 = schur.q.view((n, 0), (n, n)).into_owned();

    let svals = x1.singular_values();
    let smax = svals.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let smin = svals.iter().fold(f64::INFINITY, |acc, &v| acc.min(v));
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !cond.is_finite() || cond > tol.x1_cond_max {
        return Err(EquationError::IllConditioned { cond });
    }

    // P = X2 X1^{-1}: solve X1' P' = X2' and transpose.
    let lu = x1.transpose().full_piv_lu();
    let pt = lu
        .solve(&x2.transpose())
        .ok_or(EquationError::IllConditioned { cond })?;
    let mut p = pt.transpose();
    symmetrize(&mut p);

    let closed_loop_eigs: Vec<Complex<f64>> =
        schur_eigenvalues(&schur.t).into_iter().take(n).collect();

    let gain = |p: &DMatrix<f64>| neg.r_inv_mul(&(p * b + s).transpose());
    let mut k = gain(&p);
    let mut residual_norm = riccati_residual(a, b, q, s, r, &p)?.norm();

    // One Newton correction step: solve the closed-loop Lyapunov equation
    // for the residual and update P. Squares the residual when X1 was
    // mildly ill conditioned.
    let res_scale = residual_scale(a, b, q, &neg, &p);
    if residual_norm > 1e-12 * res_scale {
        let m_cl = a - b * &k;
        if let Ok(solver) = LyapunovSolver::new(&m_cl, tol) {
            let f = riccati_residual(a, b, q, s, r, &p)?;
            if let Ok(e) = solver.solve_transposed(&f) {
                let p_new = &p + &e;
                let new_res = riccati_residual(a, b, q, s, r, &p_new)?.norm();
                if new_res < residual_norm {
                    p = p_new;
                    symmetrize(&mut p);
                    k = gain(&p);
                    residual_norm = new_res;
                }
            }
        }
    }

    let bound = tol.riccati_res_tol * residual_scale(a, b, q, &neg, &p);
    if residual_norm > bound {
        return Err(EquationError::ResidualTooLarge { residual: residual_norm, bound });
    }

    Ok(RiccatiSolution { p, k, closed_loop_eigs, residual_norm, mode })
}

/// Residual scale `(1 + ||P||) * (||A|| + ||Q|| + ||R^{-1}|| ||B||^2)`.
fn residual_scale(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    neg: &NegDefR,
    p: &DMatrix<f64>,
) -> f64 {
    let m = b.ncols();
    let r_inv_norm = neg.r_inv_mul(&DMatrix::identity(m, m)).norm();
    (1.0 + p.norm()) * (a.norm() + q.norm() + r_inv_norm * b.norm() * b.norm()).max(1.0)
}
