//! The Riccati solution pair, the gap matrix and their derivatives in the
//! multiplier vector.
//!
//! For fixed lambda in the solvable domain, both Riccati solutions exist and
//! the gap `Delta = P_+ - P_-` is positive definite. First and second
//! partial derivatives of each branch solve Lyapunov equations against the
//! same closed-loop matrix, so each branch factors its closed loop once and
//! reuses it for all p(p+3)/2 right-hand sides. Those solves are independent
//! and run through the parallel map.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::equations::{
    solve_riccati, EquationError, LyapunovSolver, RiccatiMode, RiccatiSolution,
};
use crate::model::{symmetric_part, symmetrize, KypProblem, ModelError};
use crate::par::try_map_indexed;
use crate::tol::Tolerances;

/// How to obtain the solution pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairStrategy {
    /// Solve the Riccati equation once for each branch.
    TwoSolves,
    /// Solve once for P_-, then recover the gap from one Lyapunov equation
    /// and set P_+ = P_- + Delta.
    #[default]
    LyapunovShortcut,
}

#[derive(Debug, Error)]
pub enum CalcError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error("gap matrix is not positive definite")]
    GapNotPositive,
}

impl CalcError {
    /// True when the failure certifies that lambda lies outside the
    /// solvable domain (rather than a numerical breakdown).
    pub fn is_out_of_domain(&self) -> bool {
        matches!(
            self,
            CalcError::Equation(EquationError::NotInDomain)
                | CalcError::Equation(EquationError::NotNegativeDefinite)
                | CalcError::GapNotPositive
        )
    }
}

/// Both Riccati solutions, the gap and the evaluated family values at one
/// multiplier vector.
#[derive(Debug, Clone)]
pub struct RiccatiPair {
    pub lambda: DVector<f64>,
    pub p_plus: DMatrix<f64>,
    pub p_minus: DMatrix<f64>,
    /// `Delta = P_+ - P_-`, symmetric positive definite on the domain.
    pub delta: DMatrix<f64>,
    pub k_plus: DMatrix<f64>,
    pub k_minus: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub n: DMatrix<f64>,
}

/// Symmetric p x p table of values stored for i <= j and mirrored on access.
#[derive(Debug, Clone)]
pub struct SymTable<T> {
    p: usize,
    data: Vec<T>,
}

impl<T> SymTable<T> {
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.p - i * (i + 1) / 2 + j
    }

    pub fn from_upper(p: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), p * (p + 1) / 2);
        Self { p, data }
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[self.idx(i, j)]
    }

    pub fn dim(&self) -> usize {
        self.p
    }
}

/// Upper-triangle index pairs (i, j) with i <= j, in storage order.
pub(crate) fn upper_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect()
}

/// First derivatives of both branches.
#[derive(Debug, Clone)]
pub struct FirstDerivatives {
    pub plus: Vec<DMatrix<f64>>,
    pub minus: Vec<DMatrix<f64>>,
}

/// Second derivatives of both branches.
#[derive(Debug, Clone)]
pub struct SecondDerivatives {
    pub plus: SymTable<DMatrix<f64>>,
    pub minus: SymTable<DMatrix<f64>>,
}

/// First and second derivatives of P_+, P_-, the gains and the gap.
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub dp_plus: Vec<DMatrix<f64>>,
    pub dp_minus: Vec<DMatrix<f64>>,
    pub dk_plus: Vec<DMatrix<f64>>,
    pub dk_minus: Vec<DMatrix<f64>>,
    pub d2p_plus: SymTable<DMatrix<f64>>,
    pub d2p_minus: SymTable<DMatrix<f64>>,
    pub ddelta: Vec<DMatrix<f64>>,
    pub d2delta: SymTable<DMatrix<f64>>,
}

/// Compute the solution pair at `lambda`.
pub fn compute_pair(
    prob: &KypProblem,
    lambda: &DVector<f64>,
    strategy: PairStrategy,
    tol: &Tolerances,
) -> Result<RiccatiPair, CalcError> {
    let q = prob.q_fam.evaluate(lambda)?;
    let s = prob.s_fam.evaluate(lambda)?;
    let r = prob.r_fam.evaluate(lambda)?;
    let n_mat = prob.n_fam.evaluate(lambda)?;

    let sol_minus =
        solve_riccati(&prob.a, &prob.b, &q, &s, &r, RiccatiMode::Stabilizing, tol)?;

    let (p_plus, k_plus, delta) = match strategy {
        PairStrategy::TwoSolves => {
            let sol_plus =
                solve_riccati(&prob.a, &prob.b, &q, &s, &r, RiccatiMode::AntiStabilizing, tol)?;
            let delta = symmetric_part(&(&sol_plus.p - &sol_minus.p));
            if delta.clone().cholesky().is_none() {
                return Err(CalcError::GapNotPositive);
            }
            (sol_plus.p, sol_plus.k, delta)
        }
        PairStrategy::LyapunovShortcut => {
            let delta = delta_via_lyapunov(&prob.a, &prob.b, &s, &r, &sol_minus, tol)?;
            let p_plus = symmetric_part(&(&sol_minus.p + &delta));
            let neg = crate::equations::NegDefR::new(&r)?;
            let k_plus = neg.r_inv_mul(&(&p_plus * &prob.b + &s).transpose());
            // Verify the shortcut's P_+ against the Riccati residual; fall
            // back to the direct second solve if the gap route degraded.
            let f_norm =
                crate::equations::riccati_residual(&prob.a, &prob.b, &q, &s, &r, &p_plus)?
                    .norm();
            let scale = (1.0 + p_plus.norm())
                * (prob.a.norm() + q.norm() + prob.b.norm() * prob.b.norm()).max(1.0);
            if f_norm > tol.riccati_res_tol * scale {
                let sol_plus = solve_riccati(
                    &prob.a,
                    &prob.b,
                    &q,
                    &s,
                    &r,
                    RiccatiMode::AntiStabilizing,
                    tol,
                )?;
                let delta = symmetric_part(&(&sol_plus.p - &sol_minus.p));
                if delta.clone().cholesky().is_none() {
                    return Err(CalcError::GapNotPositive);
                }
                (sol_plus.p, sol_plus.k, delta)
            } else {
                (p_plus, k_plus, delta)
            }
        }
    };

    Ok(RiccatiPair {
        lambda: lambda.clone(),
        p_plus,
        p_minus: sol_minus.p,
        delta,
        k_plus,
        k_minus: sol_minus.k,
        q,
        s,
        r,
        n: n_mat,
    })
}

/// Recover the gap to the second Riccati solution from one solution `p1`.
///
/// With `K1 = R^{-1}(S + P1 B)'` and `M = A - B K1`, the inverse gap
/// `Z = Y^{-1}` solves `M Z + Z M' = B R^{-1} B'`; the gap is `Y = Z^{-1}`.
/// Applied to the stabilizing solution this yields `Delta`.
pub fn delta_via_lyapunov(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    s: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p1: &RiccatiSolution,
    tol: &Tolerances,
) -> Result<DMatrix<f64>, CalcError> {
    let neg = crate::equations::NegDefR::new(r)?;
    let k1 = neg.r_inv_mul(&(&p1.p * b + s).transpose());
    let m_cl = a - b * k1;
    let solver = LyapunovSolver::new(&m_cl, tol)?;
    // M Z + Z M' + (-B R^{-1} B') = 0 with -B R^{-1} B' = B (-R)^{-1} B' >= 0.
    let c = neg.sandwich_neg_inv(b);
    let z = solver.solve_gramian(&c)?;

    let eigs = symmetric_part(&z).symmetric_eigenvalues();
    let z_min = eigs.iter().fold(f64::INFINITY, |acc, &v| acc.min(v));
    let z_max = eigs.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
    let cond = if z_min > 0.0 { z_max / z_min } else { f64::INFINITY };
    if !cond.is_finite() || cond > tol.y_cond_max {
        return Err(CalcError::Equation(EquationError::NearSingularY { cond }));
    }
    let chol = z.clone().cholesky().ok_or(CalcError::GapNotPositive)?;
    let mut y = chol.inverse();
    symmetrize(&mut y);
    Ok(y)
}

/// Right-hand side of the first-derivative Lyapunov equation for coordinate
/// `i`: `[I; -K]' [[Q_i, S_i], [S_i', R_i]] [I; -K]`.
fn first_derivative_rhs(prob: &KypProblem, k: &DMatrix<f64>, i: usize) -> DMatrix<f64> {
    let qi = prob.q_fam.coeff(i);
    let si = prob.s_fam.coeff(i);
    let ri = prob.r_fam.coeff(i);
    let sk = si * k;
    let mut c = qi - &sk - sk.transpose() + k.transpose() * ri * k;
    symmetrize(&mut c);
    c
}

/// Solve the p first-derivative Lyapunov equations for each branch:
/// `dP (A - BK) + (A - BK)' dP + [I; -K]' [[Q_i, S_i], [S_i', R_i]] [I; -K] = 0`.
pub fn first_derivatives(
    prob: &KypProblem,
    pair: &RiccatiPair,
    tol: &Tolerances,
) -> Result<FirstDerivatives, CalcError> {
    let p = prob.p();
    let branch = |k: &DMatrix<f64>| -> Result<Vec<DMatrix<f64>>, CalcError> {
        let m_cl = &prob.a - &prob.b * k;
        let solver = LyapunovSolver::new(&m_cl, tol)?;
        try_map_indexed(p, |i| {
            let c = first_derivative_rhs(prob, k, i);
            solver.solve_transposed(&c).map_err(CalcError::from)
        })
    };
    Ok(FirstDerivatives { plus: branch(&pair.k_plus)?, minus: branch(&pair.k_minus)? })
}

/// Gain derivatives `dK_i = R^{-1}(B' dP_i + S_i' - R_i K)`.
pub fn gain_derivatives(
    prob: &KypProblem,
    pair: &RiccatiPair,
    k: &DMatrix<f64>,
    dp: &[DMatrix<f64>],
) -> Result<Vec<DMatrix<f64>>, CalcError> {
    let neg = crate::equations::NegDefR::new(&pair.r)?;
    Ok(dp
        .iter()
        .enumerate()
        .map(|(i, dpi)| {
            let si = prob.s_fam.coeff(i);
            let ri = prob.r_fam.coeff(i);
            neg.r_inv_mul(&(prob.b.transpose() * dpi + si.transpose() - ri * k))
        })
        .collect())
}

/// Solve the p(p+1)/2 second-derivative Lyapunov equations per branch:
/// `(A - BK)' d2P + d2P (A - BK) - dK_j' R dK_i - dK_i' R dK_j = 0`.
pub fn second_derivatives(
    prob: &KypProblem,
    pair: &RiccatiPair,
    firsts: &FirstDerivatives,
    tol: &Tolerances,
) -> Result<SecondDerivatives, CalcError> {
    let p = prob.p();
    let pairs = upper_pairs(p);
    let branch = |k: &DMatrix<f64>,
                  dp: &[DMatrix<f64>]|
     -> Result<SymTable<DMatrix<f64>>, CalcError> {
        let dk = gain_derivatives(prob, pair, k, dp)?;
        let m_cl = &prob.a - &prob.b * k;
        let solver = LyapunovSolver::new(&m_cl, tol)?;
        let data = try_map_indexed(pairs.len(), |idx| {
            let (i, j) = pairs[idx];
            let cross = dk[j].transpose() * &pair.r * &dk[i];
            let mut c = -(&cross + cross.transpose());
            symmetrize(&mut c);
            solver.solve_transposed(&c).map_err(CalcError::from)
        })?;
        Ok(SymTable::from_upper(p, data))
    };
    Ok(SecondDerivatives {
        plus: branch(&pair.k_plus, &firsts.plus)?,
        minus: branch(&pair.k_minus, &firsts.minus)?,
    })
}

/// Compute the full derivative bundle at one iterate.
pub fn derivative_bundle(
    prob: &KypProblem,
    pair: &RiccatiPair,
    tol: &Tolerances,
) -> Result<DerivativeBundle, CalcError> {
    let p = prob.p();
    let firsts = first_derivatives(prob, pair, tol)?;
    let seconds = second_derivatives(prob, pair, &firsts, tol)?;
    let dk_plus = gain_derivatives(prob, pair, &pair.k_plus, &firsts.plus)?;
    let dk_minus = gain_derivatives(prob, pair, &pair.k_minus, &firsts.minus)?;
    let ddelta: Vec<DMatrix<f64>> =
        (0..p).map(|i| &firsts.plus[i] - &firsts.minus[i]).collect();
    let d2_data: Vec<DMatrix<f64>> = upper_pairs(p)
        .into_iter()
        .map(|(i, j)| seconds.plus.get(i, j) - seconds.minus.get(i, j))
        .collect();
    Ok(DerivativeBundle {
        dp_plus: firsts.plus,
        dp_minus: firsts.minus,
        dk_plus,
        dk_minus,
        d2p_plus: seconds.plus,
        d2p_minus: seconds.minus,
        ddelta,
        d2delta: SymTable::from_upper(p, d2_data),
    })
}
