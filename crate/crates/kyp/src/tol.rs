//! Numerical tolerances shared across the solver.
//!
//! Every threshold used by the matrix-equation kernels, the barrier method
//! and the verification oracles lives here, so there is a single place to
//! audit the accuracy contract.

/// Tolerance bundle threaded through all numerical routines.
///
/// Entries documented as "factor" are multiplied by a problem-dependent
/// scale (typically a Frobenius norm) before use.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Relative symmetry slack: a matrix H counts as symmetric when
    /// `max|H - H^T| <= sym_tol * (1 + max|H|)`.
    pub sym_tol: f64,
    /// Factor for the positive-semidefiniteness check of Sigma:
    /// minimum eigenvalue must be `>= -psd_tol * (1 + ||Sigma||)`.
    pub psd_tol: f64,
    /// Relative singular-value threshold for the controllability rank test.
    pub rank_tol: f64,
    /// Factor for the imaginary-axis exclusion zone. An eigenvalue with
    /// `|Re| <= axis_tol * max(1, ||M||_F)` counts as sitting on the axis.
    pub axis_tol: f64,
    /// Relative residual bound for Riccati solutions.
    pub riccati_res_tol: f64,
    /// Relative residual bound for Lyapunov solutions.
    pub lyap_res_tol: f64,
    /// Maximum admissible condition number of the invariant-subspace
    /// top block X1 when forming P = X2 X1^{-1}.
    pub x1_cond_max: f64,
    /// Maximum admissible condition number of the inverse gap Z = Y^{-1}
    /// before inversion in the one-solve gap route.
    pub y_cond_max: f64,
    /// Slack for eigenvalue-order comparisons (P_- <= P <= P_+ checks).
    pub order_tol: f64,
    /// Factor for the "Riccati solution sits on the LMI boundary" band.
    pub lmi_boundary_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sym_tol: 1e-8,
            psd_tol: 1e-10,
            rank_tol: 1e-10,
            axis_tol: 1e-8,
            riccati_res_tol: 1e-8,
            lyap_res_tol: 1e-8,
            x1_cond_max: 1e12,
            y_cond_max: 1e12,
            order_tol: 1e-8,
            lmi_boundary_tol: 1e-7,
        }
    }
}

impl Tolerances {
    /// Axis exclusion half-width for a matrix of Frobenius norm `norm`.
    pub fn axis_margin(&self, norm: f64) -> f64 {
        self.axis_tol * norm.max(1.0)
    }
}
