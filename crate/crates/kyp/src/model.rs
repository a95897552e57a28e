//! Problem data model: affine matrix families, the KYP-SDP standard form
//! and instance validation.
//!
//! A problem instance consists of the system pair (A, B), the cost data
//! (c, Sigma) and four affine matrix families Q, S, R, N in the multiplier
//! vector lambda. All storage is dense; instances are immutable once built.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::tol::Tolerances;

/// Symmetrize in place as (H + H^T) / 2.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Symmetrized copy.
pub(crate) fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = m.clone();
    symmetrize(&mut s);
    s
}

/// Largest absolute deviation from symmetry, `max_ij |H_ij - H_ji|`.
pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Minimum eigenvalue of a symmetric matrix.
pub(crate) fn min_eig_sym(m: &DMatrix<f64>) -> f64 {
    symmetric_part(m)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Maximum eigenvalue of a symmetric matrix.
pub(crate) fn max_eig_sym(m: &DMatrix<f64>) -> f64 {
    symmetric_part(m)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
}

/// Construction errors for model types. Validation findings (soft failures)
/// are reported through [`ValidationReport`] instead.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// An affine matrix-valued function `H(lambda) = H_0 + sum_i lambda_i H_i`.
#[derive(Debug, Clone)]
pub struct AffineMatrixFamily {
    base: DMatrix<f64>,
    coeffs: Vec<DMatrix<f64>>,
    symmetric: bool,
}

impl AffineMatrixFamily {
    /// Build a family from a base matrix and coefficient matrices. All
    /// coefficients must share the base dimensions.
    pub fn new(
        base: DMatrix<f64>,
        coeffs: Vec<DMatrix<f64>>,
        symmetric: bool,
    ) -> Result<Self, ModelError> {
        for (i, c) in coeffs.iter().enumerate() {
            if c.shape() != base.shape() {
                return Err(ModelError::DimensionMismatch(format!(
                    "coefficient {i} has shape {:?}, base has {:?}",
                    c.shape(),
                    base.shape()
                )));
            }
        }
        Ok(Self { base, coeffs, symmetric })
    }

    /// Constant family with no lambda dependence.
    pub fn constant(base: DMatrix<f64>, p: usize, symmetric: bool) -> Self {
        let coeffs = vec![DMatrix::zeros(base.nrows(), base.ncols()); p];
        Self { base, coeffs, symmetric }
    }

    pub fn rows(&self) -> usize {
        self.base.nrows()
    }

    pub fn cols(&self) -> usize {
        self.base.ncols()
    }

    /// Number of coefficient matrices (the multiplier count p).
    pub fn coeff_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn base(&self) -> &DMatrix<f64> {
        &self.base
    }

    pub fn coeff(&self, i: usize) -> &DMatrix<f64> {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Evaluate `H_0 + sum_i lambda_i H_i`. Symmetric families return an
    /// exactly symmetrized result so downstream eigenvalue routines may
    /// assume symmetry.
    pub fn evaluate(&self, lambda: &DVector<f64>) -> Result<DMatrix<f64>, ModelError> {
        if lambda.len() != self.coeffs.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "lambda has length {}, family has {} coefficients",
                lambda.len(),
                self.coeffs.len()
            )));
        }
        let mut out = self.base.clone();
        for (li, c) in lambda.iter().zip(self.coeffs.iter()) {
            out.axpy_from(*li, c);
        }
        if self.symmetric {
            symmetrize(&mut out);
        }
        Ok(out)
    }
}

// nalgebra has no in-place axpy for matrices of dynamic shape; tiny helper.
trait AxpyFrom {
    fn axpy_from(&mut self, scale: f64, other: &DMatrix<f64>);
}

impl AxpyFrom for DMatrix<f64> {
    fn axpy_from(&mut self, scale: f64, other: &DMatrix<f64>) {
        self.zip_apply(other, |a, b| *a += scale * b);
    }
}

/// A KYP-SDP instance in standard form.
///
/// The decision variables are `lambda` (length p) and, implicitly, the
/// Lyapunov matrix eliminated through the Riccati substitution. `Sigma`
/// weights the `-trace(Sigma P)` part of the objective `c'lambda -
/// trace(Sigma P)`.
#[derive(Debug, Clone)]
pub struct KypProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub q_fam: AffineMatrixFamily,
    pub s_fam: AffineMatrixFamily,
    pub r_fam: AffineMatrixFamily,
    pub n_fam: AffineMatrixFamily,
}

impl KypProblem {
    /// Build an instance, enforcing the hard dimensional contract:
    /// A is n x n, B is n x m, Q is n x n, S is n x m, R is m x m,
    /// N is r x r, c has length p and every family carries p coefficients.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DVector<f64>,
        sigma: DMatrix<f64>,
        q_fam: AffineMatrixFamily,
        s_fam: AffineMatrixFamily,
        r_fam: AffineMatrixFamily,
        n_fam: AffineMatrixFamily,
    ) -> Result<Self, ModelError> {
        let n = a.nrows();
        let m = b.ncols();
        let p = c.len();
        let err = |msg: String| Err(ModelError::DimensionMismatch(msg));
        if a.ncols() != n {
            return err(format!("A must be square, got {:?}", a.shape()));
        }
        if b.nrows() != n {
            return err(format!("B has {} rows, expected {n}", b.nrows()));
        }
        if sigma.shape() != (n, n) {
            return err(format!("Sigma has shape {:?}, expected ({n}, {n})", sigma.shape()));
        }
        if q_fam.rows() != n || q_fam.cols() != n {
            return err(format!("Q family is {}x{}, expected {n}x{n}", q_fam.rows(), q_fam.cols()));
        }
        if s_fam.rows() != n || s_fam.cols() != m {
            return err(format!("S family is {}x{}, expected {n}x{m}", s_fam.rows(), s_fam.cols()));
        }
        if r_fam.rows() != m || r_fam.cols() != m {
            return err(format!("R family is {}x{}, expected {m}x{m}", r_fam.rows(), r_fam.cols()));
        }
        if n_fam.rows() != n_fam.cols() {
            return err(format!("N family must be square, got {}x{}", n_fam.rows(), n_fam.cols()));
        }
        for (name, fam) in [("Q", &q_fam), ("S", &s_fam), ("R", &r_fam), ("N", &n_fam)] {
            if fam.coeff_count() != p {
                return err(format!(
                    "{name} family has {} coefficients, expected p = {p}",
                    fam.coeff_count()
                ));
            }
        }
        Ok(Self { a, b, c, sigma, q_fam, s_fam, r_fam, n_fam })
    }

    /// State dimension n.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension m.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Multiplier count p.
    pub fn p(&self) -> usize {
        self.c.len()
    }

    /// Dimension of the multiplier-positivity block N.
    pub fn r_dim(&self) -> usize {
        self.n_fam.rows()
    }
}

/// Severity of a validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// One validation finding, identified by a stable machine-readable code.
#[derive(Debug, Clone)]
pub struct Finding {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
}

/// Outcome of [`validate_problem`]. `ok` holds exactly when no finding has
/// error severity.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    fn from_findings(findings: Vec<Finding>) -> Self {
        let ok = findings.iter().all(|f| f.severity != Severity::Error);
        Self { ok, findings }
    }
}

/// Validate an instance: dimensional consistency, symmetry of flagged
/// families, positive semidefiniteness of Sigma and controllability of
/// (A, B). All failures are reported as findings; nothing panics.
pub fn validate_problem(prob: &KypProblem, tol: &Tolerances) -> ValidationReport {
    let mut findings = Vec::new();
    let mut error = |code: &'static str, message: String| {
        findings.push(Finding { severity: Severity::Error, code, message });
    };

    let (n, m, p) = (prob.n(), prob.m(), prob.p());

    if prob.b.nrows() != n {
        error("dims", format!("B has {} rows, expected {n}", prob.b.nrows()));
    }
    if prob.sigma.shape() != (n, n) {
        error("dims", format!("Sigma has shape {:?}, expected ({n}, {n})", prob.sigma.shape()));
    }
    for (name, fam, rows, cols) in [
        ("Q", &prob.q_fam, n, n),
        ("S", &prob.s_fam, n, m),
        ("R", &prob.r_fam, m, m),
        ("N", &prob.n_fam, prob.r_dim(), prob.r_dim()),
    ] {
        if fam.rows() != rows || fam.cols() != cols {
            error(
                "dims",
                format!("{name} family is {}x{}, expected {rows}x{cols}", fam.rows(), fam.cols()),
            );
        }
        if fam.coeff_count() != p {
            error(
                "family_count",
                format!("{name} family has {} coefficients, expected p = {p}", fam.coeff_count()),
            );
        }
    }

    // Symmetry of flagged families, member by member.
    for (name, fam) in [("Q", &prob.q_fam), ("R", &prob.r_fam), ("N", &prob.n_fam)] {
        if !fam.is_symmetric() {
            error("symmetry_flag", format!("{name} family must be flagged symmetric"));
            continue;
        }
        let mut members: Vec<(String, &DMatrix<f64>)> = vec![(format!("{name} base"), fam.base())];
        for i in 0..fam.coeff_count() {
            members.push((format!("{name} coefficient {i}"), fam.coeff(i)));
        }
        for (which, mat) in members {
            let bound = tol.sym_tol * (1.0 + max_abs(mat));
            if max_asymmetry(mat) > bound {
                error("not_symmetric", format!("{which} is not symmetric within tolerance"));
            }
        }
    }

    // Sigma: symmetric positive semidefinite.
    let sig_bound = tol.sym_tol * (1.0 + max_abs(&prob.sigma));
    if max_asymmetry(&prob.sigma) > sig_bound {
        error("sigma_symmetry", "Sigma is not symmetric within tolerance".into());
    } else {
        let min_eig = min_eig_sym(&prob.sigma);
        let psd_bound = tol.psd_tol * (1.0 + prob.sigma.norm());
        if min_eig < -psd_bound {
            error("sigma_not_psd", format!("Sigma not PSD: minimum eigenvalue {min_eig:.3e}"));
        }
    }

    // Controllability of (A, B) by SVD rank of [B, AB, ..., A^{n-1}B].
    if prob.a.ncols() == n
        && prob.b.nrows() == n
        && n > 0
        && m > 0
        && !is_controllable(&prob.a, &prob.b, tol)
    {
        error("uncontrollable", "(A, B) fails the controllability rank test".into());
    }

    ValidationReport::from_findings(findings)
}

/// Rank test on the controllability matrix with relative singular-value
/// threshold `n * sigma_max * rank_tol`.
pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &Tolerances) -> bool {
    let n = a.nrows();
    let m = b.ncols();
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&block);
        if k + 1 < n {
            block = a * block;
        }
    }
    let svals = ctrb.singular_values();
    let sigma_max = svals.iter().fold(0.0f64, |acc, &v| acc.max(v));
    if sigma_max == 0.0 {
        return false;
    }
    let threshold = n as f64 * sigma_max * tol.rank_tol;
    let rank = svals.iter().filter(|&&s| s > threshold).count();
    rank == n
}
