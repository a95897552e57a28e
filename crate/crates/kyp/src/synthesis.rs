//! Robust state-feedback (robust LQR) synthesis front end.
//!
//! A plant with an uncertain channel (z, w) and quadratic multiplier
//! constraints on that channel leads, after eliminating the feedback gain,
//! to a KYP-SDP in standard form whose objective is `-trace P`. The
//! assembly here performs that elimination blockwise: the multiplier block
//! `[[Q(l), S(l)], [S(l)', R(l)]] = -L' D(l) L` with
//! `D(l) = blockdiag(Qw^{-1}, Rw^{-1}, M(l))` and the fixed layout matrix L,
//! so each coefficient of the assembled families comes from one coefficient
//! of the channel multiplier M alone.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{min_eig_sym, symmetric_part, AffineMatrixFamily, KypProblem, ModelError};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("weight matrix {0} is not positive definite")]
    WeightNotPositiveDefinite(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// State-space plant with an uncertainty channel:
/// `dx = A x + B1 u + B2 w`, `z = C x + D1 u + D2 w`.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
}

impl PlantModel {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Control input dimension.
    pub fn m(&self) -> usize {
        self.b1.ncols()
    }

    /// Uncertainty input dimension.
    pub fn d(&self) -> usize {
        self.b2.ncols()
    }

    /// Uncertainty output dimension.
    pub fn l(&self) -> usize {
        self.c.nrows()
    }

    pub fn check_dims(&self) -> Result<(), SynthesisError> {
        let n = self.n();
        let (m, d, l) = (self.m(), self.d(), self.l());
        let err = |msg: String| Err(SynthesisError::DimensionMismatch(msg));
        if self.a.ncols() != n {
            return err("A must be square".into());
        }
        if self.b1.nrows() != n || self.b2.nrows() != n {
            return err("B1 and B2 must have n rows".into());
        }
        if self.c.ncols() != n {
            return err("C must have n columns".into());
        }
        if self.d1.shape() != (l, m) {
            return err(format!("D1 has shape {:?}, expected ({l}, {m})", self.d1.shape()));
        }
        if self.d2.shape() != (l, d) {
            return err(format!("D2 has shape {:?}, expected ({l}, {d})", self.d2.shape()));
        }
        Ok(())
    }
}

/// A synthesis task: plant, LQR weights, the channel multiplier family
/// M(lambda) (size (l+d) with declared split) and the multiplier-positivity
/// family N(lambda).
#[derive(Debug, Clone)]
pub struct SynthesisSpec {
    pub plant: PlantModel,
    /// State weight, positive definite n x n.
    pub q_weight: DMatrix<f64>,
    /// Input weight, positive definite m x m.
    pub r_weight: DMatrix<f64>,
    /// Affine family for the 2x2-block channel multiplier M(lambda),
    /// symmetric of size (l + d).
    pub m_fam: AffineMatrixFamily,
    /// Block split (l, d) of the multiplier.
    pub m_split: (usize, usize),
    /// Multiplier-positivity family N(lambda).
    pub n_fam: AffineMatrixFamily,
}

/// Actuator benchmark: multiplicative uncertainty on every control input.
/// Sets C = 0, D1 = I, D2 = 0, B2 = B1 with one multiplier per input,
/// `M(l) = diag(gamma^2 l_1..l_m, -l_1..-l_m)` and `N(l) = diag(l)`; the
/// LQR weights default to identity. The admissible channel signals satisfy
/// `||w|| <= ||z|| / gamma`, so gamma scales inversely with the size of the
/// tolerated perturbation.
pub fn build_actuator_uncertainty(
    a: DMatrix<f64>,
    b1: DMatrix<f64>,
    gamma: f64,
) -> SynthesisSpec {
    let n = a.nrows();
    let m = b1.ncols();
    let plant = PlantModel {
        a,
        b2: b1.clone(),
        b1,
        c: DMatrix::zeros(m, n),
        d1: DMatrix::identity(m, m),
        d2: DMatrix::zeros(m, m),
    };
    let g2 = gamma * gamma;
    let m_coeffs: Vec<DMatrix<f64>> = (0..m)
        .map(|i| {
            let mut coeff = DMatrix::zeros(2 * m, 2 * m);
            coeff[(i, i)] = g2;
            coeff[(m + i, m + i)] = -1.0;
            coeff
        })
        .collect();
    let n_coeffs: Vec<DMatrix<f64>> = (0..m)
        .map(|i| {
            let mut coeff = DMatrix::zeros(m, m);
            coeff[(i, i)] = 1.0;
            coeff
        })
        .collect();
    SynthesisSpec {
        plant,
        q_weight: DMatrix::identity(n, n),
        r_weight: DMatrix::identity(m, m),
        m_fam: AffineMatrixFamily::new(DMatrix::zeros(2 * m, 2 * m), m_coeffs, true)
            .expect("multiplier family dimensions are consistent"),
        m_split: (m, m),
        n_fam: AffineMatrixFamily::new(DMatrix::zeros(m, m), n_coeffs, true)
            .expect("positivity family dimensions are consistent"),
    }
}

/// Multiplier admissibility margins at one lambda.
#[derive(Debug, Clone, Copy)]
pub struct MultiplierMargins {
    /// Minimum eigenvalue of `[I; D2'] M(l) [I; D2']` (must be positive).
    pub upper_min_eig: f64,
    /// Maximum eigenvalue of `M22(l)` (must be negative).
    pub m22_max_eig: f64,
}

impl MultiplierMargins {
    pub fn ok(&self) -> bool {
        self.upper_min_eig > 0.0 && self.m22_max_eig < 0.0
    }
}

/// Evaluate both multiplier admissibility conditions at `lambda`.
pub fn check_multiplier_conditions(
    spec: &SynthesisSpec,
    lambda: &DVector<f64>,
) -> Result<MultiplierMargins, SynthesisError> {
    let (l, d) = spec.m_split;
    let m_val = spec.m_fam.evaluate(lambda)?;
    if m_val.nrows() != l + d {
        return Err(SynthesisError::DimensionMismatch(format!(
            "multiplier is {}x{}, split says {}",
            m_val.nrows(),
            m_val.ncols(),
            l + d
        )));
    }
    // [I; D2']' M [I; D2'] over the (l, d) split.
    let mut stack = DMatrix::zeros(l + d, l);
    stack.view_mut((0, 0), (l, l)).copy_from(&DMatrix::identity(l, l));
    stack.view_mut((l, 0), (d, l)).copy_from(&spec.plant.d2.transpose());
    let upper = stack.transpose() * &m_val * &stack;
    let m22 = m_val.view((l, l), (d, d)).into_owned();
    Ok(MultiplierMargins {
        upper_min_eig: min_eig_sym(&upper),
        m22_max_eig: -min_eig_sym(&(-m22)),
    })
}

/// The fixed layout matrix L of the eliminated synthesis constraint, with
/// row blocks `[0, -I, 0]`, `[B1', 0, D1']`, `[0, 0, -I]`, `[B2', 0, D2']`
/// over column blocks (n, n, l).
fn layout_matrix(plant: &PlantModel) -> DMatrix<f64> {
    let (n, m, d, l) = (plant.n(), plant.m(), plant.d(), plant.l());
    let rows = n + m + l + d;
    let cols = 2 * n + l;
    let mut lm = DMatrix::zeros(rows, cols);
    // row block 1: [0, -I_n, 0]
    lm.view_mut((0, n), (n, n)).copy_from(&(-DMatrix::<f64>::identity(n, n)));
    // row block 2: [B1', 0, D1']
    lm.view_mut((n, 0), (m, n)).copy_from(&plant.b1.transpose());
    lm.view_mut((n, 2 * n), (m, l)).copy_from(&plant.d1.transpose());
    // row block 3: [0, 0, -I_l]
    lm.view_mut((n + m, 2 * n), (l, l)).copy_from(&(-DMatrix::<f64>::identity(l, l)));
    // row block 4: [B2', 0, D2']
    lm.view_mut((n + m + l, 0), (d, n)).copy_from(&plant.b2.transpose());
    lm.view_mut((n + m + l, 2 * n), (d, l)).copy_from(&plant.d2.transpose());
    lm
}

/// Dense reference for tests: `-L' blockdiag(Qw^{-1}, Rw^{-1}, M(lambda)) L`.
pub fn dense_multiplier_block(
    spec: &SynthesisSpec,
    lambda: &DVector<f64>,
) -> Result<DMatrix<f64>, SynthesisError> {
    let plant = &spec.plant;
    let (n, m, d, l) = (plant.n(), plant.m(), plant.d(), plant.l());
    let lm = layout_matrix(plant);
    let q_inv = spd_inverse(&spec.q_weight).ok_or(SynthesisError::WeightNotPositiveDefinite("Q"))?;
    let r_inv = spd_inverse(&spec.r_weight).ok_or(SynthesisError::WeightNotPositiveDefinite("R"))?;
    let m_val = spec.m_fam.evaluate(lambda)?;
    let mut dmat = DMatrix::zeros(n + m + l + d, n + m + l + d);
    dmat.view_mut((0, 0), (n, n)).copy_from(&q_inv);
    dmat.view_mut((n, n), (m, m)).copy_from(&r_inv);
    dmat.view_mut((n + m, n + m), (l + d, l + d)).copy_from(&m_val);
    Ok(-(lm.transpose() * dmat * lm))
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = symmetric_part(m).cholesky()?;
    let mut inv = chol.inverse();
    crate::model::symmetrize(&mut inv);
    Some(inv)
}

/// Assemble the standard-form KYP-SDP realizing the eliminated synthesis
/// constraint: `A_std = A'`, `B_std = [I_n, C']`, the multiplier block is
/// `-L' D(lambda) L` split into the Q/S/R families, `c = 0` and
/// `Sigma = I_n` so the objective equals `-trace P`. Each family
/// coefficient is assembled from the matching coefficient of M alone.
pub fn assemble_kyp_sdp(spec: &SynthesisSpec) -> Result<KypProblem, SynthesisError> {
    let plant = &spec.plant;
    plant.check_dims()?;
    let (n, m, d, l) = (plant.n(), plant.m(), plant.d(), plant.l());
    let (sl, sd) = spec.m_split;
    if (sl, sd) != (l, d) {
        return Err(SynthesisError::DimensionMismatch(format!(
            "multiplier split ({sl}, {sd}) does not match plant channel ({l}, {d})"
        )));
    }
    if spec.m_fam.rows() != l + d {
        return Err(SynthesisError::DimensionMismatch(format!(
            "multiplier family is {}x{}, expected {}",
            spec.m_fam.rows(),
            spec.m_fam.cols(),
            l + d
        )));
    }
    if spec.q_weight.shape() != (n, n) || spec.r_weight.shape() != (m, m) {
        return Err(SynthesisError::DimensionMismatch(
            "weight dimensions do not match the plant".into(),
        ));
    }
    let p = spec.m_fam.coeff_count();

    let lm = layout_matrix(plant);
    let q_inv = spd_inverse(&spec.q_weight).ok_or(SynthesisError::WeightNotPositiveDefinite("Q"))?;
    let r_inv = spd_inverse(&spec.r_weight).ok_or(SynthesisError::WeightNotPositiveDefinite("R"))?;

    // Base block: -L' blockdiag(Qw^{-1}, Rw^{-1}, M_0) L. Coefficient i:
    // -L_m' M_i L_m where L_m is the multiplier row block of L.
    let l_m = lm.view((n + m, 0), (l + d, 2 * n + l)).into_owned();
    let mut base = {
        let l_q = lm.view((0, 0), (n, 2 * n + l)).into_owned();
        let l_r = lm.view((n, 0), (m, 2 * n + l)).into_owned();
        let mut acc = l_q.transpose() * q_inv * l_q + l_r.transpose() * r_inv * l_r;
        acc += l_m.transpose() * spec.m_fam.base() * &l_m;
        -acc
    };
    crate::model::symmetrize(&mut base);
    let coeff_blocks: Vec<DMatrix<f64>> = (0..p)
        .map(|i| {
            let mut block = -(l_m.transpose() * spec.m_fam.coeff(i) * &l_m);
            crate::model::symmetrize(&mut block);
            block
        })
        .collect();

    // Split the (2n + l)-dimensional block into Q (n x n), S (n x (n + l)),
    // R ((n + l) x (n + l)).
    let m_std = n + l;
    let split = |big: &DMatrix<f64>| {
        let q = big.view((0, 0), (n, n)).into_owned();
        let s = big.view((0, n), (n, m_std)).into_owned();
        let r = big.view((n, n), (m_std, m_std)).into_owned();
        (q, s, r)
    };
    let (q0, s0, r0) = split(&base);
    let mut q_coeffs = Vec::with_capacity(p);
    let mut s_coeffs = Vec::with_capacity(p);
    let mut r_coeffs = Vec::with_capacity(p);
    for block in &coeff_blocks {
        let (qi, si, ri) = split(block);
        q_coeffs.push(qi);
        s_coeffs.push(si);
        r_coeffs.push(ri);
    }

    // A_std = A', B_std = [I_n, C'].
    let a_std = plant.a.transpose();
    let mut b_std = DMatrix::zeros(n, m_std);
    b_std.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    b_std.view_mut((0, n), (n, l)).copy_from(&plant.c.transpose());

    Ok(KypProblem::new(
        a_std,
        b_std,
        DVector::zeros(p),
        DMatrix::identity(n, n),
        AffineMatrixFamily::new(q0, q_coeffs, true)?,
        AffineMatrixFamily::new(s0, s_coeffs, false)?,
        AffineMatrixFamily::new(r0, r_coeffs, true)?,
        spec.n_fam.clone(),
    )?)
}

/// Spring-damper chain with `k` unit masses: positions then velocities,
/// unit springs coupling neighbours (the first mass anchored), dashpot 0.1
/// per mass and a force actuator on the last mass. Returns (A, B1) with
/// n = 2k states and one input.
pub fn generate_mass_spring_chain(k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    assert!(k >= 1, "chain needs at least one mass");
    let n = 2 * k;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..k {
        a[(i, k + i)] = 1.0;
    }
    // Tridiagonal stiffness: mass i couples to its neighbours; the first
    // spring ties mass 0 to the wall.
    for i in 0..k {
        let mut diag = 1.0; // spring to the previous mass (or wall)
        if i + 1 < k {
            diag += 1.0;
        }
        a[(k + i, i)] = -diag;
        if i + 1 < k {
            a[(k + i, i + 1)] = 1.0;
            a[(k + i + 1, i)] = 1.0;
        }
        a[(k + i, k + i)] = -0.1;
    }
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    (a, b)
}
