//! Bartels–Stewart solver for continuous-time Lyapunov equations.
//!
//! One Schur decomposition of the coefficient matrix is reused across many
//! right-hand sides; the derivative computations solve p(p+3)/2 equations
//! against the same closed-loop matrix, so the factorization cache matters.

use nalgebra::DMatrix;

use super::schur::{real_schur, schur_eigenvalues, RealSchur};
use super::EquationError;
use crate::model::symmetrize;
use crate::tol::Tolerances;

/// Cached Schur factorization of `M`, able to solve both orientations
/// `M'X + XM + C = 0` (via [`LyapunovSolver::solve_transposed`]) and
/// `MX + XM' + C = 0` (via [`LyapunovSolver::solve_gramian`]).
pub struct LyapunovSolver {
    schur: RealSchur,
    blocks: Vec<(usize, usize)>,
    m_norm: f64,
}

impl LyapunovSolver {
    /// Factor `M` and verify the unique-solvability condition: no eigenvalue
    /// pair of `M` may satisfy `|mu_i + conj(mu_j)| <= axis margin`.
    pub fn new(m: &DMatrix<f64>, tol: &Tolerances) -> Result<Self, EquationError> {
        if m.nrows() != m.ncols() {
            return Err(EquationError::DimensionMismatch(format!(
                "Lyapunov coefficient must be square, got {:?}",
                m.shape()
            )));
        }
        let m_norm = m.norm();
        let schur = real_schur(m)?;
        let eigs = schur_eigenvalues(&schur.t);
        let margin = tol.axis_margin(m_norm);
        for (i, ei) in eigs.iter().enumerate() {
            for ej in eigs.iter().skip(i) {
                if (ei + ej.conj()).norm() <= margin {
                    return Err(EquationError::SingularPencil);
                }
            }
        }
        let blocks = block_layout(&schur.t);
        Ok(Self { schur, blocks, m_norm })
    }

    pub fn coefficient_norm(&self) -> f64 {
        self.m_norm
    }

    /// Solve `M'X + XM + C = 0` for symmetric `C`; the result is exactly
    /// symmetrized.
    pub fn solve_transposed(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>, EquationError> {
        self.solve_impl(c, false)
    }

    /// Solve `MX + XM' + C = 0` for symmetric `C`; the result is exactly
    /// symmetrized.
    pub fn solve_gramian(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>, EquationError> {
        self.solve_impl(c, true)
    }

    fn solve_impl(&self, c: &DMatrix<f64>, gramian: bool) -> Result<DMatrix<f64>, EquationError> {
        let n = self.schur.dim();
        if c.shape() != (n, n) {
            return Err(EquationError::DimensionMismatch(format!(
                "right-hand side has shape {:?}, expected ({n}, {n})",
                c.shape()
            )));
        }
        let q = &self.schur.q;
        let t = &self.schur.t;
        let c_rot = q.transpose() * c * q;
        let nb = self.blocks.len();
        let mut y = DMatrix::zeros(n, n);

        // Block back-substitution over the quasi-triangular factor. For the
        // transposed orientation (T'Y + YT = -C) the recursion runs forward;
        // for the Gramian orientation (TY + YT' = -C) it runs backward.
        let order: Vec<usize> = if gramian { (0..nb).rev().collect() } else { (0..nb).collect() };
        for &bj in &order {
            for &bi in &order {
                let (is, isz) = self.blocks[bi];
                let (js, jsz) = self.blocks[bj];
                let mut rhs = -c_rot.view((is, js), (isz, jsz)).into_owned();
                if gramian {
                    // rhs -= sum_{k > i} T_ik Y_kj  + sum_{k > j} Y_ik T_jk'
                    for &bk in self.blocks[bi + 1..].iter() {
                        let (ks, ksz) = bk;
                        let t_ik = t.view((is, ks), (isz, ksz));
                        let y_kj = y.view((ks, js), (ksz, jsz));
                        rhs -= t_ik * y_kj;
                    }
                    for &bk in self.blocks[bj + 1..].iter() {
                        let (ks, ksz) = bk;
                        let y_ik = y.view((is, ks), (isz, ksz));
                        let t_jk = t.view((js, ks), (jsz, ksz));
                        rhs -= y_ik * t_jk.transpose();
                    }
                } else {
                    // rhs -= sum_{k < i} T_ki' Y_kj + sum_{k < j} Y_ik T_kj
                    for &bk in self.blocks[..bi].iter() {
                        let (ks, ksz) = bk;
                        let t_ki = t.view((ks, is), (ksz, isz));
                        let y_kj = y.view((ks, js), (ksz, jsz));
                        rhs += -(t_ki.transpose() * y_kj);
                    }
                    for &bk in self.blocks[..bj].iter() {
                        let (ks, ksz) = bk;
                        let y_ik = y.view((is, ks), (isz, ksz));
                        let t_kj = t.view((ks, js), (ksz, jsz));
                        rhs += -(y_ik * t_kj);
                    }
                }
                let t_ii = t.view((is, is), (isz, isz)).into_owned();
                let t_jj = t.view((js, js), (jsz, jsz)).into_owned();
                let z = solve_small_sylvester(&t_ii, &t_jj, &rhs, gramian)?;
                y.view_mut((is, js), (isz, jsz)).copy_from(&z);
            }
        }

        let mut x = q * y * q.transpose();
        symmetrize(&mut x);
        Ok(x)
    }
}

fn block_layout(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Solve the at-most-2x2 block equation: `A'Z + ZB = R` (transposed
/// orientation) or `AZ + ZB' = R` (Gramian orientation) via the Kronecker
/// system of order `<= 4`.
fn solve_small_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    gramian: bool,
) -> Result<DMatrix<f64>, EquationError> {
    let p = a.nrows();
    let q = b.nrows();
    let mut sys = DMatrix::zeros(p * q, p * q);
    // vec(A'Z) = (I (x) A') vec Z ; vec(ZB) = (B' (x) I) vec Z
    // vec(AZ)  = (I (x) A) vec Z  ; vec(ZB') = (B (x) I) vec Z
    for col_j in 0..q {
        for col_i in 0..p {
            let col = col_j * p + col_i;
            for row_i in 0..p {
                let v = if gramian { a[(row_i, col_i)] } else { a[(col_i, row_i)] };
                sys[(col_j * p + row_i, col)] += v;
            }
            for row_j in 0..q {
                let v = if gramian { b[(row_j, col_j)] } else { b[(col_j, row_j)] };
                sys[(row_j * p + col_i, col)] += v;
            }
        }
    }
    let rhs_vec = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let lu = sys.full_piv_lu();
    let z = lu.solve(&rhs_vec).ok_or(EquationError::SingularPencil)?;
    Ok(DMatrix::from_column_slice(p, q, z.as_slice()))
}

/// Solve `M'X + XM + C = 0` with a residual guarantee
/// `||M'X + XM + C||_F <= lyap_res_tol * (1 + ||X||_F) * ||M||_F`.
pub fn solve_lyapunov(
    m: &DMatrix<f64>,
    c: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<DMatrix<f64>, EquationError> {
    let solver = LyapunovSolver::new(m, tol)?;
    let x = solver.solve_transposed(c)?;
    let residual = (m.transpose() * &x + &x * m + c).norm();
    let bound = tol.lyap_res_tol * (1.0 + x.norm()) * solver.coefficient_norm().max(1.0);
    if residual > bound {
        return Err(EquationError::ResidualTooLarge { residual, bound });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: solve the symmetrized n(n+1)/2-dimensional linear
    /// system for M'X + XM + C = 0 directly.
    fn lyapunov_bruteforce(m: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let unknowns: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let dim = unknowns.len();
        let mut sys = DMatrix::zeros(dim, dim);
        let mut rhs = nalgebra::DVector::zeros(dim);
        for (row, &(i, j)) in unknowns.iter().enumerate() {
            // entry (i, j) of M'X + XM: sum_k M_ki X_kj + X_ik M_kj
            for k in 0..n {
                for (col, &(u, v)) in unknowns.iter().enumerate() {
                    let mut coef = 0.0;
                    // X_kj with (k, j) matching (u, v) as unordered pair
                    if (k.min(j), k.max(j)) == (u, v) {
                        coef += m[(k, i)];
                    }
                    if (i.min(k), i.max(k)) == (u, v) {
                        coef += m[(k, j)];
                    }
                    sys[(row, col)] += coef;
                }
            }
            rhs[row] = -c[(i, j)];
        }
        let sol = sys.full_piv_lu().solve(&rhs).expect("oracle system solvable");
        let mut x = DMatrix::zeros(n, n);
        for (col, &(u, v)) in unknowns.iter().enumerate() {
            x[(u, v)] = sol[col];
            x[(v, u)] = sol[col];
        }
        x
    }

    #[test]
    fn diagonal_decoupled_case() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = solve_lyapunov(&m, &c, &Tolerances::default()).unwrap();
        assert_abs_diff_eq!(x, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let m = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let c = DMatrix::zeros(1, 1);
        let x = solve_lyapunov(&m, &c, &Tolerances::default()).unwrap();
        assert_eq!(x[(0, 0)], 0.0);
    }

    #[test]
    fn two_by_two_matches_hand_solution() {
        // M'X + XM + I = 0 with M = [[0, 1], [-2, -3]] has the closed-form
        // solution [[5/4, 1/4], [1/4, 1/4]] (from the 3-unknown linear system).
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let c = DMatrix::identity(2, 2);
        let x = solve_lyapunov(&m, &c, &Tolerances::default()).unwrap();
        let oracle = lyapunov_bruteforce(&m, &c);
        let hand = DMatrix::from_row_slice(2, 2, &[1.25, 0.25, 0.25, 0.25]);
        assert_abs_diff_eq!(oracle, hand, epsilon = 1e-12);
        assert_abs_diff_eq!(x, hand, epsilon = 1e-10);
    }

    #[test]
    fn matches_bruteforce_oracle_on_random_stable_instances() {
        let tol = Tolerances::default();
        for seed in 0..12u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (seed as usize % 5); // up to 6
            let w = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            // shift to make eigenvalue sums safely nonzero
            let m = w - DMatrix::identity(n, n) * 2.5;
            let cs = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let c = &cs + cs.transpose();
            let x = solve_lyapunov(&m, &c, &tol).unwrap();
            let oracle = lyapunov_bruteforce(&m, &c);
            let diff = (&x - &oracle).amax();
            assert!(diff <= 1e-8, "seed {seed}: entrywise gap {diff:.3e}");
        }
    }

    #[test]
    fn gramian_orientation_solves_its_equation() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 5;
        let w = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let m = w - DMatrix::identity(n, n) * 3.0;
        let cs = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let c = &cs + cs.transpose();
        let solver = LyapunovSolver::new(&m, &tol).unwrap();
        let x = solver.solve_gramian(&c).unwrap();
        let resid = (&m * &x + &x * m.transpose() + &c).norm();
        assert!(resid < 1e-10 * (1.0 + x.norm()) * m.norm(), "residual {resid:.3e}");
    }

    #[test]
    fn mirrored_spectrum_raises_singular_pencil() {
        // eigenvalues {-1, 1}: mu_1 + mu_2 = 0
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let c = DMatrix::identity(2, 2);
        match solve_lyapunov(&m, &c, &Tolerances::default()) {
            Err(EquationError::SingularPencil) => {}
            other => panic!("expected SingularPencil, got {other:?}"),
        }
    }
}
