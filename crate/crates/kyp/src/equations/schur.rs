//! Real Schur decomposition with eigenvalue reordering.
//!
//! nalgebra provides the unordered real Schur form; the reordering (moving a
//! selected set of eigenvalues into the leading diagonal blocks through a
//! sequence of orthogonal swaps of adjacent 1x1/2x2 blocks) is implemented
//! here. The swap kernel solves a small Sylvester equation per exchange and
//! re-orthogonalizes through a dense QR of at most four columns.

use nalgebra::{Complex, DMatrix};

use super::EquationError;

/// A real Schur decomposition `A = Q T Q^T` with orthogonal `Q` and real
/// quasi-upper-triangular `T` (diagonal blocks of order 1 or 2, each 2x2
/// block carrying a complex-conjugate eigenvalue pair).
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

impl RealSchur {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }
}

/// Compute the real Schur form of `m`. 2x2 diagonal blocks with real
/// eigenvalues are split into 1x1 blocks so every remaining 2x2 block is a
/// genuine complex-conjugate pair.
pub fn real_schur(m: &DMatrix<f64>) -> Result<RealSchur, EquationError> {
    if m.nrows() != m.ncols() {
        return Err(EquationError::DimensionMismatch(format!(
            "Schur input must be square, got {:?}",
            m.shape()
        )));
    }
    if m.nrows() == 0 {
        return Ok(RealSchur { q: DMatrix::zeros(0, 0), t: DMatrix::zeros(0, 0) });
    }
    // A finite iteration budget: unlimited iterations can spin forever on
    // matrices where the eps-strict deflation test never fires.
    let max_iters = 100 * m.nrows().max(8);
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, max_iters)
        .ok_or(EquationError::SchurFailed)?;
    let (q, t) = schur.unpack();
    let mut out = RealSchur { q, t };
    clean_subdiagonal(&mut out.t);
    split_real_blocks(&mut out)?;
    Ok(out)
}

/// Zero out numerically negligible subdiagonal entries so the block scan
/// sees an unambiguous structure.
fn clean_subdiagonal(t: &mut DMatrix<f64>) {
    let n = t.nrows();
    for i in 0..n.saturating_sub(1) {
        let sub = t[(i + 1, i)];
        if sub != 0.0 {
            let local = t[(i, i)].abs() + t[(i + 1, i + 1)].abs();
            if sub.abs() <= f64::EPSILON * local {
                t[(i + 1, i)] = 0.0;
            }
        }
    }
}

/// Diagonal block layout of a quasi-triangular matrix.
fn block_starts(t: &DMatrix<f64>) -> Result<Vec<(usize, usize)>, EquationError> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            if i + 2 < n && t[(i + 2, i + 1)] != 0.0 {
                return Err(EquationError::ReorderFailed(
                    "three consecutive coupled rows in quasi-triangular factor".into(),
                ));
            }
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    Ok(blocks)
}

/// Eigenvalues of one 1x1 or 2x2 diagonal block starting at `start`.
fn block_eigenvalues(t: &DMatrix<f64>, start: usize, size: usize) -> (Complex<f64>, Option<Complex<f64>>) {
    if size == 1 {
        return (Complex::new(t[(start, start)], 0.0), None);
    }
    let a = t[(start, start)];
    let b = t[(start, start + 1)];
    let c = t[(start + 1, start)];
    let d = t[(start + 1, start + 1)];
    let mid = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc < 0.0 {
        let im = (-disc).sqrt();
        (Complex::new(mid, im), Some(Complex::new(mid, -im)))
    } else {
        let s = disc.sqrt();
        let mu1 = if mid >= 0.0 { mid + s } else { mid - s };
        let mu2 = if mu1 != 0.0 { (a * d - b * c) / mu1 } else { mid - s };
        (Complex::new(mu1, 0.0), Some(Complex::new(mu2, 0.0)))
    }
}

/// All eigenvalues of a quasi-triangular factor, in diagonal order.
pub fn schur_eigenvalues(t: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut eigs = Vec::with_capacity(t.nrows());
    if let Ok(blocks) = block_starts(t) {
        for (start, size) in blocks {
            let (e1, e2) = block_eigenvalues(t, start, size);
            eigs.push(e1);
            if let Some(e2) = e2 {
                eigs.push(e2);
            }
        }
    }
    eigs
}

/// Apply the orthogonal transform `g` (w x w) acting on rows/columns
/// `i..i+w`: `T <- G^T T G`, `Q <- Q G`.
fn apply_window_transform(schur: &mut RealSchur, i: usize, g: &DMatrix<f64>) {
    let n = schur.dim();
    let w = g.nrows();
    // Rows i..i+w of T, columns i..n.
    let rows = schur.t.view((i, i), (w, n - i)).into_owned();
    schur.t.view_mut((i, i), (w, n - i)).copy_from(&(g.transpose() * rows));
    // Columns i..i+w of T, rows 0..i+w.
    let cols = schur.t.view((0, i), (i + w, w)).into_owned();
    schur.t.view_mut((0, i), (i + w, w)).copy_from(&(cols * g));
    // Accumulate into Q.
    let qcols = schur.q.view((0, i), (n, w)).into_owned();
    schur.q.view_mut((0, i), (n, w)).copy_from(&(qcols * g));
}

/// Split every 2x2 diagonal block whose eigenvalues are real into two 1x1
/// blocks via a Givens rotation built from an eigenvector.
fn split_real_blocks(schur: &mut RealSchur) -> Result<(), EquationError> {
    let blocks = block_starts(&schur.t)?;
    for (start, size) in blocks {
        if size != 2 {
            continue;
        }
        let a = schur.t[(start, start)];
        let b = schur.t[(start, start + 1)];
        let c = schur.t[(start + 1, start)];
        let d = schur.t[(start + 1, start + 1)];
        let disc = 0.25 * (a - d) * (a - d) + b * c;
        if disc < 0.0 {
            continue;
        }
        let (mu, _) = block_eigenvalues(&schur.t, start, 2);
        let mu = mu.re;
        // Eigenvector of [[a, b], [c, d]] for mu; pick the better-scaled form.
        let v_a = (b, mu - a);
        let v_b = (mu - d, c);
        let (vx, vy) = if v_a.0.hypot(v_a.1) >= v_b.0.hypot(v_b.1) { v_a } else { v_b };
        let norm = vx.hypot(vy);
        if norm == 0.0 {
            // Block is already effectively diagonal.
            schur.t[(start + 1, start)] = 0.0;
            continue;
        }
        let (cs, sn) = (vx / norm, vy / norm);
        let g = DMatrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
        apply_window_transform(schur, start, &g);
        schur.t[(start + 1, start)] = 0.0;
    }
    Ok(())
}

/// Kronecker product, column-major convention matching `vec`.
fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

fn vec_of(m: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

/// Swap the adjacent diagonal blocks at `(i, p)` and `(i + p, q)` so the
/// trailing block's eigenvalues move to the leading position.
fn swap_adjacent_blocks(
    schur: &mut RealSchur,
    i: usize,
    p: usize,
    q: usize,
) -> Result<(), EquationError> {
    let w = p + q;
    let t11 = schur.t.view((i, i), (p, p)).into_owned();
    let t12 = schur.t.view((i, i + p), (p, q)).into_owned();
    let t22 = schur.t.view((i + p, i + p), (q, q)).into_owned();

    // Solve T11 X - X T22 = -T12 for the invariant-subspace basis [X; I].
    let sys = kron(&DMatrix::identity(q, q), &t11) - kron(&t22.transpose(), &DMatrix::identity(p, p));
    let rhs = -vec_of(&t12);
    let lu = sys.full_piv_lu();
    let x_vec = lu
        .solve(&rhs)
        .ok_or_else(|| EquationError::ReorderFailed("singular swap system".into()))?;
    let x = DMatrix::from_column_slice(p, q, x_vec.as_slice());

    // Orthonormal basis of span([X; I]) completed to a w x w orthogonal G.
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(w);
    let mut candidate_cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    for j in 0..q {
        let mut col = nalgebra::DVector::zeros(w);
        for r in 0..p {
            col[r] = x[(r, j)];
        }
        col[p + j] = 1.0;
        candidate_cols.push(col);
    }
    for j in 0..w {
        let mut e = nalgebra::DVector::zeros(w);
        e[j] = 1.0;
        candidate_cols.push(e);
    }
    for cand in candidate_cols {
        if basis.len() == w {
            break;
        }
        let mut v = cand;
        for _ in 0..2 {
            for u in &basis {
                let proj = u.dot(&v);
                v -= u * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    if basis.len() != w {
        return Err(EquationError::ReorderFailed("could not complete orthogonal basis".into()));
    }
    let g = DMatrix::from_fn(w, w, |r, cidx| basis[cidx][r]);

    apply_window_transform(schur, i, &g);

    // The (2,1) window block must vanish up to roundoff.
    let lower = schur.t.view((i + q, i), (p, q)).norm();
    let scale = schur.t.norm().max(1.0);
    if lower > 1e-8 * scale {
        return Err(EquationError::ReorderFailed(format!(
            "swap residual {lower:.3e} too large"
        )));
    }
    for r in 0..p {
        for cidx in 0..q {
            schur.t[(i + q + r, i + cidx)] = 0.0;
        }
    }
    // Subdiagonal hygiene inside the window: only genuine 2x2 blocks remain.
    if q == 2 {
        // the new leading block is the old trailing complex pair; keep it
    } else {
        schur.t[(i + 1, i)] = 0.0;
    }
    if p == 1 && w > q {
        // trailing 1x1 block: nothing below it inside the window
    }
    Ok(())
}

/// Reorder the Schur form so every eigenvalue satisfying `select` appears in
/// the leading diagonal blocks. Returns the dimension of the selected
/// leading invariant subspace.
///
/// The predicate must be conjugation-consistent (equal on conjugate pairs);
/// half-plane selections by real-part sign are.
pub fn reorder_schur(
    schur: &mut RealSchur,
    select: impl Fn(Complex<f64>) -> bool,
) -> Result<usize, EquationError> {
    #[derive(Clone, Copy)]
    struct Block {
        size: usize,
        selected: bool,
    }

    let layout = block_starts(&schur.t)?;
    let mut blocks: Vec<Block> = layout
        .iter()
        .map(|&(start, size)| {
            let (e1, _) = block_eigenvalues(&schur.t, start, size);
            Block { size, selected: select(e1) }
        })
        .collect();

    let mut placed = 0usize; // number of leading blocks already selected
    for bi in 0..blocks.len() {
        if !blocks[bi].selected {
            continue;
        }
        let mut j = bi;
        while j > placed {
            // Start row of block j-1.
            let start: usize = blocks[..j - 1].iter().map(|b| b.size).sum();
            let p = blocks[j - 1].size;
            let q = blocks[j].size;
            swap_adjacent_blocks(schur, start, p, q)?;
            blocks.swap(j - 1, j);
            j -= 1;
        }
        placed += 1;
    }

    let selected_rows: usize = blocks.iter().take(placed).map(|b| b.size).sum();

    // The leading blocks must carry exactly the selected eigenvalues.
    let final_layout = block_starts(&schur.t)?;
    let mut row = 0;
    for (start, size) in final_layout {
        let (e1, _) = block_eigenvalues(&schur.t, start, size);
        let should_be_selected = row < selected_rows;
        if select(e1) != should_be_selected {
            return Err(EquationError::ReorderFailed(
                "selection inconsistent after reordering".into(),
            ));
        }
        row += size;
    }
    Ok(selected_rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn assert_schur_valid(m: &DMatrix<f64>, s: &RealSchur) {
        let n = m.nrows();
        let resid = (&s.q * &s.t * s.q.transpose() - m).norm() / m.norm().max(1.0);
        assert!(resid < 1e-11, "reconstruction residual {resid:.3e}");
        let orth = (s.q.transpose() * &s.q - DMatrix::identity(n, n)).norm();
        assert!(orth < 1e-12, "orthogonality defect {orth:.3e}");
        // strictly quasi-triangular
        for i in 0..n {
            for j in 0..n {
                if i > j + 1 {
                    assert_eq!(s.t[(i, j)], 0.0, "entry ({i},{j}) below subdiagonal");
                }
            }
        }
    }

    #[test]
    fn schur_reconstructs_input() {
        for seed in 0..6 {
            let m = random_matrix(9, seed);
            let s = real_schur(&m).unwrap();
            assert_schur_valid(&m, &s);
        }
    }

    #[test]
    fn remaining_blocks_are_complex_pairs() {
        for seed in 0..6 {
            let m = random_matrix(11, 100 + seed);
            let s = real_schur(&m).unwrap();
            let blocks = block_starts(&s.t).unwrap();
            for (start, size) in blocks {
                if size == 2 {
                    let (e1, _) = block_eigenvalues(&s.t, start, 2);
                    assert!(e1.im != 0.0, "2x2 block with real eigenvalues survived");
                }
            }
        }
    }

    #[test]
    fn reorder_moves_left_half_plane_first() {
        for seed in 0..8 {
            let m = random_matrix(10, 200 + seed);
            let mut s = real_schur(&m).unwrap();
            let k = reorder_schur(&mut s, |e| e.re < 0.0).unwrap();
            assert_schur_valid(&m, &s);
            let eigs = schur_eigenvalues(&s.t);
            for (idx, e) in eigs.iter().enumerate() {
                if idx < k {
                    assert!(e.re < 0.0, "leading eigenvalue {e} not in left half-plane");
                } else {
                    assert!(e.re >= 0.0, "trailing eigenvalue {e} in left half-plane");
                }
            }
            // eigenvalue multiset preserved vs. fresh decomposition
            let mut orig: Vec<f64> = m.complex_eigenvalues().iter().map(|e| e.re).collect();
            let mut got: Vec<f64> = eigs.iter().map(|e| e.re).collect();
            orig.sort_by(f64::total_cmp);
            got.sort_by(f64::total_cmp);
            for (a, b) in orig.iter().zip(got.iter()) {
                assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn reorder_by_magnitude_predicate() {
        let m = random_matrix(8, 999);
        let mut s = real_schur(&m).unwrap();
        let k = reorder_schur(&mut s, |e| e.norm() > 0.8).unwrap();
        assert_schur_valid(&m, &s);
        let eigs = schur_eigenvalues(&s.t);
        for (idx, e) in eigs.iter().enumerate() {
            assert_eq!(idx < k, e.norm() > 0.8, "eigenvalue {e} misplaced at {idx}");
        }
    }

    #[test]
    fn leading_columns_span_invariant_subspace() {
        let m = random_matrix(10, 4242);
        let mut s = real_schur(&m).unwrap();
        let k = reorder_schur(&mut s, |e| e.re > 0.0).unwrap();
        if k == 0 {
            return;
        }
        let u = s.q.view((0, 0), (10, k)).into_owned();
        // M U = U T11 for the leading block T11
        let t11 = s.t.view((0, 0), (k, k)).into_owned();
        let resid = (&m * &u - &u * t11).norm() / m.norm();
        assert!(resid < 1e-11, "invariant subspace residual {resid:.3e}");
    }
}
