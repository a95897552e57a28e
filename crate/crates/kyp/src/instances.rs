//! Ready-made problem instances: a closed-form scalar example and seeded
//! random feasible instances for tests and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{compute_pair, PairStrategy};
use crate::model::{symmetric_part, AffineMatrixFamily, KypProblem};
use crate::tol::Tolerances;

/// The smallest nontrivial instance: n = m = p = r = 1 with
/// A = 0, B = 1, Q(l) = -l, S = 0, R = -1, N(l) = l, c = 1, Sigma = 1.
///
/// Closed forms: P_+ = sqrt(l), P_- = -sqrt(l), Delta = 2 sqrt(l) on the
/// domain l > 0; the objective l - sqrt(l) is minimized at l = 1/4 with
/// value -1/4.
pub fn scalar_problem() -> KypProblem {
    let one = |v: f64| DMatrix::from_row_slice(1, 1, &[v]);
    KypProblem::new(
        one(0.0),
        one(1.0),
        DVector::from_row_slice(&[1.0]),
        one(1.0),
        AffineMatrixFamily::new(one(0.0), vec![one(-1.0)], true).unwrap(),
        AffineMatrixFamily::new(one(0.0), vec![one(0.0)], false).unwrap(),
        AffineMatrixFamily::new(one(-1.0), vec![one(0.0)], true).unwrap(),
        AffineMatrixFamily::new(one(0.0), vec![one(1.0)], true).unwrap(),
    )
    .unwrap()
}

/// The scalar instance with the positivity family flipped to N(l) = -l,
/// which makes N > 0 and the Riccati domain (l > 0) contradict each other:
/// the instance is infeasible by construction.
pub fn scalar_problem_infeasible() -> KypProblem {
    let mut prob = scalar_problem();
    let one = |v: f64| DMatrix::from_row_slice(1, 1, &[v]);
    prob.n_fam = AffineMatrixFamily::new(one(0.0), vec![one(-1.0)], true).unwrap();
    prob
}

/// Shape parameters for [`random_feasible_problem`].
#[derive(Debug, Clone, Copy)]
pub struct RandomProblemConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub r: usize,
    pub seed: u64,
}

/// Draw a random instance that is strictly feasible at lambda = 0.
///
/// The base matrices are built so that R(0) and Q(0) are safely negative
/// definite with a small S(0); then F(0, P = 0) < 0, which guarantees both
/// Riccati solutions exist at 0 with P_+(0) > 0. N(0) is positive definite
/// and Sigma is a random PSD weight. Coefficient matrices are O(1) random
/// symmetric perturbations. Feasibility at 0 is verified before returning;
/// the draw is retried with a derived seed when a rare bad draw slips
/// through.
pub fn random_feasible_problem(cfg: RandomProblemConfig) -> KypProblem {
    let tol = Tolerances::default();
    for attempt in 0..32u64 {
        let seed = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(attempt);
        let prob = draw_candidate(cfg, seed);
        let feasible = compute_pair(&prob, &DVector::zeros(cfg.p), PairStrategy::default(), &tol)
            .map(|pair| {
                pair.n.clone().cholesky().is_some() && pair.p_plus.clone().cholesky().is_some()
            })
            .unwrap_or(false);
        if feasible && crate::model::is_controllable(&prob.a, &prob.b, &tol) {
            return prob;
        }
    }
    panic!("no feasible draw after 32 attempts for {cfg:?}");
}

fn draw_candidate(cfg: RandomProblemConfig, seed: u64) -> KypProblem {
    let RandomProblemConfig { n, m, p, r, .. } = cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mat = |rows: usize, cols: usize, scale: f64| {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
    };

    let a = mat(n, n, 1.0) / (n as f64).sqrt();
    let b = mat(n, m, 1.0);

    let spd = |w: DMatrix<f64>, shift: f64| {
        let dim = w.nrows();
        &w * w.transpose() / dim as f64 + DMatrix::identity(dim, dim) * shift
    };

    let q0 = -spd(mat(n, n, 1.0), 0.5);
    let r0 = -spd(mat(m, m, 1.0), 0.5);
    let s0 = mat(n, m, 0.15);
    let n0 = spd(mat(r, r, 1.0), 0.5);

    let sym_coeff = |rng_mat: DMatrix<f64>| symmetric_part(&rng_mat);
    let q_coeffs: Vec<_> = (0..p).map(|_| sym_coeff(mat(n, n, 0.35))).collect();
    let s_coeffs: Vec<_> = (0..p).map(|_| mat(n, m, 0.25)).collect();
    let r_coeffs: Vec<_> = (0..p).map(|_| sym_coeff(mat(m, m, 0.35))).collect();
    let n_coeffs: Vec<_> = (0..p).map(|_| sym_coeff(mat(r, r, 0.35))).collect();

    let sigma = spd(mat(n, n, 1.0), 0.05);
    let c = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));

    KypProblem::new(
        a,
        b,
        c,
        sigma,
        AffineMatrixFamily::new(q0, q_coeffs, true).unwrap(),
        AffineMatrixFamily::new(s0, s_coeffs, false).unwrap(),
        AffineMatrixFamily::new(r0, r_coeffs, true).unwrap(),
        AffineMatrixFamily::new(n0, n_coeffs, true).unwrap(),
    )
    .unwrap()
}

/// Rejection-sample a multiplier vector near the feasible origin of a
/// [`random_feasible_problem`] instance: full feasibility for the
/// Riccati-substituted form (domain membership, N > 0, P_+ > 0).
pub fn random_feasible_lambda(
    prob: &KypProblem,
    rng: &mut ChaCha8Rng,
    radius: f64,
    tol: &Tolerances,
) -> Option<DVector<f64>> {
    let p = prob.p();
    let mut scale = radius;
    for _ in 0..40 {
        let lambda = DVector::from_fn(p, |_, _| rng.random_range(-scale..scale));
        let ok = compute_pair(prob, &lambda, PairStrategy::default(), tol)
            .map(|pair| {
                pair.n.clone().cholesky().is_some() && pair.p_plus.clone().cholesky().is_some()
            })
            .unwrap_or(false);
        if ok {
            return Some(lambda);
        }
        scale *= 0.7;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_problem;

    #[test]
    fn scalar_problem_validates() {
        let report = validate_problem(&scalar_problem(), &Tolerances::default());
        assert!(report.ok, "{:?}", report.findings);
    }

    #[test]
    fn random_problems_are_feasible_at_origin() {
        for seed in 0..6 {
            let prob = random_feasible_problem(RandomProblemConfig {
                n: 4 + (seed as usize % 5),
                m: 2,
                p: 2,
                r: 2,
                seed,
            });
            let pair = compute_pair(
                &prob,
                &DVector::zeros(2),
                PairStrategy::default(),
                &Tolerances::default(),
            )
            .unwrap();
            assert!(pair.delta.clone().cholesky().is_some());
            assert!(pair.p_plus.clone().cholesky().is_some());
        }
    }
}
