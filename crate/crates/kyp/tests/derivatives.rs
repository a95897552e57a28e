//! Finite-difference validation of the barrier derivatives.
//!
//! The analytic gradient must match central differences of the barrier
//! value. The five-term Hessian formula carries doubled quadratic log-det
//! terms, so it differs from the derivative of the gradient by exactly the
//! four Gram-matrix corrections; that identity is what the finite-difference
//! check asserts.

use kyp::barrier::{evaluate_barrier, gradient, hessian, SolverConfig};
use kyp::calculus::{compute_pair, derivative_bundle, PairStrategy};
use kyp::instances::{random_feasible_problem, RandomProblemConfig};
use kyp::model::KypProblem;
use kyp::verify::fd_check;
use kyp::Tolerances;
use nalgebra::{DMatrix, DVector};

fn trace_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn spd_inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().cholesky().expect("positive definite").inverse()
}

fn fd_gradient(
    prob: &KypProblem,
    lambda: &DVector<f64>,
    t: f64,
    cfg: &SolverConfig,
    h: f64,
) -> DVector<f64> {
    DVector::from_fn(lambda.len(), |i, _| {
        let hi = h * (1.0 + lambda[i].abs());
        let mut lp = lambda.clone();
        lp[i] += hi;
        let mut lm = lambda.clone();
        lm[i] -= hi;
        let (vp, _) = evaluate_barrier(prob, &lp, t, cfg).expect("probe in domain");
        let (vm, _) = evaluate_barrier(prob, &lm, t, cfg).expect("probe in domain");
        (vp - vm) / (2.0 * hi)
    })
}

#[test]
fn gradient_matches_finite_differences() {
    let cfg = SolverConfig::default();
    let tol = Tolerances::default();
    for seed in 0..6u64 {
        let prob = random_feasible_problem(RandomProblemConfig {
            n: 3 + (seed as usize % 6),
            m: 1 + (seed as usize % 3),
            p: 1 + (seed as usize % 3),
            r: 2,
            seed: 500 + seed,
        });
        let lambda = DVector::zeros(prob.p());
        let t = 1.0;
        let pair = compute_pair(&prob, &lambda, PairStrategy::default(), &tol).unwrap();
        let bundle = derivative_bundle(&prob, &pair, &tol).unwrap();
        let g = gradient(&prob, &pair, &bundle, t).unwrap();
        let g_fd = fd_gradient(&prob, &lambda, t, &cfg, 1e-6);
        let err = (&g - &g_fd).norm() / (1.0 + g.norm());
        assert!(err <= 1e-5, "seed {seed}: gradient FD error {err:.3e}");
    }
}

#[test]
fn hessian_is_fd_gradient_plus_gram_corrections() {
    let cfg = SolverConfig::default();
    let tol = Tolerances::default();
    for seed in 0..4u64 {
        let prob = random_feasible_problem(RandomProblemConfig {
            n: 3 + (seed as usize % 5),
            m: 2,
            p: 1 + (seed as usize % 3),
            r: 2,
            seed: 900 + seed,
        });
        let p = prob.p();
        let lambda = DVector::zeros(p);
        let t = 1.0;
        let pair = compute_pair(&prob, &lambda, PairStrategy::default(), &tol).unwrap();
        let bundle = derivative_bundle(&prob, &pair, &tol).unwrap();
        let h_model = hessian(&prob, &pair, &bundle, t).unwrap();

        // Gram corrections: the doubled halves of the quadratic terms.
        let p_inv = spd_inv(&pair.p_plus);
        let d_inv = spd_inv(&pair.delta);
        let negr_inv = spd_inv(&(-&pair.r));
        let n_inv = spd_inv(&pair.n);
        let correction = DMatrix::from_fn(p, p, |i, j| {
            trace_prod(&(&p_inv * &bundle.dp_plus[i]), &(&p_inv * &bundle.dp_plus[j]))
                + trace_prod(
                    &(&negr_inv * prob.r_fam.coeff(i)),
                    &(&negr_inv * prob.r_fam.coeff(j)),
                )
                + trace_prod(&(&n_inv * prob.n_fam.coeff(i)), &(&n_inv * prob.n_fam.coeff(j)))
                + trace_prod(&(&d_inv * &bundle.ddelta[i]), &(&d_inv * &bundle.ddelta[j]))
        });
        let h_exact = &h_model - &correction;

        // Central differences of the analytic gradient.
        let h_fd = {
            let mut out = DMatrix::zeros(p, p);
            for j in 0..p {
                let hj = 1e-5 * (1.0 + lambda[j].abs());
                let mut lp = lambda.clone();
                lp[j] += hj;
                let mut lm = lambda.clone();
                lm[j] -= hj;
                let pair_p = compute_pair(&prob, &lp, cfg.strategy, &tol).unwrap();
                let bundle_p = derivative_bundle(&prob, &pair_p, &tol).unwrap();
                let gp = gradient(&prob, &pair_p, &bundle_p, t).unwrap();
                let pair_m = compute_pair(&prob, &lm, cfg.strategy, &tol).unwrap();
                let bundle_m = derivative_bundle(&prob, &pair_m, &tol).unwrap();
                let gm = gradient(&prob, &pair_m, &bundle_m, t).unwrap();
                let col = (gp - gm) / (2.0 * hj);
                out.set_column(j, &col);
            }
            out
        };

        let err = (&h_exact - &h_fd).norm() / (1.0 + h_exact.norm());
        assert!(err <= 1e-4, "seed {seed}: Hessian identity error {err:.3e}");

        // And the model Hessian dominates the exact one (PSD gap).
        let gap_min = correction.clone().symmetric_eigenvalues().min();
        assert!(gap_min >= -1e-10 * (1.0 + correction.norm()), "correction not PSD: {gap_min}");
    }
}

#[test]
fn fd_check_passes_on_random_instances() {
    let tol = Tolerances::default();
    for seed in 0..4u64 {
        let prob = random_feasible_problem(RandomProblemConfig {
            n: 4 + (seed as usize % 7),
            m: 2,
            p: 1 + (seed as usize % 4),
            r: 3,
            seed: 1300 + seed,
        });
        let lambda = DVector::zeros(prob.p());
        let report = fd_check(&prob, &lambda, 1e-5, &tol).unwrap();
        assert!(report.skipped_coords.is_empty(), "seed {seed}: {:?}", report.skipped_coords);
        assert!(
            report.first_max_rel_err <= 1e-5,
            "seed {seed}: first-derivative error {:.3e}",
            report.first_max_rel_err
        );
        assert!(
            report.second_max_rel_err <= 1e-4,
            "seed {seed}: second-derivative error {:.3e}",
            report.second_max_rel_err
        );
    }
}

#[test]
fn parallel_and_sequential_bundles_are_bitwise_identical() {
    let tol = Tolerances::default();
    let prob = random_feasible_problem(RandomProblemConfig { n: 7, m: 2, p: 4, r: 3, seed: 4242 });
    let lambda = DVector::zeros(4);
    let pair = compute_pair(&prob, &lambda, PairStrategy::default(), &tol).unwrap();
    kyp::par::force_sequential(false);
    let par = derivative_bundle(&prob, &pair, &tol).unwrap();
    kyp::par::force_sequential(true);
    let seq = derivative_bundle(&prob, &pair, &tol).unwrap();
    kyp::par::force_sequential(false);
    for i in 0..4 {
        for (a, b) in par.dp_plus[i].iter().zip(seq.dp_plus[i].iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for j in i..4 {
            for (a, b) in par.d2p_plus.get(i, j).iter().zip(seq.d2p_plus.get(i, j).iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
