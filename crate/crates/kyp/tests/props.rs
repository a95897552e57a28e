//! Property tests over randomized inputs.

use kyp::equations::solve_lyapunov;
use kyp::model::AffineMatrixFamily;
use kyp::Tolerances;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn small_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n)
        .prop_map(move |data| DMatrix::from_row_slice(n, n, &data))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Evaluation is affine: the increments over the base add up.
    #[test]
    fn family_evaluation_is_affine(
        base in small_matrix(3),
        c1 in small_matrix(3),
        c2 in small_matrix(3),
        l1 in prop::collection::vec(-3.0f64..3.0, 2),
        l2 in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let fam = AffineMatrixFamily::new(base.clone(), vec![c1, c2], false).unwrap();
        let v1 = DVector::from_vec(l1);
        let v2 = DVector::from_vec(l2);
        let sum = &v1 + &v2;
        let lhs = fam.evaluate(&sum).unwrap() - &base;
        let rhs = (fam.evaluate(&v1).unwrap() - &base) + (fam.evaluate(&v2).unwrap() - &base);
        let scale = 1.0 + lhs.amax().max(rhs.amax());
        prop_assert!((lhs - rhs).amax() <= 1e-12 * scale);
    }

    /// Shifted random matrices give solvable Lyapunov equations whose
    /// residual meets the contract and whose solution is symmetric.
    #[test]
    fn lyapunov_residual_contract(
        w in small_matrix(4),
        cs in small_matrix(4),
        shift in 1.5f64..4.0,
    ) {
        let m = &w - DMatrix::identity(4, 4) * (shift + w.norm());
        let c = &cs + cs.transpose();
        let tol = Tolerances::default();
        let x = solve_lyapunov(&m, &c, &tol).unwrap();
        prop_assert_eq!((&x - x.transpose()).amax(), 0.0);
        let resid = (m.transpose() * &x + &x * &m + &c).norm();
        prop_assert!(resid <= tol.lyap_res_tol * (1.0 + x.norm()) * m.norm());
    }

    /// The Schur-based solve agrees with flipping the equation orientation:
    /// solving with M' in the Gramian orientation equals the transposed
    /// orientation with M.
    #[test]
    fn lyapunov_orientations_are_transposes(
        w in small_matrix(3),
        cs in small_matrix(3),
    ) {
        let m = &w - DMatrix::identity(3, 3) * (2.0 + w.norm());
        let c = &cs + cs.transpose();
        let tol = Tolerances::default();
        let x1 = solve_lyapunov(&m, &c, &tol).unwrap();
        let solver = kyp::equations::LyapunovSolver::new(&m.transpose(), &tol).unwrap();
        let x2 = solver.solve_gramian(&c).unwrap();
        let scale = 1.0 + x1.amax();
        prop_assert!((&x1 - &x2).amax() <= 1e-9 * scale);
    }
}
