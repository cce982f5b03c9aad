//! Solver correctness against an independent proximal-gradient oracle.

mod common;

use desparse::design::{DesignMatrix, MultiResponse};
use desparse::solvers::{
    lambda_max_mtl, solve_lasso, solve_mtlasso, LassoConfig, SolveStatus,
};
use ndarray::Array1;

#[test]
fn lasso_matches_proximal_gradient_oracle() {
    for seed in 0..5 {
        let x = common::random_standardized(30, 10, 100 + seed);
        let y: Array1<f64> = common::random_matrix(30, 1, 200 + seed).column(0).to_owned();
        let design = DesignMatrix::from_standardized(x.clone()).unwrap();
        let lmax = (0..10)
            .map(|j| x.column(j).dot(&y).abs() / 30.0)
            .fold(0.0_f64, f64::max);
        let lambda = 0.3 * lmax;

        let cfg = LassoConfig { lambda, max_iter: 50_000, tol: 1e-12 };
        let sol = solve_lasso(&design, y.view(), &cfg).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);

        let oracle = common::fista_lasso(x.view(), &y, lambda, 1e-10, 200_000);
        for j in 0..10 {
            assert!(
                (sol.coef.data()[[j, 0]] - oracle[j]).abs() < 1e-6,
                "seed {seed}: coefficient {j} differs: {} vs {}",
                sol.coef.data()[[j, 0]],
                oracle[j]
            );
        }
    }
}

#[test]
fn mtlasso_objective_matches_oracle() {
    for seed in 0..5 {
        let x = common::random_standardized(40, 60, 300 + seed);
        let y = common::random_matrix(40, 5, 400 + seed);
        let design = DesignMatrix::from_standardized(x.clone()).unwrap();
        let resp = MultiResponse::new(y.clone()).unwrap();
        let lambda = 0.25 * lambda_max_mtl(&design, &resp);

        let cfg = LassoConfig { lambda, max_iter: 50_000, tol: 1e-12 };
        let sol = solve_mtlasso(&design, &resp, &cfg).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);

        let oracle = common::fista_mtlasso(x.view(), y.view(), lambda, 1e-10, 400_000);
        let obj_cd = common::mtl_objective(x.view(), y.view(), sol.coef.data(), lambda);
        let obj_or = common::mtl_objective(x.view(), y.view(), &oracle, lambda);
        let rel = (obj_cd - obj_or).abs() / obj_or.abs();
        assert!(rel < 1e-8, "seed {seed}: objective gap {rel}");
    }
}
