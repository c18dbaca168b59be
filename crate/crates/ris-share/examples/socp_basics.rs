//! Build and solve a small second-order cone program by hand.
//!
//! Minimizes x + y over the unit disk with x pinned to 0.3, then shows
//! what an infeasible variant reports.

use nalgebra::{DMatrix, DVector};
use ris_share::socp::{solve, SocCone, SocpProblem, SocpStatus, SolverOptions};

fn main() {
    let problem = SocpProblem::new(
        DVector::from_vec(vec![1.0, 1.0]),
        vec![SocCone::norm_bound(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            1.0,
        )],
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DVector::from_vec(vec![0.3]),
    )
    .unwrap()
    .assume_bounded();

    let sol = solve(&problem, &SolverOptions::default()).unwrap();
    println!("status       {:?}", sol.status);
    println!("minimizer    ({:.6}, {:.6})", sol.x[0], sol.x[1]);
    println!("objective    {:.6}", sol.objective);
    println!(
        "kkt residual {:.2e} in {} iterations",
        sol.kkt_residual, sol.iterations
    );
    let expected_y = -(1.0f64 - 0.3 * 0.3).sqrt();
    println!("expected y   {expected_y:.6}");

    // Pin the point outside the disk and the solver certifies infeasibility.
    let bad = SocpProblem::new(
        DVector::from_vec(vec![1.0, 1.0]),
        vec![SocCone::norm_bound(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            1.0,
        )],
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DVector::from_vec(vec![2.0]),
    )
    .unwrap()
    .assume_bounded();
    let sol = solve(&bad, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SocpStatus::Infeasible);
    println!("\npinned x = 2 outside the disk: {:?}", sol.status);
}
