//! Interior-point backend for the canonical conic form, wrapping Clarabel.

use clarabel::algebra::CscMatrix as ClarabelCsc;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use flyby_core::conic::{ConicProblem, SolveResult, SolveStatus, SolverBackend};
use flyby_core::error::{Error, Result};

/// Clarabel-backed [`SolverBackend`]. Interior-point methods do not use warm
/// starts, so the hint is accepted and ignored.
pub struct ClarabelBackend {
    /// Maximum interior-point iterations per solve.
    pub max_iter: u32,
    /// Per-solve time budget, seconds.
    pub time_limit: f64,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        ClarabelBackend { max_iter: 200, time_limit: f64::INFINITY }
    }
}

/// Stack the equality block on top of the generalized-inequality block into
/// one CSC matrix, as Clarabel expects (`Ax + s = b`, `s ∈ K`).
fn stack_matrices(problem: &ConicProblem) -> ClarabelCsc<f64> {
    let eq = &problem.eq_mat;
    let g = &problem.ineq_mat;
    let nrows = eq.nrows + g.nrows;
    let ncols = eq.ncols;
    let nnz = eq.nnz() + g.nnz();
    let mut colptr = Vec::with_capacity(ncols + 1);
    let mut rowval = Vec::with_capacity(nnz);
    let mut nzval = Vec::with_capacity(nnz);
    colptr.push(0);
    for c in 0..ncols {
        for idx in eq.colptr[c]..eq.colptr[c + 1] {
            rowval.push(eq.rowind[idx]);
            nzval.push(eq.values[idx]);
        }
        for idx in g.colptr[c]..g.colptr[c + 1] {
            rowval.push(eq.nrows + g.rowind[idx]);
            nzval.push(g.values[idx]);
        }
        colptr.push(rowval.len());
    }
    ClarabelCsc::new(nrows, ncols, colptr, rowval, nzval)
}

impl SolverBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&mut self, problem: &ConicProblem, _warm_start: Option<&[f64]>) -> Result<SolveResult> {
        let n = problem.n_vars();
        let a = stack_matrices(problem);
        let mut b = Vec::with_capacity(a.m);
        b.extend_from_slice(&problem.eq_rhs);
        b.extend_from_slice(&problem.ineq_rhs);

        let mut cones: Vec<SupportedConeT<f64>> = Vec::with_capacity(2 + problem.cones.soc_dims.len());
        if !problem.eq_rhs.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(problem.eq_rhs.len()));
        }
        if problem.cones.nonneg > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(problem.cones.nonneg));
        }
        for &dim in &problem.cones.soc_dims {
            cones.push(SupportedConeT::SecondOrderConeT(dim));
        }

        let p = ClarabelCsc::<f64>::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .time_limit(self.time_limit)
            .build()
            .map_err(|e| Error::Solver(format!("settings: {e}")))?;

        let mut solver = DefaultSolver::new(&p, &problem.cost, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("problem setup: {e:?}")))?;
        solver.solve();
        let solution = &solver.solution;

        let status = match solution.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved
            | SolverStatus::MaxIterations
            | SolverStatus::InsufficientProgress
            | SolverStatus::NumericalError => SolveStatus::Inaccurate,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            SolverStatus::MaxTime => SolveStatus::Timeout,
            other => return Err(Error::Solver(format!("unexpected solver status {other:?}"))),
        };

        Ok(SolveResult {
            status,
            primal: solution.x.clone(),
            objective: solution.obj_val,
            solve_time: solution.solve_time,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use flyby_core::conic::{ConeLayout, TripletBuilder};

    /// min −y subject to x = 2, ‖y‖ ≤ x (so y* = 2).
    #[test]
    fn tiny_socp_solves_to_known_optimum() {
        let mut eq = TripletBuilder::new(1, 2);
        eq.push(0, 0, 1.0);
        let (eq_mat, _) = eq.build().unwrap();
        let mut g = TripletBuilder::new(2, 2);
        g.push(0, 0, -1.0);
        g.push(1, 1, -1.0);
        let (ineq_mat, _) = g.build().unwrap();
        let problem = ConicProblem {
            cost: vec![0.0, -1.0],
            eq_mat,
            eq_rhs: vec![2.0],
            ineq_mat,
            ineq_rhs: vec![0.0, 0.0],
            cones: ConeLayout { nonneg: 0, soc_dims: vec![2] },
        };
        let mut backend = ClarabelBackend::default();
        let result = backend.solve(&problem, None).unwrap();
        assert_eq!(result.status, SolveStatus::Optimal);
        assert_relative_eq!(result.primal[0], 2.0, epsilon = 1e-7);
        assert_relative_eq!(result.primal[1], 2.0, epsilon = 1e-7);
        assert_relative_eq!(result.objective, -2.0, epsilon = 1e-7);
        let report = problem.verify_solution(&result.primal).unwrap();
        assert!(report.within(1e-6));
    }

    /// x = 1 and x = 2 simultaneously: primal infeasible.
    #[test]
    fn infeasible_problem_reports_infeasible() {
        let mut eq = TripletBuilder::new(2, 1);
        eq.push(0, 0, 1.0);
        eq.push(1, 0, 1.0);
        let (eq_mat, _) = eq.build().unwrap();
        let problem = ConicProblem {
            cost: vec![1.0],
            eq_mat,
            eq_rhs: vec![1.0, 2.0],
            ineq_mat: flyby_core::conic::CscMatrix {
                nrows: 0,
                ncols: 1,
                colptr: vec![0, 0],
                rowind: vec![],
                values: vec![],
            },
            ineq_rhs: vec![],
            cones: ConeLayout { nonneg: 0, soc_dims: vec![] },
        };
        let mut backend = ClarabelBackend::default();
        let result = backend.solve(&problem, None).unwrap();
        assert_eq!(result.status, SolveStatus::Infeasible);
    }
}
