use nalgebra::{DMatrix, DVector};

use super::{solve_qp, solve_qp_warm, QpProblem, QpSolution, SolveStatus, SolverSettings, WarmStart};
use crate::error::QpError;

/// Minimizes the stage objectives in order over a shared feasible set.
///
/// After stage `j` is solved with optimum `x*`, later stages are restricted to
/// `qⱼᵀx ≤ qⱼᵀx* + tie_tolerance` and, when `Pⱼ ≠ 0`, to `Pⱼ x = Pⱼ x*`. All
/// minimizers of a convex quadratic share `P x`, so together these describe
/// the near-optimal face of stage `j` with linear rows only.
pub fn lexicographic_solve(stages: &[QpProblem], settings: &SolverSettings) -> Result<QpSolution, QpError> {
    let first = stages.first().ok_or(QpError::NoStages)?;
    let n = first.n_variables();
    for st in &stages[1..] {
        if st.n_variables() != n
            || st.constraint_matrix() != first.constraint_matrix()
            || st.lower_limits() != first.lower_limits()
            || st.upper_limits() != first.upper_limits()
        {
            return Err(QpError::Dimension("lexicographic stages must share variables and constraints".into()));
        }
    }
    let mut solution = solve_qp(first, settings)?;
    if stages.len() == 1 {
        return Ok(solution);
    }
    if solution.status != SolveStatus::Optimal {
        return Err(QpError::StageFailed {
            stage: 0,
            status: solution.status,
        });
    }

    let mut extra_rows: Vec<DVector<f64>> = Vec::new();
    let mut extra_lower: Vec<f64> = Vec::new();
    let mut extra_upper: Vec<f64> = Vec::new();
    for (index, stage) in stages.iter().enumerate().skip(1) {
        let prev = &stages[index - 1];
        pin_objective(prev, &solution.primal, settings.tie_tolerance, &mut extra_rows, &mut extra_lower, &mut extra_upper);

        let base_m = first.n_constraints();
        let m = base_m + extra_rows.len();
        let mut a = DMatrix::zeros(m, n);
        a.view_mut((0, 0), (base_m, n)).copy_from(first.constraint_matrix());
        for (r, row) in extra_rows.iter().enumerate() {
            a.row_mut(base_m + r).copy_from(&row.transpose());
        }
        let mut l = DVector::zeros(m);
        let mut u = DVector::zeros(m);
        l.rows_mut(0, base_m).copy_from(first.lower_limits());
        u.rows_mut(0, base_m).copy_from(first.upper_limits());
        for r in 0..extra_rows.len() {
            l[base_m + r] = extra_lower[r];
            u[base_m + r] = extra_upper[r];
        }
        let problem = QpProblem::new(stage.quadratic_term().clone(), stage.linear_term().clone(), a, l, u)?;
        let mut dual = DVector::zeros(m);
        dual.rows_mut(0, base_m).copy_from(&solution.dual.rows(0, base_m));
        let warm = WarmStart {
            primal: solution.primal.clone(),
            dual,
        };
        let next = solve_qp_warm(&problem, settings, Some(&warm))?;
        if next.status != SolveStatus::Optimal {
            return Err(QpError::StageFailed {
                stage: index,
                status: next.status,
            });
        }
        solution = next;
    }
    Ok(solution)
}

fn pin_objective(
    stage: &QpProblem,
    x_opt: &DVector<f64>,
    tie_tolerance: f64,
    rows: &mut Vec<DVector<f64>>,
    lower: &mut Vec<f64>,
    upper: &mut Vec<f64>,
) {
    let p = stage.quadratic_term();
    let px = p * x_opt;
    for i in 0..p.nrows() {
        let row = p.row(i);
        if row.amax() > 0.0 {
            rows.push(row.transpose());
            lower.push(px[i]);
            upper.push(px[i]);
        }
    }
    let q = stage.linear_term();
    if q.amax() > 0.0 {
        rows.push(q.clone());
        lower.push(f64::NEG_INFINITY);
        upper.push(q.dot(x_opt) + tie_tolerance);
    }
}
