//! Dense convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//! minimize   ½ xᵀ P x + qᵀ x
//! subject to l ≤ A x ≤ u
//! ```
//!
//! and are solved by an operator-splitting (ADMM) iteration followed by an
//! active-set polish. Dual variables follow the sign convention
//! `P x + q + Aᵀ y = 0`, with `y_i > 0` when the upper limit of row `i` is
//! active and `y_i < 0` when the lower limit is.

mod admm;
pub mod dense;
mod lexicographic;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::QpError;

pub use lexicographic::lexicographic_solve;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct QpProblem {
    quadratic_term: DMatrix<f64>,
    linear_term: DVector<f64>,
    constraint_matrix: DMatrix<f64>,
    lower_limits: DVector<f64>,
    upper_limits: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        quadratic_term: DMatrix<f64>,
        linear_term: DVector<f64>,
        constraint_matrix: DMatrix<f64>,
        lower_limits: DVector<f64>,
        upper_limits: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = linear_term.len();
        if quadratic_term.nrows() != n || quadratic_term.ncols() != n {
            return Err(QpError::Dimension(format!(
                "quadratic term is {}x{}, expected {n}x{n}",
                quadratic_term.nrows(),
                quadratic_term.ncols()
            )));
        }
        let m = constraint_matrix.nrows();
        if constraint_matrix.ncols() != n {
            return Err(QpError::Dimension(format!(
                "constraint matrix has {} columns, expected {n}",
                constraint_matrix.ncols()
            )));
        }
        if lower_limits.len() != m || upper_limits.len() != m {
            return Err(QpError::Dimension(format!(
                "limits have lengths {} and {}, expected {m}",
                lower_limits.len(),
                upper_limits.len()
            )));
        }
        let has_nan = quadratic_term.iter().any(|v| !v.is_finite())
            || linear_term.iter().any(|v| !v.is_finite())
            || constraint_matrix.iter().any(|v| !v.is_finite())
            || lower_limits.iter().chain(upper_limits.iter()).any(|v| v.is_nan());
        if has_nan {
            return Err(QpError::NotANumber);
        }
        let mut asym: f64 = 0.0;
        for j in 0..n {
            for i in j + 1..n {
                asym = asym.max((quadratic_term[(i, j)] - quadratic_term[(j, i)]).abs());
            }
        }
        let scale = quadratic_term.amax().max(1.0);
        if asym > SYMMETRY_TOLERANCE * scale {
            return Err(QpError::NotSymmetric(asym));
        }
        for i in 0..m {
            if lower_limits[i] > upper_limits[i] || lower_limits[i] == f64::INFINITY || upper_limits[i] == f64::NEG_INFINITY {
                return Err(QpError::InvertedLimits(i));
            }
        }
        Ok(Self {
            quadratic_term,
            linear_term,
            constraint_matrix,
            lower_limits,
            upper_limits,
        })
    }

    /// A problem without constraints.
    pub fn unconstrained(quadratic_term: DMatrix<f64>, linear_term: DVector<f64>) -> Result<Self, QpError> {
        let n = linear_term.len();
        Self::new(
            quadratic_term,
            linear_term,
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DVector::zeros(0),
        )
    }

    pub fn quadratic_term(&self) -> &DMatrix<f64> {
        &self.quadratic_term
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.linear_term
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.constraint_matrix
    }

    pub fn lower_limits(&self) -> &DVector<f64> {
        &self.lower_limits
    }

    pub fn upper_limits(&self) -> &DVector<f64> {
        &self.upper_limits
    }

    pub fn n_variables(&self) -> usize {
        self.linear_term.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraint_matrix.nrows()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.quadratic_term * x)) + self.linear_term.dot(x)
    }

    /// Same feasible set, different objective.
    pub fn with_objective(&self, quadratic_term: DMatrix<f64>, linear_term: DVector<f64>) -> Result<Self, QpError> {
        Self::new(
            quadratic_term,
            linear_term,
            self.constraint_matrix.clone(),
            self.lower_limits.clone(),
            self.upper_limits.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub primal: DVector<f64>,
    pub dual: DVector<f64>,
    pub objective: f64,
    /// Largest violation of `l ≤ A x ≤ u`.
    pub primal_residual: f64,
    /// `‖P x + q + Aᵀ y‖∞`.
    pub dual_residual: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub polished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_opt: f64,
    pub max_iters: usize,
    pub tie_tolerance: f64,
    /// Initial ADMM step size.
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    pub adaptive_rho_interval: usize,
    pub polish: bool,
    pub scaling_iters: usize,
    pub infeasibility_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_opt: 1e-8,
            max_iters: 50_000,
            tie_tolerance: 1e-7,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho_interval: 50,
            polish: true,
            scaling_iters: 10,
            infeasibility_tol: 1e-6,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), QpError> {
        let positive = [self.tol_feas, self.tol_opt, self.tie_tolerance, self.rho, self.sigma, self.infeasibility_tol];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(QpError::Dimension("solver tolerances and step sizes must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(QpError::Dimension("relaxation factor must lie in (0, 2)".into()));
        }
        if self.max_iters == 0 || self.adaptive_rho_interval == 0 {
            return Err(QpError::Dimension("iteration counts must be positive".into()));
        }
        Ok(())
    }
}

/// Starting point for the iteration.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub primal: DVector<f64>,
    pub dual: DVector<f64>,
}

impl From<&QpSolution> for WarmStart {
    fn from(s: &QpSolution) -> Self {
        Self {
            primal: s.primal.clone(),
            dual: s.dual.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.feasibility).max(self.complementarity)
    }
}

pub fn solve_qp(problem: &QpProblem, settings: &SolverSettings) -> Result<QpSolution, QpError> {
    solve_qp_warm(problem, settings, None)
}

pub fn solve_qp_warm(
    problem: &QpProblem,
    settings: &SolverSettings,
    warm: Option<&WarmStart>,
) -> Result<QpSolution, QpError> {
    settings.validate()?;
    if let Some(w) = warm {
        if w.primal.len() != problem.n_variables() || w.dual.len() != problem.n_constraints() {
            return Err(QpError::Dimension("warm start does not match the problem".into()));
        }
    }
    admm::solve(problem, settings, warm)
}

/// Max-norm residuals of stationarity, primal feasibility and
/// complementarity (including dual sign feasibility).
pub fn kkt_residuals(problem: &QpProblem, candidate: &QpSolution) -> KktResiduals {
    kkt_residuals_of(problem, &candidate.primal, &candidate.dual)
}

pub(crate) fn kkt_residuals_of(problem: &QpProblem, x: &DVector<f64>, y: &DVector<f64>) -> KktResiduals {
    let ax = problem.constraint_matrix() * x;
    let mut grad = problem.quadratic_term() * x + problem.linear_term();
    if y.len() > 0 {
        grad.gemv_tr(1.0, problem.constraint_matrix(), y, 1.0);
    }
    let stationarity = grad.amax();
    let mut feasibility: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for i in 0..ax.len() {
        let (l, u, a) = (problem.lower_limits[i], problem.upper_limits[i], ax[i]);
        feasibility = feasibility.max(l - a).max(a - u);
        let yp = y[i].max(0.0);
        let yn = (-y[i]).max(0.0);
        let upper_term = if u.is_finite() { yp * (u - a).abs() } else { yp };
        let lower_term = if l.is_finite() { yn * (a - l).abs() } else { yn };
        complementarity = complementarity.max(upper_term).max(lower_term);
    }
    KktResiduals {
        stationarity,
        feasibility,
        complementarity,
    }
}
