use nalgebra::{DMatrix, DVector};

use super::{
    default_active_tol, gram_for, kernel_expansion, require_optimal, require_positive, with_jitter, Dataset,
    Prediction,
};
use crate::error::ModelError;
use crate::kernels::{GramMatrix, KernelSpec};
use crate::qp::{kkt_residuals, solve_qp_warm, QpProblem, QpSolution, SolverSettings, WarmStart};

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    /// `w = Σ αᵢ φ(mᵢ)`.
    pub dual_coeffs: Vec<f64>,
    pub offset: f64,
    /// Half-width `γ` of the tube.
    pub tube: f64,
    pub ridge_weight: f64,
    pub relax_weight: f64,
    pub kernel: KernelSpec,
    pub support_inputs: Vec<Vec<f64>>,
    pub slacks: Vec<f64>,
    pub s_star: usize,
    /// `αᵀ K α`.
    pub w_norm_sq: f64,
    /// Largest KKT residual of the main quadratic program.
    pub kkt_residual: f64,
}

impl SvrModel {
    /// `γ + τ ‖w‖²`.
    pub fn cost(&self) -> f64 {
        self.tube + self.ridge_weight * self.w_norm_sq
    }

    /// `Σ αᵢ k(mᵢ, m) + b` at each input.
    pub fn centers(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        let f = kernel_expansion(&self.kernel, &self.support_inputs, &self.dual_coeffs, inputs)?;
        Ok(f.iter().map(|v| v + self.offset).collect())
    }

    pub fn predict_many(&self, inputs: &[Vec<f64>]) -> Result<Vec<Prediction>, ModelError> {
        Ok(self
            .centers(inputs)?
            .into_iter()
            .map(|center| Prediction::Interval {
                center,
                lower: center - self.tube,
                upper: center + self.tube,
            })
            .collect())
    }
}

/// Model together with the raw solution of the main program, which can seed
/// the next solve in a sweep.
#[derive(Debug, Clone)]
pub struct SvrFit {
    pub model: SvrModel,
    pub solution: QpSolution,
}

pub fn fit_svr(
    data: &Dataset,
    tau: f64,
    rho: f64,
    kernel: &KernelSpec,
    settings: &SolverSettings,
) -> Result<SvrModel, ModelError> {
    data.require_nonempty()?;
    let gram = gram_for(kernel, data)?;
    Ok(fit_svr_with_gram(data, &gram, tau, rho, settings, None)?.model)
}

/// Fits with a precomputed Gram matrix of `data.inputs()`.
pub fn fit_svr_with_gram(
    data: &Dataset,
    gram: &GramMatrix,
    tau: f64,
    rho: f64,
    settings: &SolverSettings,
    warm: Option<&WarmStart>,
) -> Result<SvrFit, ModelError> {
    data.require_nonempty()?;
    let y = DVector::from_column_slice(data.require_outputs()?);
    require_positive("tau", tau)?;
    require_positive("rho", rho)?;
    let n = data.len();
    if gram.dim() != n {
        return Err(ModelError::Inconsistent("Gram matrix does not match the data".into()));
    }

    let (problem, solution) = with_jitter(&gram.values, |k| {
        let problem = main_program(k, &y, tau, rho)?;
        let solution = solve_qp_warm(&problem, settings, warm)?;
        Ok((problem, solution))
    })?;
    require_optimal(&solution)?;
    let kkt = kkt_residuals(&problem, &solution).max();

    let alpha = solution.primal.rows(0, n).clone_owned();
    let k_alpha = &gram.values * &alpha;
    let residuals = &y - &k_alpha;
    let (tube, offset) = tie_break(residuals.as_slice(), rho);

    let slacks: Vec<f64> = residuals.iter().map(|r| ((r - offset).abs() - tube).max(0.0)).collect();
    let active_tol = default_active_tol(tube);
    let s_star = residuals.iter().filter(|r| (*r - offset).abs() >= tube - active_tol).count();
    let model = SvrModel {
        w_norm_sq: alpha.dot(&k_alpha).max(0.0),
        dual_coeffs: alpha.as_slice().to_vec(),
        offset,
        tube,
        ridge_weight: tau,
        relax_weight: rho,
        kernel: gram.spec,
        support_inputs: data.inputs().to_vec(),
        slacks,
        s_star,
        kkt_residual: kkt,
    };
    Ok(SvrFit { model, solution })
}

/// Variables `(α, γ, b, ξ)`; minimize `γ + τ αᵀKα + ρ Σξ` subject to
/// `|yᵢ - (Kα)ᵢ - b| ≤ γ + ξᵢ`, `γ ≥ 0`, `ξ ≥ 0`.
fn main_program(k: &DMatrix<f64>, y: &DVector<f64>, tau: f64, rho: f64) -> Result<QpProblem, crate::error::QpError> {
    let n = y.len();
    let nv = 2 * n + 2;
    let (ig, ib, ix) = (n, n + 1, n + 2);
    let mut p = DMatrix::zeros(nv, nv);
    p.view_mut((0, 0), (n, n)).copy_from(&(k * (2.0 * tau)));
    let mut q = DVector::zeros(nv);
    q[ig] = 1.0;
    q.rows_mut(ix, n).fill(rho);

    let m = 3 * n + 1;
    let mut a = DMatrix::zeros(m, nv);
    let mut l = DVector::from_element(m, f64::NEG_INFINITY);
    let mut u = DVector::from_element(m, f64::INFINITY);
    a.view_mut((0, 0), (n, n)).copy_from(k);
    a.view_mut((n, 0), (n, n)).copy_from(k);
    for i in 0..n {
        a[(i, ig)] = 1.0;
        a[(i, ib)] = 1.0;
        a[(i, ix + i)] = 1.0;
        l[i] = y[i];
        a[(n + i, ig)] = -1.0;
        a[(n + i, ib)] = 1.0;
        a[(n + i, ix + i)] = -1.0;
        u[n + i] = y[i];
        a[(2 * n + 1 + i, ix + i)] = 1.0;
        l[2 * n + 1 + i] = 0.0;
    }
    a[(2 * n, ig)] = 1.0;
    l[2 * n] = 0.0;
    QpProblem::new(p, q, a, l, u)
}

/// With `Kα` pinned, picks the smallest tube and then the smallest `|b|`
/// among optimal `(γ, b, ξ)` of the remaining linear program.
///
/// In the tube edges `U = b + γ` and `L = b - γ` that program reads
/// `(U - L)/2 + ρ Σ (rᵢ - U)₊ + ρ Σ (L - rᵢ)₊` subject to `U ≥ L`, which
/// separates into two one-dimensional quantile problems.
pub(crate) fn tie_break(r: &[f64], rho: f64) -> (f64, f64) {
    let mut desc = r.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let (ua, ub) = upper_edge_minimizers(&desc, rho);
    let neg_desc: Vec<f64> = desc.iter().rev().map(|v| -v).collect();
    let (la, lb) = {
        let (a, b) = upper_edge_minimizers(&neg_desc, rho);
        (-b, -a)
    };
    if ub >= la {
        if ua >= lb {
            return ((ua - lb) / 2.0, (ua + lb) / 2.0);
        }
        return (0.0, 0.0_f64.clamp(ua.max(la), ub.min(lb)));
    }
    // edges cross: zero tube at a median of the residuals
    let n = desc.len();
    let (lo, hi) = if n % 2 == 1 {
        (desc[n / 2], desc[n / 2])
    } else {
        (desc[n / 2], desc[n / 2 - 1])
    };
    (0.0, 0.0_f64.clamp(lo, hi))
}

/// Minimizer interval of `U/2 + ρ Σ (rᵢ - U)₊` for residuals sorted in
/// descending order; `-∞` ends mean the objective keeps decreasing.
fn upper_edge_minimizers(desc: &[f64], rho: f64) -> (f64, f64) {
    let n = desc.len();
    let c = 0.5 / rho;
    let nearest = c.round();
    let integral = (c - nearest).abs() <= 1e-12 * c.max(1.0);
    let m = if integral { nearest } else { c.floor() };
    let at = |k: f64| if k < n as f64 { desc[k as usize] } else { f64::NEG_INFINITY };
    let lower = at(m);
    let upper = if integral && m >= 1.0 { at(m - 1.0) } else { lower };
    (lower, upper)
}

/// Number of points on or outside the tube boundary.
pub fn svr_complexity(model: &SvrModel, data: &Dataset, active_tol: f64) -> Result<usize, ModelError> {
    let y = data.require_outputs()?;
    let centers = model.centers(data.inputs())?;
    Ok(centers
        .iter()
        .zip(y)
        .filter(|(c, yi)| (*yi - *c).abs() >= model.tube - active_tol)
        .count())
}
