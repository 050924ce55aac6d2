use nalgebra::{DMatrix, DVector};

use super::{
    default_active_tol, gram_for, kernel_expansion, require_optimal, require_positive, with_jitter, Dataset,
    Prediction,
};
use crate::error::ModelError;
use crate::kernels::{cross_kernel, GramMatrix, KernelSpec};
use crate::qp::{kkt_residuals, solve_qp, QpProblem, SolverSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct SvddModel {
    /// Center `c = Σ βᵢ φ(pᵢ)`.
    pub dual_coeffs: Vec<f64>,
    /// Squared radius `γ`.
    pub radius_sq: f64,
    pub relax_weight: f64,
    pub kernel: KernelSpec,
    pub support_inputs: Vec<Vec<f64>>,
    pub slacks: Vec<f64>,
    pub s_star: usize,
    /// `βᵀ K β = ‖c‖²`.
    pub center_norm_sq: f64,
    /// Largest KKT residual of the dual program; zero for the centroid case.
    pub kkt_residual: f64,
}

impl SvddModel {
    /// `‖φ(m) - c‖²` at each input.
    pub fn distances_sq(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        let cross = kernel_expansion(&self.kernel, &self.support_inputs, &self.dual_coeffs, inputs)?;
        let diag = self_kernel(&self.kernel, inputs)?;
        Ok((0..inputs.len())
            .map(|i| (diag[i] - 2.0 * cross[i] + self.center_norm_sq).max(0.0))
            .collect())
    }

    pub fn predict_many(&self, inputs: &[Vec<f64>]) -> Result<Vec<Prediction>, ModelError> {
        Ok(self
            .distances_sq(inputs)?
            .into_iter()
            .map(|d| Prediction::Membership {
                inside: d <= self.radius_sq,
                distance_sq: d,
            })
            .collect())
    }
}

fn self_kernel(kernel: &KernelSpec, inputs: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    inputs
        .iter()
        .map(|x| Ok(cross_kernel(kernel, std::slice::from_ref(x), std::slice::from_ref(x))?[(0, 0)]))
        .collect()
}

pub fn fit_svdd(data: &Dataset, rho: f64, kernel: &KernelSpec, settings: &SolverSettings) -> Result<SvddModel, ModelError> {
    data.require_nonempty()?;
    let gram = gram_for(kernel, data)?;
    fit_svdd_with_gram(data, &gram, rho, settings)
}

pub fn fit_svdd_with_gram(
    data: &Dataset,
    gram: &GramMatrix,
    rho: f64,
    settings: &SolverSettings,
) -> Result<SvddModel, ModelError> {
    data.require_nonempty()?;
    require_positive("rho", rho)?;
    let n = data.len();
    if gram.dim() != n {
        return Err(ModelError::Inconsistent("Gram matrix does not match the data".into()));
    }
    let k = &gram.values;

    let (beta, kkt) = if rho * n as f64 > 1.0 {
        let (problem, sol) = with_jitter(k, |k| {
            let problem = dual_program(k, rho)?;
            let sol = solve_qp(&problem, settings)?;
            Ok((problem, sol))
        })?;
        require_optimal(&sol)?;
        (sol.primal.clone(), kkt_residuals(&problem, &sol).max())
    } else {
        (DVector::from_element(n, 1.0 / n as f64), 0.0)
    };

    let k_beta = k * &beta;
    let center_norm_sq = beta.dot(&k_beta).max(0.0);
    let d2: Vec<f64> = (0..n)
        .map(|i| (k[(i, i)] - 2.0 * k_beta[i] + center_norm_sq).max(0.0))
        .collect();
    let radius_sq = smallest_optimal_radius(&d2, rho);
    let slacks = d2.iter().map(|d| (d - radius_sq).max(0.0)).collect();
    let tol = default_active_tol(radius_sq);
    let s_star = d2.iter().filter(|&&d| d >= radius_sq - tol).count();
    Ok(SvddModel {
        dual_coeffs: beta.as_slice().to_vec(),
        radius_sq,
        relax_weight: rho,
        kernel: gram.spec,
        support_inputs: data.inputs().to_vec(),
        slacks,
        s_star,
        center_norm_sq,
        kkt_residual: kkt,
    })
}

/// `min βᵀKβ - Σ βᵢ Kᵢᵢ` subject to `Σ β = 1`, `0 ≤ β ≤ ρ`.
fn dual_program(k: &DMatrix<f64>, rho: f64) -> Result<QpProblem, crate::error::QpError> {
    let n = k.nrows();
    let p = k * 2.0;
    let q = -k.diagonal();
    let mut a = DMatrix::zeros(n + 1, n);
    a.row_mut(0).fill(1.0);
    a.view_mut((1, 0), (n, n)).fill_with_identity();
    let mut l = DVector::zeros(n + 1);
    let mut u = DVector::from_element(n + 1, rho);
    l[0] = 1.0;
    u[0] = 1.0;
    QpProblem::new(p, q, a, l, u)
}

/// Smallest minimizer of `γ + ρ Σ max(0, dᵢ² - γ)` over `γ ≥ 0`.
///
/// The slope is `1 - ρ·#{dᵢ² > γ}`, so the minimizer is the `(M+1)`-th
/// largest squared distance with `M = ⌊1/ρ⌋`, or zero when `M ≥ N`.
fn smallest_optimal_radius(d2: &[f64], rho: f64) -> f64 {
    let mut sorted = d2.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let inv = 1.0 / rho * (1.0 + 1e-12);
    if inv >= sorted.len() as f64 {
        return 0.0;
    }
    sorted[inv.floor() as usize]
}

/// Number of points on or outside the sphere.
pub fn svdd_complexity(model: &SvddModel, data: &Dataset, active_tol: f64) -> Result<usize, ModelError> {
    Ok(model
        .distances_sq(data.inputs())?
        .into_iter()
        .filter(|&d| d >= model.radius_sq - active_tol)
        .count())
}
