use nalgebra::{DMatrix, DVector};

use super::{gram_for, kernel_expansion, require_optimal, require_positive, with_jitter, Dataset, Prediction};
use crate::error::ModelError;
use crate::kernels::{GramMatrix, KernelSpec};
use crate::qp::{kkt_residuals, solve_qp, QpProblem, SolverSettings};

const MARGIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// `w = Σ αᵢ φ(uᵢ)`.
    pub dual_coeffs: Vec<f64>,
    pub offset: f64,
    pub w_is_zero: bool,
    pub relax_weight: f64,
    pub kernel: KernelSpec,
    pub support_inputs: Vec<Vec<f64>>,
    pub slacks: Vec<f64>,
    pub s_star: usize,
    pub w_norm_sq: f64,
    /// Largest KKT residual of the main quadratic program.
    pub kkt_residual: f64,
}

impl SvmModel {
    /// `⟨w, φ(u)⟩ - b` at each input.
    pub fn scores(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        let f = kernel_expansion(&self.kernel, &self.support_inputs, &self.dual_coeffs, inputs)?;
        Ok(f.iter().map(|v| v - self.offset).collect())
    }

    pub fn predict_many(&self, inputs: &[Vec<f64>]) -> Result<Vec<Prediction>, ModelError> {
        Ok(self
            .scores(inputs)?
            .into_iter()
            .map(|score| Prediction::Class {
                label: if score >= 0.0 { 1.0 } else { -1.0 },
                score,
            })
            .collect())
    }
}

pub fn fit_svm(data: &Dataset, rho: f64, kernel: &KernelSpec, settings: &SolverSettings) -> Result<SvmModel, ModelError> {
    data.require_nonempty()?;
    let gram = gram_for(kernel, data)?;
    fit_svm_with_gram(data, &gram, rho, settings)
}

pub fn fit_svm_with_gram(
    data: &Dataset,
    gram: &GramMatrix,
    rho: f64,
    settings: &SolverSettings,
) -> Result<SvmModel, ModelError> {
    data.require_nonempty()?;
    let labels = data.require_labels()?.to_vec();
    require_positive("rho", rho)?;
    let n = data.len();
    if gram.dim() != n {
        return Err(ModelError::Inconsistent("Gram matrix does not match the data".into()));
    }
    let y = DVector::from_column_slice(&labels);
    let (problem, sol) = with_jitter(&gram.values, |k| {
        let problem = main_program(k, &y, rho)?;
        let sol = solve_qp(&problem, settings)?;
        Ok((problem, sol))
    })?;
    require_optimal(&sol)?;
    let kkt = kkt_residuals(&problem, &sol).max();

    let mut alpha = sol.primal.rows(0, n).clone_owned();
    let mut k_alpha = &gram.values * &alpha;
    let w_norm_sq = alpha.dot(&k_alpha).max(0.0);
    let w_is_zero = w_norm_sq <= 1e-8 * gram.trace().abs() / n as f64;
    if w_is_zero {
        alpha.fill(0.0);
        k_alpha.fill(0.0);
    }
    let margins = k_alpha.component_mul(&y);
    let mut offset = tie_break(margins.as_slice(), &labels);
    if w_is_zero {
        offset = if offset >= 0.0 { 1.0 } else { -1.0 };
    }

    let slack_of = |i: usize| 1.0 - y[i] * (k_alpha[i] - offset);
    let slacks = (0..n).map(|i| slack_of(i).max(0.0)).collect();
    let s_star = if w_is_zero {
        minority_count(&labels)
    } else {
        (0..n).filter(|&i| slack_of(i) >= -MARGIN_TOL).count()
    };
    Ok(SvmModel {
        dual_coeffs: alpha.as_slice().to_vec(),
        offset,
        w_is_zero,
        relax_weight: rho,
        kernel: gram.spec,
        support_inputs: data.inputs().to_vec(),
        slacks,
        s_star,
        w_norm_sq: if w_is_zero { 0.0 } else { w_norm_sq },
        kkt_residual: kkt,
    })
}

/// Size of the smaller class; half the data on an exact tie.
fn minority_count(labels: &[f64]) -> usize {
    let pos = labels.iter().filter(|&&v| v > 0.0).count();
    pos.min(labels.len() - pos)
}

/// Variables `(α, b, ξ)`; minimize `αᵀKα + ρ Σξ` subject to
/// `yᵢ((Kα)ᵢ - b) + ξᵢ ≥ 1`, `ξ ≥ 0`.
fn main_program(k: &DMatrix<f64>, y: &DVector<f64>, rho: f64) -> Result<QpProblem, crate::error::QpError> {
    let n = y.len();
    let nv = 2 * n + 1;
    let (ib, ix) = (n, n + 1);
    let mut p = DMatrix::zeros(nv, nv);
    p.view_mut((0, 0), (n, n)).copy_from(&(k * 2.0));
    let mut q = DVector::zeros(nv);
    q.rows_mut(ix, n).fill(rho);
    let m = 2 * n;
    let mut a = DMatrix::zeros(m, nv);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = y[i] * k[(i, j)];
        }
        a[(i, ib)] = -y[i];
        a[(i, ix + i)] = 1.0;
        a[(n + i, ix + i)] = 1.0;
    }
    let mut l = DVector::from_element(m, 0.0);
    l.rows_mut(0, n).fill(1.0);
    let u = DVector::from_element(m, f64::INFINITY);
    QpProblem::new(p, q, a, l, u)
}

/// With the margins `yᵢ(Kα)ᵢ` pinned, picks the offset closest to `-1`
/// among minimizers of `Σ (1 - marginᵢ + yᵢ b)₊`, a convex piecewise-linear
/// function of `b` alone.
pub(crate) fn tie_break(margins: &[f64], labels: &[f64]) -> f64 {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (m, y) in margins.iter().zip(labels) {
        if *y > 0.0 {
            pos.push(m - 1.0);
        } else {
            neg.push(1.0 - m);
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let right_slope = |t: f64| {
        pos.partition_point(|&p| p <= t) as i64 - (neg.len() - neg.partition_point(|&q| q <= t)) as i64
    };
    let left_slope =
        |t: f64| pos.partition_point(|&p| p < t) as i64 - (neg.len() - neg.partition_point(|&q| q < t)) as i64;
    let breaks = || pos.iter().chain(neg.iter()).copied();
    let lo = if neg.is_empty() {
        f64::NEG_INFINITY
    } else {
        breaks().filter(|&t| right_slope(t) >= 0).fold(f64::INFINITY, f64::min)
    };
    let hi = if pos.is_empty() {
        f64::INFINITY
    } else {
        breaks().filter(|&t| left_slope(t) <= 0).fold(f64::NEG_INFINITY, f64::max)
    };
    (-1.0_f64).clamp(lo, hi)
}

/// Number of points with `1 - yᵢ(⟨w, uᵢ⟩ - b) ≥ -active_tol`, or the size of
/// the minority class when `w = 0`.
pub fn svm_complexity(model: &SvmModel, data: &Dataset, active_tol: f64) -> Result<usize, ModelError> {
    let y = data.require_labels()?;
    if model.w_is_zero {
        return Ok(minority_count(y));
    }
    let scores = model.scores(data.inputs())?;
    Ok(scores
        .iter()
        .zip(y)
        .filter(|(s, yi)| 1.0 - *yi * *s >= -active_tol)
        .count())
}
