//! Support-vector regression, data description and classification as relaxed
//! scenario programs, with complexity counting and risk certificates.

mod io;
mod svdd;
mod svm;
mod svr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, QpError};
use crate::kernels::{cross_kernel, gram_matrix, jitter, GramMatrix, KernelSpec};
use crate::qp::{QpSolution, SolveStatus};
use crate::risk_bounds::{epsilon_bounds, BoundQuery, RiskInterval};

pub use io::{CertificateRecord, ModelDocument};
pub use svdd::{fit_svdd, fit_svdd_with_gram, svdd_complexity, SvddModel};
pub use svm::{fit_svm, fit_svm_with_gram, svm_complexity, SvmModel};
pub use svr::{fit_svr, fit_svr_with_gram, svr_complexity, SvrFit, SvrModel};

/// Training or evaluation data. SVDD ignores `outputs`; SVM expects labels
/// in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    outputs: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Option<Vec<f64>>) -> Result<Self, ModelError> {
        if let Some(first) = inputs.first() {
            let d = first.len();
            if let Some(bad) = inputs.iter().find(|x| x.len() != d) {
                return Err(crate::error::KernelError::DimensionMismatch(d, bad.len()).into());
            }
        }
        if let Some(out) = &outputs {
            if out.len() != inputs.len() {
                return Err(ModelError::LengthMismatch {
                    inputs: inputs.len(),
                    outputs: out.len(),
                });
            }
        }
        Ok(Self { inputs, outputs })
    }

    /// Scalar inputs with outputs.
    pub fn from_scalars(inputs: &[f64], outputs: &[f64]) -> Result<Self, ModelError> {
        Self::new(inputs.iter().map(|&m| vec![m]).collect(), Some(outputs.to_vec()))
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> Option<&[f64]> {
        self.outputs.as_deref()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    fn require_outputs(&self) -> Result<&[f64], ModelError> {
        self.outputs.as_deref().ok_or(ModelError::MissingOutputs)
    }

    fn require_nonempty(&self) -> Result<(), ModelError> {
        if self.is_empty() {
            Err(ModelError::EmptyData)
        } else {
            Ok(())
        }
    }

    fn require_labels(&self) -> Result<&[f64], ModelError> {
        let y = self.require_outputs()?;
        if let Some(&bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(ModelError::InvalidLabel(bad));
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Svr,
    Svdd,
    SvmViolation,
    SvmMisclassification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateSemantics {
    /// Both endpoints bound the probability of violating the constraint.
    Violation,
    /// Only the upper endpoint is binding, for the misclassification event.
    MisclassificationUpper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskCertificate {
    pub kind: CertificateKind,
    pub complexity: usize,
    pub interval: RiskInterval,
    pub confidence: f64,
    pub semantics: CertificateSemantics,
}

pub fn certify(kind: CertificateKind, s_star: usize, n: usize, beta: f64) -> Result<RiskCertificate, ModelError> {
    let interval = epsilon_bounds(&BoundQuery::new(n, s_star, beta)?)?;
    let (confidence, semantics) = match kind {
        CertificateKind::Svr | CertificateKind::Svdd => (1.0 - beta, CertificateSemantics::Violation),
        CertificateKind::SvmViolation => (1.0 - 3.0 * beta, CertificateSemantics::Violation),
        CertificateKind::SvmMisclassification => (1.0 - 3.0 * beta, CertificateSemantics::MisclassificationUpper),
    };
    Ok(RiskCertificate {
        kind,
        complexity: s_star,
        interval,
        confidence,
        semantics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    /// SVR tube `[center - tube, center + tube]`.
    Interval { center: f64, lower: f64, upper: f64 },
    /// SVM class; a zero score is classified as `+1`.
    Class { label: f64, score: f64 },
    /// SVDD membership: `distance_sq <= radius_sq`.
    Membership { inside: bool, distance_sq: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Svr(SvrModel),
    Svdd(SvddModel),
    Svm(SvmModel),
}

impl TrainedModel {
    pub fn method(&self) -> &'static str {
        match self {
            TrainedModel::Svr(_) => "svr",
            TrainedModel::Svdd(_) => "svdd",
            TrainedModel::Svm(_) => "svm",
        }
    }

    pub fn s_star(&self) -> usize {
        match self {
            TrainedModel::Svr(m) => m.s_star,
            TrainedModel::Svdd(m) => m.s_star,
            TrainedModel::Svm(m) => m.s_star,
        }
    }

    pub fn n_train(&self) -> usize {
        match self {
            TrainedModel::Svr(m) => m.support_inputs.len(),
            TrainedModel::Svdd(m) => m.support_inputs.len(),
            TrainedModel::Svm(m) => m.support_inputs.len(),
        }
    }

    pub fn certificate_kind(&self) -> CertificateKind {
        match self {
            TrainedModel::Svr(_) => CertificateKind::Svr,
            TrainedModel::Svdd(_) => CertificateKind::Svdd,
            TrainedModel::Svm(_) => CertificateKind::SvmViolation,
        }
    }

    pub fn certify(&self, beta: f64) -> Result<RiskCertificate, ModelError> {
        certify(self.certificate_kind(), self.s_star(), self.n_train(), beta)
    }

    pub fn predict(&self, input: &[f64]) -> Result<Prediction, ModelError> {
        Ok(self.predict_many(&[input.to_vec()])?[0])
    }

    pub fn predict_many(&self, inputs: &[Vec<f64>]) -> Result<Vec<Prediction>, ModelError> {
        match self {
            TrainedModel::Svr(m) => m.predict_many(inputs),
            TrainedModel::Svdd(m) => m.predict_many(inputs),
            TrainedModel::Svm(m) => m.predict_many(inputs),
        }
    }

    /// Whether the scenario `(input, output)` violates the model's
    /// constraint strictly.
    pub fn violations(&self, data: &Dataset) -> Result<Vec<bool>, ModelError> {
        let preds = self.predict_many(data.inputs())?;
        match self {
            TrainedModel::Svdd(_) => Ok(preds
                .iter()
                .map(|p| match *p {
                    Prediction::Membership { inside, .. } => !inside,
                    _ => unreachable!(),
                })
                .collect()),
            TrainedModel::Svr(m) => {
                let y = data.require_outputs()?;
                Ok(preds
                    .iter()
                    .zip(y)
                    .map(|(p, &yi)| match *p {
                        Prediction::Interval { center, .. } => (yi - center).abs() - m.tube > 0.0,
                        _ => unreachable!(),
                    })
                    .collect())
            }
            TrainedModel::Svm(_) => {
                let y = data.require_labels()?;
                Ok(preds
                    .iter()
                    .zip(y)
                    .map(|(p, &yi)| match *p {
                        Prediction::Class { score, .. } => 1.0 - yi * score > 0.0,
                        _ => unreachable!(),
                    })
                    .collect())
            }
        }
    }
}

/// Default activity tolerance relative to a scale such as the tube size.
pub fn default_active_tol(scale: f64) -> f64 {
    1e-6 * (1.0 + scale.abs())
}

pub(crate) fn gram_for(kernel: &KernelSpec, data: &Dataset) -> Result<GramMatrix, ModelError> {
    Ok(gram_matrix(kernel, data.inputs())?)
}

/// `K α` evaluated at new inputs.
pub(crate) fn kernel_expansion(
    kernel: &KernelSpec,
    support: &[Vec<f64>],
    coeffs: &[f64],
    inputs: &[Vec<f64>],
) -> Result<DVector<f64>, ModelError> {
    if inputs.is_empty() {
        return Ok(DVector::zeros(0));
    }
    if let (Some(a), Some(b)) = (support.first(), inputs.first()) {
        if a.len() != b.len() {
            return Err(crate::error::KernelError::DimensionMismatch(a.len(), b.len()).into());
        }
    }
    let k = cross_kernel(kernel, inputs, support)?;
    Ok(k * DVector::from_column_slice(coeffs))
}

/// Runs `solve` on the Gram matrix, retrying once with diagonal jitter if a
/// factorization reports an indefinite matrix.
pub(crate) fn with_jitter<T>(
    k: &DMatrix<f64>,
    mut solve: impl FnMut(&DMatrix<f64>) -> Result<T, QpError>,
) -> Result<T, ModelError> {
    match solve(k) {
        Err(QpError::NotPositiveDefinite) => {
            let mut kj = k.clone();
            let eps = jitter(k);
            for i in 0..kj.nrows() {
                kj[(i, i)] += eps;
            }
            Ok(solve(&kj)?)
        }
        other => Ok(other?),
    }
}

pub(crate) fn require_optimal(sol: &QpSolution) -> Result<(), ModelError> {
    if sol.status == SolveStatus::Optimal {
        Ok(())
    } else {
        Err(ModelError::Solver { status: sol.status })
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, value })
    }
}
