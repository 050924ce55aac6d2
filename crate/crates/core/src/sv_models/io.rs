//! JSON documents for trained models.

use serde::{Deserialize, Serialize};

use super::{SvddModel, SvmModel, SvrModel, TrainedModel};
use crate::error::ModelError;
use crate::kernels::KernelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateRecord {
    pub lower: f64,
    pub upper: f64,
    pub beta: f64,
    pub confidence: f64,
}

/// Serialized form of a [`TrainedModel`] and its certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub method: String,
    pub kernel: KernelSpec,
    pub dual_coeffs: Vec<f64>,
    /// `b` for SVR and SVM; zero for SVDD.
    pub offset: f64,
    /// Tube half-width for SVR, squared radius for SVDD, zero for SVM.
    pub tube_or_radius: f64,
    pub relax_weight: f64,
    pub n_train: usize,
    pub s_star: usize,
    pub certificate: CertificateRecord,
    pub support_inputs: Vec<Vec<f64>>,
    pub slacks: Vec<f64>,
    /// `‖w‖²` for SVR and SVM, `‖c‖²` for SVDD.
    pub norm_sq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_is_zero: Option<bool>,
}

impl ModelDocument {
    pub fn new(model: &TrainedModel, beta: f64) -> Result<Self, ModelError> {
        let cert = model.certify(beta)?;
        let certificate = CertificateRecord {
            lower: cert.interval.lower,
            upper: cert.interval.upper,
            beta,
            confidence: cert.confidence,
        };
        let doc = match model {
            TrainedModel::Svr(m) => Self {
                method: "svr".into(),
                kernel: m.kernel,
                dual_coeffs: m.dual_coeffs.clone(),
                offset: m.offset,
                tube_or_radius: m.tube,
                relax_weight: m.relax_weight,
                n_train: m.support_inputs.len(),
                s_star: m.s_star,
                certificate,
                support_inputs: m.support_inputs.clone(),
                slacks: m.slacks.clone(),
                norm_sq: m.w_norm_sq,
                ridge_weight: Some(m.ridge_weight),
                w_is_zero: None,
            },
            TrainedModel::Svdd(m) => Self {
                method: "svdd".into(),
                kernel: m.kernel,
                dual_coeffs: m.dual_coeffs.clone(),
                offset: 0.0,
                tube_or_radius: m.radius_sq,
                relax_weight: m.relax_weight,
                n_train: m.support_inputs.len(),
                s_star: m.s_star,
                certificate,
                support_inputs: m.support_inputs.clone(),
                slacks: m.slacks.clone(),
                norm_sq: m.center_norm_sq,
                ridge_weight: None,
                w_is_zero: None,
            },
            TrainedModel::Svm(m) => Self {
                method: "svm".into(),
                kernel: m.kernel,
                dual_coeffs: m.dual_coeffs.clone(),
                offset: m.offset,
                tube_or_radius: 0.0,
                relax_weight: m.relax_weight,
                n_train: m.support_inputs.len(),
                s_star: m.s_star,
                certificate,
                support_inputs: m.support_inputs.clone(),
                slacks: m.slacks.clone(),
                norm_sq: m.w_norm_sq,
                ridge_weight: None,
                w_is_zero: Some(m.w_is_zero),
            },
        };
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: Self = serde_json::from_str(text)?;
        doc.check()?;
        Ok(doc)
    }

    fn check(&self) -> Result<(), ModelError> {
        if !matches!(self.method.as_str(), "svr" | "svdd" | "svm") {
            return Err(ModelError::UnknownMethod(self.method.clone()));
        }
        let n = self.n_train;
        if self.dual_coeffs.len() != n || self.support_inputs.len() != n || self.slacks.len() != n {
            return Err(ModelError::Inconsistent(format!(
                "expected {n} coefficients, inputs and slacks"
            )));
        }
        if self.s_star > n {
            return Err(ModelError::Inconsistent("s_star exceeds n_train".into()));
        }
        self.kernel.validate()?;
        Ok(())
    }

    /// Rebuilds the model. The KKT diagnostic is not stored and reads as 0.
    pub fn to_model(&self) -> Result<TrainedModel, ModelError> {
        self.check()?;
        let model = match self.method.as_str() {
            "svr" => TrainedModel::Svr(SvrModel {
                dual_coeffs: self.dual_coeffs.clone(),
                offset: self.offset,
                tube: self.tube_or_radius,
                ridge_weight: self
                    .ridge_weight
                    .ok_or_else(|| ModelError::Inconsistent("svr model lacks ridge_weight".into()))?,
                relax_weight: self.relax_weight,
                kernel: self.kernel,
                support_inputs: self.support_inputs.clone(),
                slacks: self.slacks.clone(),
                s_star: self.s_star,
                w_norm_sq: self.norm_sq,
                kkt_residual: 0.0,
            }),
            "svdd" => TrainedModel::Svdd(SvddModel {
                dual_coeffs: self.dual_coeffs.clone(),
                radius_sq: self.tube_or_radius,
                relax_weight: self.relax_weight,
                kernel: self.kernel,
                support_inputs: self.support_inputs.clone(),
                slacks: self.slacks.clone(),
                s_star: self.s_star,
                center_norm_sq: self.norm_sq,
                kkt_residual: 0.0,
            }),
            "svm" => TrainedModel::Svm(SvmModel {
                dual_coeffs: self.dual_coeffs.clone(),
                offset: self.offset,
                w_is_zero: self
                    .w_is_zero
                    .ok_or_else(|| ModelError::Inconsistent("svm model lacks w_is_zero".into()))?,
                relax_weight: self.relax_weight,
                kernel: self.kernel,
                support_inputs: self.support_inputs.clone(),
                slacks: self.slacks.clone(),
                s_star: self.s_star,
                w_norm_sq: self.norm_sq,
                kkt_residual: 0.0,
            }),
            other => return Err(ModelError::UnknownMethod(other.into())),
        };
        Ok(model)
    }
}
