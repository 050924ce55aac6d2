//! The noisy-sinc regression experiment: data generation, cost-risk sweeps
//! over the relaxation weight and Monte Carlo coverage checks.

mod csv_io;

use rand::rngs::ChaCha20Rng;
use rand::{RngExt, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::Laplace;

use crate::error::{DataError, ModelError};
use crate::kernels::{gram_matrix, KernelSpec};
use crate::qp::{SolverSettings, WarmStart};
use crate::sv_models::{certify, fit_svr_with_gram, CertificateKind, Dataset, TrainedModel};

pub use csv_io::{
    read_bounds_csv, read_dataset_csv, read_sweep_csv, read_validation_csv, write_bounds_csv, write_dataset_csv,
    write_sweep_csv, write_validation_csv, BoundsRow,
};

/// Stream used by [`gen_sinc`]; Monte Carlo trials use streams `2t + 1`
/// (training) and `2t + 2` (test).
const DATASET_STREAM: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SincConfig {
    pub n_train: usize,
    pub input_range: (f64, f64),
    /// Scale `b` of the Laplace noise.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SincConfig {
    fn default() -> Self {
        Self {
            n_train: 2000,
            input_range: (-3.0, 3.0),
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

impl SincConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_train == 0 {
            return Err(DataError::Config("n_train must be at least 1".into()));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(DataError::Config(format!(
                "noise_scale must be positive, got {}",
                self.noise_scale
            )));
        }
        let (lo, hi) = self.input_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(DataError::Config("input_range must be a finite interval".into()));
        }
        Ok(())
    }
}

/// `sin(πx) / (πx)`, with value 1 at the origin.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_sinc(config: &SincConfig, stream: u64, n: usize) -> Result<Dataset, DataError> {
    let mut rng = stream_rng(config.seed, stream);
    let noise = Laplace::new(0.0, config.noise_scale).map_err(|e| DataError::Config(e.to_string()))?;
    let (lo, hi) = config.input_range;
    let mut inputs = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    for _ in 0..n {
        let m = rng.random_range(lo..=hi);
        let e: f64 = rng.sample(noise);
        inputs.push(vec![m]);
        outputs.push(sinc(m) + e);
    }
    Ok(Dataset::new(inputs, Some(outputs))?)
}

/// Draws `n_train` points `(m, sinc(m) + e)` with `m` uniform on the input
/// range and Laplace noise `e`.
pub fn gen_sinc(config: &SincConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    sample_sinc(config, DATASET_STREAM, config.n_train)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRiskRow {
    pub rho: f64,
    pub cost: f64,
    pub tube: f64,
    pub complexity: usize,
    pub eps_lower: f64,
    pub eps_upper: f64,
}

/// A sweep row whose fit failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFailure {
    pub rho: f64,
    pub message: String,
}

pub type SweepRow = Result<CostRiskRow, RowFailure>;

/// Fits the SVR once per relaxation weight, in order, seeding each solve with
/// the previous solution. A failed row does not stop the sweep.
pub fn rho_sweep(
    data: &Dataset,
    rhos: &[f64],
    tau: f64,
    kernel: &KernelSpec,
    beta: f64,
    settings: &SolverSettings,
) -> Result<Vec<SweepRow>, ModelError> {
    if rhos.is_empty() {
        return Err(ModelError::Inconsistent("no relaxation weights given".into()));
    }
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let gram = gram_matrix(kernel, data.inputs())?;
    let mut warm: Option<WarmStart> = None;
    let mut rows = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let row = fit_svr_with_gram(data, &gram, tau, rho, settings, warm.as_ref()).and_then(|fit| {
            let cert = certify(CertificateKind::Svr, fit.model.s_star, data.len(), beta)?;
            warm = Some(WarmStart::from(&fit.solution));
            Ok(CostRiskRow {
                rho,
                cost: fit.model.cost(),
                tube: fit.model.tube,
                complexity: fit.model.s_star,
                eps_lower: cert.interval.lower,
                eps_upper: cert.interval.upper,
            })
        });
        rows.push(row.map_err(|e| RowFailure {
            rho,
            message: e.to_string(),
        }));
    }
    Ok(rows)
}

/// Fraction of points that strictly violate the model's constraint.
pub fn empirical_risk(model: &TrainedModel, test_data: &Dataset) -> Result<f64, ModelError> {
    if test_data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let v = model.violations(test_data)?;
    Ok(v.iter().filter(|&&b| b).count() as f64 / v.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub complexity: usize,
    pub empirical_risk: f64,
    pub eps_lower: f64,
    pub eps_upper: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub trials: Vec<TrialResult>,
    pub coverage_count: usize,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationParams {
    pub rho: f64,
    pub tau: f64,
    pub kernel: KernelSpec,
    pub beta: f64,
    pub n_trials: usize,
    pub n_test: usize,
}

/// Repeats fit-and-test on fresh samples and counts how often the empirical
/// risk lands inside the certified interval.
pub fn monte_carlo_validation(
    config: &SincConfig,
    params: &ValidationParams,
    settings: &SolverSettings,
) -> Result<ValidationReport, DataError> {
    config.validate()?;
    if params.n_trials == 0 || params.n_test == 0 {
        return Err(DataError::Config("trials and test size must be at least 1".into()));
    }
    let trials: Vec<TrialResult> = (0..params.n_trials)
        .into_par_iter()
        .map(|t| run_trial(config, params, settings, t))
        .collect::<Result<_, _>>()?;
    let coverage_count = trials.iter().filter(|t| t.covered).count();
    Ok(ValidationReport {
        n_trials: trials.len(),
        trials,
        coverage_count,
    })
}

fn run_trial(
    config: &SincConfig,
    params: &ValidationParams,
    settings: &SolverSettings,
    trial: usize,
) -> Result<TrialResult, DataError> {
    let t = trial as u64;
    let train = sample_sinc(config, 2 * t + 1, config.n_train)?;
    let test = sample_sinc(config, 2 * t + 2, params.n_test)?;
    let gram = gram_matrix(&params.kernel, train.inputs()).map_err(ModelError::from)?;
    let fit = fit_svr_with_gram(&train, &gram, params.tau, params.rho, settings, None)?;
    let cert = certify(CertificateKind::Svr, fit.model.s_star, train.len(), params.beta)?;
    let risk = empirical_risk(&TrainedModel::Svr(fit.model), &test)?;
    Ok(TrialResult {
        trial,
        complexity: cert.complexity,
        empirical_risk: risk,
        eps_lower: cert.interval.lower,
        eps_upper: cert.interval.upper,
        covered: cert.interval.contains(risk),
    })
}
