//! Kernel functions and Gram matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::KernelError;

/// Similarity function between input vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "KernelRecord")]
pub enum KernelSpec {
    Linear,
    /// `exp(-‖a - b‖² / width)`
    Gaussian { width: f64 },
    /// `(a·b + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
}

/// Flat form accepted on input, so that stray parameters are rejected for
/// every kind.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelRecord {
    kind: String,
    width: Option<f64>,
    degree: Option<u32>,
    offset: Option<f64>,
}

impl TryFrom<KernelRecord> for KernelSpec {
    type Error = String;

    fn try_from(r: KernelRecord) -> Result<Self, String> {
        let unexpected = |name: &str| format!("kernel kind `{}` takes no `{name}`", r.kind);
        match (r.kind.as_str(), r.width, r.degree, r.offset) {
            ("linear", None, None, None) => Ok(KernelSpec::Linear),
            ("gaussian", Some(width), None, None) => Ok(KernelSpec::Gaussian { width }),
            ("gaussian", None, ..) => Err("gaussian kernel needs `width`".into()),
            ("polynomial", None, Some(degree), Some(offset)) => Ok(KernelSpec::Polynomial { degree, offset }),
            ("polynomial", None, ..) => Err("polynomial kernel needs `degree` and `offset`".into()),
            ("linear" | "polynomial", Some(_), ..) => Err(unexpected("width")),
            ("linear" | "gaussian", _, Some(_), _) => Err(unexpected("degree")),
            ("linear" | "gaussian", _, _, Some(_)) => Err(unexpected("offset")),
            (other, ..) => Err(format!("unknown kernel kind `{other}`")),
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Gaussian { width: 1.0 }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Gaussian { width } if width > 0.0 && width.is_finite() => Ok(()),
            KernelSpec::Gaussian { width } => Err(KernelError::InvalidParameter(format!(
                "gaussian width must be positive, got {width}"
            ))),
            KernelSpec::Polynomial { degree, offset } => {
                if degree == 0 {
                    Err(KernelError::InvalidParameter("polynomial degree must be at least 1".into()))
                } else if !(offset >= 0.0) || !offset.is_finite() {
                    Err(KernelError::InvalidParameter(format!(
                        "polynomial offset must be nonnegative, got {offset}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Gaussian { width } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / width).exp()
            }
            KernelSpec::Polynomial { degree, offset } => (dot(a, b) + offset).powi(degree as i32),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64, KernelError> {
    if a.len() != b.len() {
        return Err(KernelError::DimensionMismatch(a.len(), b.len()));
    }
    spec.validate()?;
    Ok(spec.eval_unchecked(a, b))
}

#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    pub spec: KernelSpec,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.values.trace()
    }
}

fn check_dims<T: AsRef<[f64]>>(inputs: &[T]) -> Result<usize, KernelError> {
    let first = inputs.first().ok_or(KernelError::Empty)?.as_ref().len();
    for x in inputs {
        if x.as_ref().len() != first {
            return Err(KernelError::DimensionMismatch(first, x.as_ref().len()));
        }
    }
    Ok(first)
}

/// Builds the Gram matrix from the upper triangle and mirrors it.
pub fn gram_matrix<T: AsRef<[f64]> + Sync>(spec: &KernelSpec, inputs: &[T]) -> Result<GramMatrix, KernelError> {
    spec.validate()?;
    check_dims(inputs)?;
    let n = inputs.len();
    // Column j holds rows 0..=j.
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let b = inputs[j].as_ref();
            (0..=j).map(|i| spec.eval_unchecked(inputs[i].as_ref(), b)).collect()
        })
        .collect();
    let mut values = DMatrix::zeros(n, n);
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(GramMatrix { values, spec: *spec })
}

/// Kernel values between `points` (rows) and `inputs` (columns).
pub fn cross_kernel<A, B>(spec: &KernelSpec, points: &[A], inputs: &[B]) -> Result<DMatrix<f64>, KernelError>
where
    A: AsRef<[f64]> + Sync,
    B: AsRef<[f64]> + Sync,
{
    spec.validate()?;
    if points.is_empty() {
        return Ok(DMatrix::zeros(0, inputs.len()));
    }
    let d = check_dims(inputs)?;
    let dp = check_dims(points)?;
    if d != dp {
        return Err(KernelError::DimensionMismatch(d, dp));
    }
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| inputs.iter().map(|x| spec.eval_unchecked(p.as_ref(), x.as_ref())).collect())
        .collect();
    Ok(DMatrix::from_fn(points.len(), inputs.len(), |i, j| rows[i][j]))
}

/// True iff the smallest eigenvalue is at least `-tolerance · ‖g‖₂`.
pub fn psd_check(g: &DMatrix<f64>, tolerance: f64) -> bool {
    if g.nrows() == 0 {
        return true;
    }
    let eig = SymmetricEigen::new(g.clone());
    let norm = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    min >= -tolerance * norm
}

/// Diagonal jitter used when a Gram-based factorization fails.
pub fn jitter(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows().max(1) as f64;
    1e-10 * g.trace().abs().max(f64::MIN_POSITIVE) / n
}
