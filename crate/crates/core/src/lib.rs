//! Risk certificates for scenario programs with constraint relaxation,
//! specialized to kernel support-vector methods.
//!
//! The crate is organized as
//!
//! - [`risk_bounds`]: the certified risk interval `[eps_lower(k), eps_upper(k)]`
//!   as a function of the observed complexity `k`,
//! - [`qp`]: a dense convex QP solver with lexicographic tie-breaking,
//! - [`kernels`]: kernel functions and Gram matrices,
//! - [`sv_models`]: SVR, SVDD and SVM fits with their complexities,
//! - [`experiments`]: the noisy-sinc regression study.

pub mod error;
pub mod experiments;
pub mod kernels;
pub mod qp;
pub mod risk_bounds;
pub mod sv_models;

pub use error::{BoundsError, DataError, KernelError, ModelError, QpError};
pub use experiments::{CostRiskRow, SincConfig, ValidationReport};
pub use kernels::{GramMatrix, KernelSpec};
pub use qp::{QpProblem, QpSolution, SolveStatus, SolverSettings};
pub use risk_bounds::{BoundQuery, ExplicitBoundPair, RiskInterval};
pub use sv_models::{Dataset, RiskCertificate, SvddModel, SvmModel, SvrModel, TrainedModel};
