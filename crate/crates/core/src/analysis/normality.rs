//! Shape diagnostics of standardized estimation errors.
//!
//! Drift parameters are scaled by `√(N·h)`, diffusion parameters by `√N`.
//! Coverage is the share of errors within `±1.96` sample standard deviations
//! of zero, so a bias shows up as under-coverage.

use super::stats::{excess_kurtosis, mean, skewness, variance};
use super::study::{RowStatus, StudyTable};
use super::AnalysisError;
use crate::likelihood::EstimatorKind;
use crate::model::ParamVector;

pub const MIN_CONVERGED: usize = 50;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamNormality {
    pub param: &'static str,
    pub standardized: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub coverage: f64,
}

impl ParamNormality {
    pub fn from_errors(param: &'static str, standardized: Vec<f64>) -> Self {
        let sd = variance(&standardized).sqrt();
        let covered = standardized.iter().filter(|e| e.abs() <= Z95 * sd).count();
        Self {
            param,
            mean: mean(&standardized),
            sd,
            skewness: skewness(&standardized),
            excess_kurtosis: excess_kurtosis(&standardized),
            coverage: covered as f64 / standardized.len() as f64,
            standardized,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityDiagnostic {
    pub estimator: EstimatorKind,
    pub h_obs: f64,
    pub n: usize,
    pub params: Vec<ParamNormality>,
    pub converged: usize,
    pub not_converged: usize,
}

/// Diagnostics for the free parameters of one study cell.
pub fn normality_diagnostic(table: &StudyTable, alpha0: &ParamVector, estimator: EstimatorKind, h_obs: f64, n: usize) -> Result<NormalityDiagnostic, AnalysisError> {
    let fits: Vec<Vec<f64>> = table
        .cell(estimator, h_obs, n)
        .filter(|r| r.status == RowStatus::Converged)
        .filter_map(|r| r.fit.as_ref().map(|f| f.params.to_flat()))
        .collect();
    let total = table.cell(estimator, h_obs, n).count();
    if fits.len() < MIN_CONVERGED {
        return Err(AnalysisError::TooFewConverged { need: MIN_CONVERGED, got: fits.len() });
    }
    let kind = table.spec.model;
    let (d1, _) = kind.shape();
    let truth = alpha0.to_flat();
    let names = kind.param_names();
    let params = (0..truth.len())
        .filter(|i| table.spec.fixed_mask.as_ref().is_none_or(|m| m[*i].is_none()))
        .map(|i| {
            let scale = if i < d1 { (n as f64 * h_obs).sqrt() } else { (n as f64).sqrt() };
            ParamNormality::from_errors(names[i], fits.iter().map(|f| scale * (f[i] - truth[i])).collect())
        })
        .collect();
    Ok(NormalityDiagnostic { estimator, h_obs, n, params, converged: fits.len(), not_converged: total - fits.len() })
}
