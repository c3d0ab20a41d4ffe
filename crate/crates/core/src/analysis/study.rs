//! Monte-Carlo inference studies: simulate, subsample, fit every estimator.

use std::fmt;

use rayon::prelude::*;

use super::stats::Quartiles;
use super::AnalysisError;
use crate::likelihood::{EstimatorKind, InvalidReason, ObservationSet};
use crate::model::{ModelKind, ParamVector};
use crate::optimize::{fit, FitResult, NmConfig, OptimizeError};
use crate::rng::{make_noise_grid, StreamKey};
use crate::scheme::{simulate_path, SchemeKind, SimOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub model: ModelKind,
    pub alpha0: ParamVector,
    pub x0: f64,
    pub estimators: Vec<EstimatorKind>,
    /// Step of the LT data simulation when no exact sampler exists.
    pub h_fine: f64,
    pub h_obs: Vec<f64>,
    /// Observation counts; smaller counts use prefixes of the same path.
    pub n_obs: Vec<usize>,
    pub m: usize,
    pub fixed_mask: Option<Vec<Option<f64>>>,
    pub init: ParamVector,
    pub seed: u64,
    pub nm: NmConfig,
}

impl StudySpec {
    pub fn data_scheme(&self) -> SchemeKind {
        if self.model.has_exact_law() {
            SchemeKind::Exact
        } else {
            SchemeKind::LieTrotter
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Failure {
    /// No finite objective value was reachable; carries the dominant reason.
    Invalid(Option<InvalidReason>),
    Simulation,
    Unsupported,
    Optimizer,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(Some(r)) => write!(f, "{r}"),
            Failure::Invalid(None) => f.write_str("non-finite"),
            Failure::Simulation => f.write_str("simulation-failed"),
            Failure::Unsupported => f.write_str("unsupported"),
            Failure::Optimizer => f.write_str("optimizer-error"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowStatus {
    Converged,
    NotConverged,
    Failed(Failure),
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowStatus::Converged => f.write_str("converged"),
            RowStatus::NotConverged => f.write_str("not-converged"),
            RowStatus::Failed(why) => write!(f, "failed:{why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub replicate: usize,
    pub estimator: EstimatorKind,
    pub h_obs: f64,
    pub n: usize,
    pub status: RowStatus,
    pub fit: Option<FitResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub param: &'static str,
    pub count: usize,
    pub quartiles: Quartiles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub spec: StudySpec,
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    pub fn cell(&self, estimator: EstimatorKind, h_obs: f64, n: usize) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(move |r| r.estimator == estimator && r.h_obs == h_obs && r.n == n)
    }

    /// Estimates of parameter `index` from converged fits in one cell.
    pub fn estimates(&self, estimator: EstimatorKind, h_obs: f64, n: usize, index: usize) -> Vec<f64> {
        self.cell(estimator, h_obs, n)
            .filter(|r| r.status == RowStatus::Converged)
            .filter_map(|r| r.fit.as_ref().map(|f| f.params.to_flat()[index]))
            .collect()
    }

    pub fn summary(&self, estimator: EstimatorKind, h_obs: f64, n: usize, index: usize) -> Option<CellSummary> {
        let values = self.estimates(estimator, h_obs, n, index);
        Some(CellSummary { param: self.spec.model.param_names()[index], count: values.len(), quartiles: Quartiles::of(&values)? })
    }

    /// Fraction of the cell's replicates with the given status.
    pub fn fraction(&self, estimator: EstimatorKind, h_obs: f64, n: usize, pred: impl Fn(&StudyRow) -> bool) -> f64 {
        let (hit, total) = self.cell(estimator, h_obs, n).fold((0, 0), |(h, t), r| (h + pred(r) as usize, t + 1));
        hit as f64 / total as f64
    }
}

fn classify(result: Result<FitResult, OptimizeError>) -> (RowStatus, Option<FitResult>) {
    match result {
        Ok(f) if !f.nll.is_finite() => (RowStatus::Failed(Failure::Invalid(f.final_reason)), Some(f)),
        Ok(f) if f.converged => (RowStatus::Converged, Some(f)),
        Ok(f) => (RowStatus::NotConverged, Some(f)),
        Err(OptimizeError::NonFinite { reason, .. }) => (RowStatus::Failed(Failure::Invalid(reason)), None),
        Err(OptimizeError::Likelihood(crate::likelihood::LikelihoodError::Unsupported { .. })) => (RowStatus::Failed(Failure::Unsupported), None),
        Err(_) => (RowStatus::Failed(Failure::Optimizer), None),
    }
}

/// Runs every (h_obs, replicate) in parallel. Rows come back ordered by
/// h_obs, then replicate, then n, then estimator, whatever the thread count.
pub fn inference_study(spec: &StudySpec) -> Result<StudyTable, AnalysisError> {
    let model = spec.model.bind(&spec.alpha0)?;
    let n_max = *spec.n_obs.iter().max().ok_or(AnalysisError::EmptySample)?;
    let scheme = spec.data_scheme();
    let jobs: Vec<(usize, usize)> = (0..spec.h_obs.len()).flat_map(|hi| (0..spec.m).map(move |r| (hi, r))).collect();
    let blocks: Vec<Vec<StudyRow>> = jobs
        .par_iter()
        .map(|&(hi, replicate)| {
            let h_obs = spec.h_obs[hi];
            let key = StreamKey::path_noise(spec.seed, (hi * spec.m + replicate) as u64);
            let (h_sim, factor) = if scheme == SchemeKind::Exact {
                (h_obs, 1)
            } else {
                let k = (h_obs / spec.h_fine).round().max(1.0) as usize;
                (h_obs / k as f64, k)
            };
            let data = make_noise_grid(key, h_sim, n_max * factor)
                .ok()
                .and_then(|grid| simulate_path(scheme, &model, spec.x0, &grid, SimOptions::default()).ok())
                .and_then(|path| ObservationSet::from_trajectory(&path, factor, n_max).ok());
            let mut rows = Vec::with_capacity(spec.n_obs.len() * spec.estimators.len());
            for &n in &spec.n_obs {
                for &estimator in &spec.estimators {
                    let (status, fit) = match &data {
                        None => (RowStatus::Failed(Failure::Simulation), None),
                        Some(full) => {
                            let mut obs = full.truncated(n);
                            obs.fixed_mask = spec.fixed_mask.clone();
                            classify(fit(estimator, &obs, &spec.init, &spec.nm))
                        }
                    };
                    rows.push(StudyRow { replicate, estimator, h_obs, n, status, fit });
                }
            }
            rows
        })
        .collect();
    Ok(StudyTable { spec: spec.clone(), rows: blocks.into_iter().flatten().collect() })
}
