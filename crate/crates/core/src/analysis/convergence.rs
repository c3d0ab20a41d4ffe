//! Strong mean-square error curves against a fine-grid reference.
//!
//! Each path draws one fine noise grid; every coarse step size reuses block
//! sums of the same increments, so all schemes and step sizes see the same
//! Brownian path.

use rayon::prelude::*;

use super::stats::{ols, LineFit};
use super::AnalysisError;
use crate::model::{Model, ModelKind, ParamVector};
use crate::rng::{coarsen, make_noise_grid, StreamKey};
use crate::scheme::{simulate_path, SchemeKind, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// Endpoint of `scheme` run on the fine grid itself.
    FineGrid { scheme: SchemeKind, h_fine: f64 },
}

impl Reference {
    pub fn h_fine(&self) -> f64 {
        match self {
            Reference::FineGrid { h_fine, .. } => *h_fine,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSpec {
    pub x0: f64,
    pub t: f64,
    pub h_list: Vec<f64>,
    pub reference: Reference,
    pub m: usize,
    pub seed: u64,
    pub options: SimOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub s_n: f64,
    /// Paths contributing to `s_n`.
    pub paths: usize,
    /// Paths skipped because the scheme or the reference aborted.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub model: ModelKind,
    pub params: ParamVector,
    pub scheme: SchemeKind,
    pub t: f64,
    pub m: usize,
    pub reference: Reference,
    pub rows: Vec<ConvergenceRow>,
    pub fit: Option<LineFit>,
    /// Largest |fine total − coarse total| over paths and step sizes.
    pub coupling_deviation: f64,
}

impl ConvergenceReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// OLS of `log₂ S_N` on `log₂ h`, ignoring rows with `S_N = 0`.
pub fn fit_order(rows: &[(f64, f64)]) -> Result<LineFit, AnalysisError> {
    let kept: Vec<&(f64, f64)> = rows.iter().filter(|(_, s)| *s > 0.0 && s.is_finite()).collect();
    if kept.len() < 3 {
        return Err(AnalysisError::TooFewRows { need: 3, got: kept.len() });
    }
    let x: Vec<f64> = kept.iter().map(|(h, _)| h.log2()).collect();
    let y: Vec<f64> = kept.iter().map(|(_, s)| s.log2()).collect();
    ols(&x, &y)
}

/// Root-mean-square distance between paired endpoints.
pub fn strong_error(approx: &[f64], reference: &[f64]) -> f64 {
    let sum: f64 = approx.iter().zip(reference).map(|(a, r)| (a - r).powi(2)).sum();
    (sum / approx.len() as f64).sqrt()
}

fn ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let k = r.round();
    ((r - k).abs() < 1e-9 * r.max(1.0) && k >= 1.0).then_some(k as usize)
}

struct PathOutcome {
    reference: Option<f64>,
    /// `[scheme][h]` endpoints.
    endpoints: Vec<Vec<Option<f64>>>,
    deviation: f64,
}

/// Strong error curves for several schemes sharing paths and reference.
pub fn strong_error_study(schemes: &[SchemeKind], model: &Model, spec: &ConvergenceSpec) -> Result<Vec<ConvergenceReport>, AnalysisError> {
    let h_fine = spec.reference.h_fine();
    let n_fine = ratio(spec.t, h_fine).ok_or(AnalysisError::NonNested { h: h_fine, h_fine, t: spec.t })?;
    let factors: Vec<usize> = spec
        .h_list
        .iter()
        .map(|&h| match ratio(h, h_fine) {
            Some(k) if n_fine % k == 0 => Ok(k),
            _ => Err(AnalysisError::NonNested { h, h_fine, t: spec.t }),
        })
        .collect::<Result<_, _>>()?;
    if schemes.contains(&SchemeKind::Exact) {
        return Err(AnalysisError::Unsupported("the exact sampler cannot be coupled to a Brownian grid".into()));
    }
    let Reference::FineGrid { scheme: ref_scheme, .. } = spec.reference;

    let outcomes: Vec<PathOutcome> = (0..spec.m)
        .into_par_iter()
        .map(|i| -> Result<PathOutcome, AnalysisError> {
            let grid = make_noise_grid(StreamKey::path_noise(spec.seed, i as u64), h_fine, n_fine)?;
            let total = grid.total();
            let reference = simulate_path(ref_scheme, model, spec.x0, &grid, spec.options).ok().map(|p| p.end()).filter(|v| v.is_finite());
            let mut deviation: f64 = 0.0;
            let coarse: Vec<_> = factors
                .iter()
                .map(|&k| {
                    let g = coarsen(&grid, k)?;
                    deviation = deviation.max((g.total() - total).abs());
                    Ok(g)
                })
                .collect::<Result<_, AnalysisError>>()?;
            let endpoints = schemes
                .iter()
                .map(|&s| coarse.iter().map(|g| simulate_path(s, model, spec.x0, g, spec.options).ok().map(|p| p.end()).filter(|v| v.is_finite())).collect())
                .collect();
            Ok(PathOutcome { reference, endpoints, deviation })
        })
        .collect::<Result<_, _>>()?;

    let deviation = outcomes.iter().map(|o| o.deviation).fold(0.0, f64::max);
    schemes
        .iter()
        .enumerate()
        .map(|(si, &scheme)| {
            let rows: Vec<ConvergenceRow> = spec
                .h_list
                .iter()
                .enumerate()
                .map(|(hi, &h)| {
                    let (approx, reference): (Vec<f64>, Vec<f64>) =
                        outcomes.iter().filter_map(|o| Some((o.endpoints[si][hi]?, o.reference?))).unzip();
                    let s_n = if approx.is_empty() { f64::NAN } else { strong_error(&approx, &reference) };
                    ConvergenceRow { h, s_n, paths: approx.len(), failed: spec.m - approx.len() }
                })
                .collect();
            let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.s_n)).collect();
            Ok(ConvergenceReport {
                model: model.kind(),
                params: model.params().clone(),
                scheme,
                t: spec.t,
                m: spec.m,
                reference: spec.reference,
                fit: fit_order(&pairs).ok(),
                rows,
                coupling_deviation: deviation,
            })
        })
        .collect()
}

pub fn strong_error_curve(scheme: SchemeKind, model: &Model, spec: &ConvergenceSpec) -> Result<ConvergenceReport, AnalysisError> {
    Ok(strong_error_study(&[scheme], model, spec)?.remove(0))
}
