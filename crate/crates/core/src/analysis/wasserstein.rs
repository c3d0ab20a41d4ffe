//! Empirical Wasserstein-1 distances between one-dimensional samples.

use super::stats::{quantile_sorted, sorted};
use super::AnalysisError;
use crate::model::Model;
use crate::rng::{Purpose, StreamKey};
use crate::scheme::{step, SchemeKind};

const GRID: usize = 10_000;

/// W₁ between two empirical laws. Equal sizes pair order statistics;
/// otherwise quantile functions are compared on a uniform probability grid.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let (sa, sb) = (sorted(a), sorted(b));
    if sa.len() == sb.len() {
        return Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / sa.len() as f64);
    }
    let total: f64 = (0..GRID)
        .map(|k| {
            let p = (k as f64 + 0.5) / GRID as f64;
            (quantile_sorted(&sa, p) - quantile_sorted(&sb, p)).abs()
        })
        .sum();
    Ok(total / GRID as f64)
}

/// `m` one-step draws of `scheme` from `x0`. Aborted steps are returned as
/// errors; the exact scheme samples the true transition law.
pub fn one_step_samples(model: &Model, scheme: SchemeKind, h: f64, x0: f64, m: usize, key: StreamKey) -> Result<Vec<f64>, AnalysisError> {
    if scheme == SchemeKind::Exact {
        let mut rng = key.with_purpose(Purpose::ExactSampling).rng();
        return (0..m).map(|_| Ok(model.exact_sample(h, x0, &mut rng)?)).collect();
    }
    let mut normals = key.with_purpose(Purpose::PathNoise).normals();
    let sd = h.sqrt();
    (0..m)
        .map(|k| {
            step(scheme, model, h, x0, sd * normals.next_standard())
                .map_err(|reason| crate::scheme::SchemeError::PathAborted { step: k, reason }.into())
        })
        .collect()
}

/// W₁ between `m` one-step scheme draws and `m` exact draws from `x0`.
pub fn one_step_wasserstein(model: &Model, scheme: SchemeKind, h: f64, x0: f64, m: usize, seed: u64) -> Result<f64, AnalysisError> {
    if !model.kind().has_exact_law() {
        return Err(AnalysisError::Unsupported(format!("no exact sampler for {}", model.kind())));
    }
    let exact = one_step_samples(model, SchemeKind::Exact, h, x0, m, StreamKey::new(seed, 0, Purpose::ExactSampling))?;
    // A second exact sample must not reuse the first one's stream.
    let index = if scheme == SchemeKind::Exact { 1 } else { 0 };
    let approx = one_step_samples(model, scheme, h, x0, m, StreamKey::path_noise(seed, index))?;
    wasserstein1(&approx, &exact)
}
