//! Counts of simulated values leaving the open state space.

use rayon::prelude::*;

use super::AnalysisError;
use crate::model::Model;
use crate::rng::{make_noise_grid, StreamKey};
use crate::scheme::{simulate_path, SchemeError, SchemeKind, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreservationReport {
    pub paths: usize,
    pub values: usize,
    /// Values on or beyond a boundary.
    pub violations: usize,
    pub aborted_paths: usize,
    pub min: f64,
    pub max: f64,
}

impl PreservationReport {
    pub fn clean(&self) -> bool {
        self.violations == 0 && self.aborted_paths == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub x0: f64,
    pub h: f64,
    pub n_steps: usize,
    pub m: usize,
    pub seed: u64,
    pub options: SimOptions,
}

pub fn preservation_sweep(model: &Model, scheme: SchemeKind, spec: &SweepSpec) -> Result<PreservationReport, AnalysisError> {
    let space = *model.state_space();
    let per_path: Vec<Option<(usize, f64, f64)>> = (0..spec.m)
        .into_par_iter()
        .map(|i| -> Result<_, AnalysisError> {
            let grid = make_noise_grid(StreamKey::path_noise(spec.seed, i as u64), spec.h, spec.n_steps)?;
            match simulate_path(scheme, model, spec.x0, &grid, spec.options) {
                Ok(path) => {
                    let values = &path.values[1..];
                    let bad = values.iter().filter(|v| !space.contains_interior(**v)).count();
                    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    Ok(Some((bad, lo, hi)))
                }
                Err(SchemeError::PathAborted { .. }) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut report = PreservationReport { paths: spec.m, values: 0, violations: 0, aborted_paths: 0, min: f64::INFINITY, max: f64::NEG_INFINITY };
    for outcome in per_path {
        match outcome {
            Some((bad, lo, hi)) => {
                report.values += spec.n_steps;
                report.violations += bad;
                report.min = report.min.min(lo);
                report.max = report.max.max(hi);
            }
            None => report.aborted_paths += 1,
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelKind, ParamVector};

    #[test]
    fn euler_leaves_the_unit_interval_where_splitting_does_not() {
        let m = ModelKind::WrightFisher.bind(&ParamVector::new(vec![1.0, 0.5], vec![-0.3])).unwrap();
        let spec = SweepSpec { x0: 0.02, h: 0.05, n_steps: 200, m: 200, seed: 8, options: SimOptions::default() };
        let eum = preservation_sweep(&m, SchemeKind::EulerMaruyama, &spec).unwrap();
        assert!(eum.violations > 0);
        let lt = preservation_sweep(&m, SchemeKind::LieTrotter, &spec).unwrap();
        assert!(lt.clean(), "{lt:?}");
        assert!(lt.min > 0.0 && lt.max < 1.0);
        assert_eq!(lt.values, 200 * 200);
    }
}
