//! Nelder–Mead minimisation of pseudo negative log-likelihoods.
//!
//! Parameters are optimised on their raw scale. Invalid regions evaluate to
//! `+∞`, which the simplex treats as a barrier: a reflected or expanded point
//! with infinite value is never accepted, so the simplex contracts instead.

use std::cell::RefCell;
use std::fmt;
use std::time::Instant;

use thiserror::Error;

use crate::likelihood::{nll, EstimatorKind, InvalidReason, LikelihoodError, ObservationSet};
use crate::model::{ModelError, ParamVector};

const MAX_RESCALINGS: usize = 10;
const DEGENERATE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Defaults to `500 · dimension` when `None`.
    pub max_iterations: Option<usize>,
    /// Largest max-norm distance from the best vertex.
    pub x_tolerance: f64,
    /// Spread between worst and best vertex values.
    pub f_tolerance: f64,
    pub simplex_relative: f64,
    pub simplex_absolute: f64,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_iterations: None,
            x_tolerance: 1e-8,
            f_tolerance: 1e-10,
            simplex_relative: 0.05,
            simplex_absolute: 0.05,
        }
    }
}

impl NmConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let ok = self.reflection > 0.0
            && self.expansion > 1.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.x_tolerance >= 0.0
            && self.f_tolerance >= 0.0
            && self.simplex_relative >= 0.0
            && self.simplex_absolute > 0.0;
        if ok {
            Ok(())
        } else {
            Err(OptimizeError::BadConfig(*self))
        }
    }

    pub fn iteration_cap(&self, dim: usize) -> usize {
        self.max_iterations.unwrap_or(500 * dim)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("invalid Nelder–Mead coefficients {0:?}")]
    BadConfig(NmConfig),
    #[error("cannot optimise over zero free parameters")]
    EmptyProblem,
    #[error("objective is +∞ on every vertex of the initial simplex after {rescalings} rescalings")]
    NonFinite { rescalings: usize, reason: Option<InvalidReason> },
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

impl From<ModelError> for OptimizeError {
    fn from(e: ModelError) -> Self {
        OptimizeError::Likelihood(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    /// Both the diameter and the value spread are within tolerance.
    Tolerances,
    /// Diameter far below the x tolerance while values still disagree,
    /// typically a vertex pinned against a `+∞` barrier.
    SimplexCollapsed,
    MaxIterations,
}

impl Termination {
    pub fn id(self) -> &'static str {
        match self {
            Termination::Tolerances => "tolerance",
            Termination::SimplexCollapsed => "collapsed",
            Termination::MaxIterations => "max-iterations",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Best value after each iteration.
    pub history: Vec<f64>,
}

impl NmOutcome {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }
}

fn max_norm_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Minimises `objective` starting from `x0`. NaN values count as `+∞`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut objective: F, x0: &[f64], cfg: &NmConfig) -> Result<NmOutcome, OptimizeError> {
    cfg.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(OptimizeError::EmptyProblem);
    }
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let steps: Vec<f64> = x0.iter().map(|x| (cfg.simplex_relative * x.abs()).max(cfg.simplex_absolute)).collect();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0);
    let mut scale = 1.0;
    for attempt in 0..=MAX_RESCALINGS {
        simplex.clear();
        simplex.push((x0.to_vec(), f0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += scale * steps[i];
            let fx = eval(&x);
            simplex.push((x, fx));
        }
        if simplex.iter().any(|(_, f)| f.is_finite()) {
            break;
        }
        if attempt == MAX_RESCALINGS {
            return Err(OptimizeError::NonFinite { rescalings: MAX_RESCALINGS, reason: None });
        }
        scale *= 2.0;
    }

    let cap = cfg.iteration_cap(n);
    let mut history = Vec::new();
    let mut iterations = 0;
    let termination = loop {
        // Stable sort: equal values keep their order, lowest index first.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diameter = simplex[1..].iter().map(|(x, _)| max_norm_distance(x, &simplex[0].0)).fold(0.0, f64::max);
        if diameter <= cfg.x_tolerance && worst - best <= cfg.f_tolerance {
            break Termination::Tolerances;
        }
        if diameter <= DEGENERATE * cfg.x_tolerance {
            break Termination::SimplexCollapsed;
        }
        if iterations >= cap {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |t: f64, target: &[f64]| -> Vec<f64> { centroid.iter().zip(target).map(|(c, x)| c + t * (x - c)).collect() };
        let worst_x = simplex[n].0.clone();
        let xr = along(-cfg.reflection, &worst_x);
        let fr = eval(&xr);
        let second_worst = simplex[n - 1].1;

        if fr < best {
            let xe = along(-cfg.reflection * cfg.expansion, &worst_x);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < second_worst {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc, accept) = if fr < worst {
                let xc = along(-cfg.reflection * cfg.contraction, &worst_x);
                let fc = eval(&xc);
                let ok = fc <= fr;
                (xc, fc, ok)
            } else {
                let xc = along(cfg.contraction, &worst_x);
                let fc = eval(&xc);
                let ok = fc < worst;
                (xc, fc, ok)
            };
            if accept {
                simplex[n] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = anchor.iter().zip(&vertex.0).map(|(a, x)| a + cfg.shrink * (x - a)).collect();
                    let fx = eval(&x);
                    *vertex = (x, fx);
                }
            }
        }
        history.push(simplex.iter().map(|v| v.1).fold(f64::INFINITY, f64::min));
    };
    let (x, value) = simplex.swap_remove(0);
    Ok(NmOutcome { x, value, iterations, evaluations, termination, history })
}

/// Invalid objective evaluations seen during one fit, by reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InvalidCounts {
    pub params_invalid: usize,
    pub domain_violation: usize,
    pub inverse_undefined: usize,
}

impl InvalidCounts {
    fn record(&mut self, reason: InvalidReason) {
        match reason {
            InvalidReason::ParamsInvalid => self.params_invalid += 1,
            InvalidReason::DomainViolation => self.domain_violation += 1,
            InvalidReason::InverseUndefined => self.inverse_undefined += 1,
        }
    }

    pub fn get(&self, reason: InvalidReason) -> usize {
        match reason {
            InvalidReason::ParamsInvalid => self.params_invalid,
            InvalidReason::DomainViolation => self.domain_violation,
            InvalidReason::InverseUndefined => self.inverse_undefined,
        }
    }

    pub fn total(&self) -> usize {
        self.params_invalid + self.domain_violation + self.inverse_undefined
    }

    /// Most frequent reason; ties go to the earlier entry of `InvalidReason::ALL`.
    pub fn dominant(&self) -> Option<InvalidReason> {
        let mut best: Option<(InvalidReason, usize)> = None;
        for r in InvalidReason::ALL {
            let c = self.get(r);
            if c > 0 && best.is_none_or(|(_, b)| c > b) {
                best = Some((r, c));
            }
        }
        best.map(|(r, _)| r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub estimator: EstimatorKind,
    pub params: ParamVector,
    pub nll: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub runtime_ms: f64,
    pub invalid: InvalidCounts,
    /// Reason attached to the objective at the returned point, if it is `+∞`.
    pub final_reason: Option<InvalidReason>,
    pub simplex_relative: f64,
    pub simplex_absolute: f64,
}

/// Pseudo-MLE: minimises the estimator's NLL over the free parameters,
/// holding fixed entries of `obs.fixed_mask` at their values.
pub fn fit(estimator: EstimatorKind, obs: &ObservationSet, init: &ParamVector, cfg: &NmConfig) -> Result<FitResult, OptimizeError> {
    let kind = obs.model;
    if !estimator.supports(kind) {
        return Err(LikelihoodError::Unsupported { estimator, model: kind }.into());
    }
    let start = Instant::now();
    let full = init.to_flat();
    ParamVector::from_flat(kind, &full)?;
    let mut base = full.clone();
    let mut free = Vec::new();
    match &obs.fixed_mask {
        Some(mask) => {
            if mask.len() != full.len() {
                return Err(ModelError::Shape { model: kind, expected: full.len(), got: mask.len(), names: kind.param_names().join(", ") }.into());
            }
            for (i, m) in mask.iter().enumerate() {
                match m {
                    Some(v) => base[i] = *v,
                    None => free.push(i),
                }
            }
        }
        None => free.extend(0..full.len()),
    }
    let assemble = |z: &[f64]| -> Vec<f64> {
        let mut flat = base.clone();
        for (slot, v) in free.iter().zip(z) {
            flat[*slot] = *v;
        }
        flat
    };
    let invalid = RefCell::new(InvalidCounts::default());
    let hard_error: RefCell<Option<LikelihoodError>> = RefCell::new(None);
    let evaluate = |flat: &[f64]| -> (f64, Option<InvalidReason>) {
        let params = ParamVector::from_flat(kind, flat).expect("shape checked above");
        match nll(estimator, kind, &params, obs) {
            Ok(v) => (v.value, v.invalid_reason),
            Err(e) => {
                hard_error.borrow_mut().get_or_insert(e);
                (f64::INFINITY, None)
            }
        }
    };
    let objective = |z: &[f64]| {
        let (value, reason) = evaluate(&assemble(z));
        if let Some(r) = reason {
            invalid.borrow_mut().record(r);
        }
        value
    };

    let z0: Vec<f64> = free.iter().map(|i| full[*i]).collect();
    let outcome = if free.is_empty() {
        let value = objective(&[]);
        NmOutcome { x: Vec::new(), value, iterations: 0, evaluations: 1, termination: Termination::Tolerances, history: vec![value] }
    } else {
        match nelder_mead(objective, &z0, cfg) {
            Ok(o) => o,
            Err(OptimizeError::NonFinite { rescalings, .. }) if hard_error.borrow().is_none() => {
                let reason = invalid.borrow().dominant();
                return Err(OptimizeError::NonFinite { rescalings, reason });
            }
            Err(e) => return Err(hard_error.borrow_mut().take().map(OptimizeError::from).unwrap_or(e)),
        }
    };
    if let Some(e) = hard_error.borrow_mut().take() {
        return Err(e.into());
    }
    let flat = assemble(&outcome.x);
    let counts = *invalid.borrow();
    let final_reason = if outcome.value.is_finite() { None } else { evaluate(&flat).1 };
    Ok(FitResult {
        estimator,
        params: ParamVector::from_flat(kind, &flat)?,
        nll: outcome.value,
        iterations: outcome.iterations,
        evaluations: outcome.evaluations,
        converged: outcome.converged() && outcome.value.is_finite(),
        termination: outcome.termination,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        invalid: counts,
        final_reason,
        simplex_relative: cfg.simplex_relative,
        simplex_absolute: cfg.simplex_absolute,
    })
}
