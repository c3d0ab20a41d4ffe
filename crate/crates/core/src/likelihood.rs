//! Negative pseudo-log-likelihoods and the transition densities behind them.
//!
//! Convention: every NLL equals `Σ −ln f(x_k | x_{k−1}) − N·½ln(2πh)`, i.e.
//! the Gaussian normalising constant of each term is dropped. Splitting NLLs
//! therefore read `Σ (v-residual)²/(2h) + ln g(·) [− ln |dφ⁻¹|]` exactly.
//! Use [`nll_constant`] to move between the two forms.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{DomainError, Model, ModelError, ModelKind, ParamVector};
use crate::scheme::Trajectory;
use crate::special::{half_log_2pi, log_sum_exp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    LieTrotter,
    Strang,
    Kessler,
    EulerMaruyama,
    LampertiEuler,
    TrueMle,
    /// Declared for reports only; evaluating it is unsupported.
    Hermite,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::LieTrotter,
        EstimatorKind::Strang,
        EstimatorKind::Kessler,
        EstimatorKind::EulerMaruyama,
        EstimatorKind::LampertiEuler,
        EstimatorKind::TrueMle,
        EstimatorKind::Hermite,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EstimatorKind::LieTrotter => "lt",
            EstimatorKind::Strang => "strang",
            EstimatorKind::Kessler => "kessler",
            EstimatorKind::EulerMaruyama => "eum",
            EstimatorKind::LampertiEuler => "lamperti_eum",
            EstimatorKind::TrueMle => "true_mle",
            EstimatorKind::Hermite => "hermite",
        }
    }

    pub fn supports(self, model: ModelKind) -> bool {
        match self {
            EstimatorKind::Hermite => false,
            EstimatorKind::TrueMle => model.has_exact_law(),
            _ => true,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown estimator `{0}` (known: lt, strang, kessler, eum, lamperti_eum, true_mle, hermite)")]
pub struct UnknownEstimator(pub String);

impl FromStr for EstimatorKind {
    type Err = UnknownEstimator;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EstimatorKind::ALL.into_iter().find(|k| k.id() == s).ok_or_else(|| UnknownEstimator(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("estimator {estimator} is not available for model {model}")]
    Unsupported { estimator: EstimatorKind, model: ModelKind },
    #[error("observation set needs at least two values")]
    TooFewObservations,
    #[error("observation step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("observation {index} ({value}) is not finite")]
    NonFinite { index: usize, value: f64 },
    #[error("observation {index} ({value}) lies outside the state space of {model}")]
    OutsideStateSpace { index: usize, value: f64, model: ModelKind },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Discrete observations on a uniform grid `t_k = t0 + k·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub model: ModelKind,
    pub t0: f64,
    pub h: f64,
    pub values: Vec<f64>,
    /// Per-parameter fixed values in the model's flat order; `None` = free.
    pub fixed_mask: Option<Vec<Option<f64>>>,
}

impl ObservationSet {
    pub fn new(model: ModelKind, h: f64, values: Vec<f64>) -> Result<Self, LikelihoodError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(LikelihoodError::BadStep(h));
        }
        if values.len() < 2 {
            return Err(LikelihoodError::TooFewObservations);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(LikelihoodError::NonFinite { index, value });
        }
        Ok(Self { model, t0: 0.0, h, values, fixed_mask: None })
    }

    /// Keeps every `factor`-th value of a trajectory, at most `n + 1` of them.
    pub fn from_trajectory(path: &Trajectory, factor: usize, n: usize) -> Result<Self, LikelihoodError> {
        let values: Vec<f64> = path.values.iter().step_by(factor.max(1)).take(n + 1).copied().collect();
        let mut obs = Self::new(path.model, path.h * factor as f64, values)?;
        obs.t0 = path.t0;
        Ok(obs)
    }

    pub fn with_fixed(mut self, mask: Vec<Option<f64>>) -> Self {
        self.fixed_mask = Some(mask);
        self
    }

    /// Number of transitions `N`.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    /// First N transitions only.
    pub fn truncated(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.values.truncate(n + 1);
        out
    }

    /// Checks every value lies in the closed state space of `model`.
    pub fn validate_against(&self, model: &Model) -> Result<(), LikelihoodError> {
        match self.values.iter().enumerate().find(|(_, v)| !model.state_space().contains(**v)) {
            Some((index, &value)) => Err(LikelihoodError::OutsideStateSpace { index, value, model: model.kind() }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InvalidReason {
    ParamsInvalid,
    DomainViolation,
    InverseUndefined,
}

impl InvalidReason {
    pub const ALL: [InvalidReason; 3] = [InvalidReason::ParamsInvalid, InvalidReason::DomainViolation, InvalidReason::InverseUndefined];

    pub fn id(self) -> &'static str {
        match self {
            InvalidReason::ParamsInvalid => "params-invalid",
            InvalidReason::DomainViolation => "domain-violation",
            InvalidReason::InverseUndefined => "inverse-undefined",
        }
    }
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl From<DomainError> for InvalidReason {
    fn from(e: DomainError) -> Self {
        match e {
            DomainError::FlowInverse { .. } => InvalidReason::InverseUndefined,
            _ => InvalidReason::DomainViolation,
        }
    }
}

/// An NLL value; `+∞` exactly when `invalid_reason` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllValue {
    pub value: f64,
    pub n_terms: usize,
    pub invalid_reason: Option<InvalidReason>,
}

impl NllValue {
    pub fn finite(value: f64, n_terms: usize) -> Self {
        Self { value, n_terms, invalid_reason: None }
    }

    pub fn invalid(reason: InvalidReason, n_terms: usize) -> Self {
        Self { value: f64::INFINITY, n_terms, invalid_reason: Some(reason) }
    }

    pub fn is_finite(&self) -> bool {
        self.invalid_reason.is_none()
    }
}

/// Per-transition constant `½ln(2πh)` dropped from every NLL:
/// `nll + N·nll_constant(h) = −Σ ln f`.
pub fn nll_constant(h: f64) -> f64 {
    half_log_2pi(h)
}

type Term = Result<f64, InvalidReason>;

fn accumulate(obs: &ObservationSet, mut term: impl FnMut(f64, f64) -> Term) -> NllValue {
    let n = obs.n();
    let mut total = 0.0;
    for pair in obs.values.windows(2) {
        match term(pair[0], pair[1]) {
            Ok(t) if t.is_finite() => total += t,
            Ok(_) => return NllValue::invalid(InvalidReason::DomainViolation, n),
            Err(reason) => return NllValue::invalid(reason, n),
        }
    }
    NllValue::finite(total, n)
}

fn ln_g(model: &Model, x: f64) -> Term {
    let g = model.g(x);
    if g > 0.0 && g.is_finite() {
        Ok(g.ln())
    } else {
        Err(InvalidReason::DomainViolation)
    }
}

fn in_space(model: &Model, x: f64) -> Term {
    if model.state_space().contains(x) {
        Ok(x)
    } else {
        Err(InvalidReason::DomainViolation)
    }
}

/// Mean in Lamperti coordinates of the LT step from `x`.
fn lt_center(model: &Model, h: f64, x: f64) -> Term {
    Ok(model.v(model.phi1(h, x)?)? + model.lamperti_shift() * h)
}

fn strang_center(model: &Model, h: f64, x: f64) -> Term {
    Ok(model.v(model.phi1(0.5 * h, x)?)? + model.lamperti_shift() * h)
}

/// `−ln Σ_j exp(−(z_j − m)²/(2h))` over the preimages `z_j` of `y`.
fn branch_term(model: &Model, h: f64, center: f64, y: f64, buf: &mut Vec<f64>) -> Term {
    model.lamperti_map().preimages(y, center, h.sqrt(), buf)?;
    let logs: Vec<f64> = buf.iter().map(|z| -0.5 * (z - center) * (z - center) / h).collect();
    let lse = log_sum_exp(&logs);
    if lse.is_finite() {
        Ok(-lse)
    } else {
        Err(InvalidReason::DomainViolation)
    }
}

fn principal_term(model: &Model, h: f64, center: f64, y: f64) -> Term {
    let r = model.v(y)? - center;
    Ok(0.5 * r * r / h)
}

fn lt_pair(model: &Model, h: f64, x: f64, y: f64, branching: bool, buf: &mut Vec<f64>) -> Term {
    in_space(model, y)?;
    let center = lt_center(model, h, x)?;
    let quad = if branching { branch_term(model, h, center, y, buf)? } else { principal_term(model, h, center, y)? };
    Ok(quad + ln_g(model, y)?)
}

fn strang_pair(model: &Model, h: f64, x: f64, y: f64, branching: bool, buf: &mut Vec<f64>) -> Term {
    in_space(model, y)?;
    let (w, dw) = model.phi1_inverse(0.5 * h, y)?;
    let center = strang_center(model, h, x)?;
    let quad = if branching { branch_term(model, h, center, w, buf)? } else { principal_term(model, h, center, w)? };
    Ok(quad + ln_g(model, w)? - dw.ln())
}

/// Lie–Trotter NLL using only the principal branch of `v⁻¹`.
pub fn lt_nll(model: &Model, obs: &ObservationSet) -> NllValue {
    let mut buf = Vec::new();
    accumulate(obs, |x, y| lt_pair(model, obs.h, x, y, false, &mut buf))
}

/// Lie–Trotter NLL summing over every preimage branch of `v⁻¹`.
pub fn lt_branching_nll(model: &Model, obs: &ObservationSet) -> NllValue {
    let mut buf = Vec::with_capacity(8);
    accumulate(obs, |x, y| lt_pair(model, obs.h, x, y, true, &mut buf))
}

pub fn strang_nll(model: &Model, obs: &ObservationSet) -> NllValue {
    let mut buf = Vec::new();
    accumulate(obs, |x, y| strang_pair(model, obs.h, x, y, false, &mut buf))
}

pub fn strang_branching_nll(model: &Model, obs: &ObservationSet) -> NllValue {
    let mut buf = Vec::with_capacity(8);
    accumulate(obs, |x, y| strang_pair(model, obs.h, x, y, true, &mut buf))
}

/// Conditional mean and variance used by the Kessler estimator: exact where
/// the model has them, otherwise the second-order generator expansion.
pub fn kessler_moments(model: &Model, h: f64, x: f64) -> (f64, f64) {
    match model.exact_moments(h, x) {
        Some(moments) => moments,
        None => generator_moments(model, h, x),
    }
}

/// Mean and variance from the second-order generator expansion.
pub fn generator_moments(model: &Model, h: f64, x: f64) -> (f64, f64) {
    let f = model.f(x);
    let f1 = model.f_prime(x);
    let f2 = model.f_second(x);
    let g2 = model.g(x).powi(2);
    let g2_1 = 2.0 * model.g_g_prime(x);
    let g2_2 = model.g2_second(x);
    let mean_step = h * f + 0.5 * h * h * (f * f1 + 0.5 * g2 * f2);
    let second = h * g2 + 0.5 * h * h * (2.0 * f * f + f * g2_1 + 2.0 * g2 * f1 + 0.5 * g2 * g2_2);
    (x + mean_step, second - mean_step * mean_step)
}

fn kessler_pair(model: &Model, h: f64, x: f64, y: f64) -> Term {
    let (m, var) = kessler_moments(model, h, x);
    if !(var > 0.0 && var.is_finite()) {
        return Err(InvalidReason::ParamsInvalid);
    }
    Ok(0.5 * (y - m) * (y - m) / var + 0.5 * (var / h).ln())
}

pub fn kessler_nll(model: &Model, obs: &ObservationSet) -> NllValue {
    accumulate(obs, |x, y| kessler_pair(model, obs.h, x, y))
}

fn em_pair(model: &Model, h: f64, x: f64, y: f64) -> Term {
    let g = model.g(x);
    if !(g > 0.0) {
        return Err(InvalidReason::DomainViolation);
    }
    let r = y - x - model.f(x) * h;
    Ok(0.5 * r * r / (g * g * h) + g.ln())
}

pub fn em_nll(model: &Model, obs: &ObservationSet) -> NllValue {
    accumulate(obs, |x, y| em_pair(model, obs.h, x, y))
}

fn lamperti_em_pair(model: &Model, h: f64, x: f64, y: f64, buf: &mut Vec<f64>) -> Term {
    in_space(model, y)?;
    let vx = model.v(x)?;
    let center = vx + model.lamperti_drift(vx)? * h;
    let quad = if model.is_monotone() { principal_term(model, h, center, y)? } else { branch_term(model, h, center, y, buf)? };
    Ok(quad + ln_g(model, y)?)
}

/// Euler–Maruyama in Lamperti coordinates, mapped back with the Jacobian
/// `1/g`. For non-monotone `v⁻¹` all preimage branches are summed.
pub fn lamperti_em_nll(model: &Model, obs: &ObservationSet) -> NllValue {
    let mut buf = Vec::with_capacity(8);
    accumulate(obs, |x, y| lamperti_em_pair(model, obs.h, x, y, &mut buf))
}

/// Exact transition NLL, same constant convention as the pseudo-NLLs.
pub fn true_nll(model: &Model, obs: &ObservationSet) -> Result<NllValue, LikelihoodError> {
    if !model.kind().has_exact_law() {
        return Err(LikelihoodError::Unsupported { estimator: EstimatorKind::TrueMle, model: model.kind() });
    }
    let c = nll_constant(obs.h);
    Ok(accumulate(obs, |x, y| {
        let lp = model.exact_logpdf(obs.h, x, y).map_err(|_| InvalidReason::DomainViolation)?;
        if lp.is_finite() {
            Ok(-lp - c)
        } else {
            Err(InvalidReason::DomainViolation)
        }
    }))
}

/// Evaluates an estimator's NLL on an already-bound model. The splitting
/// estimators use the branch sum whenever `v⁻¹` is not one-to-one.
pub fn model_nll(estimator: EstimatorKind, model: &Model, obs: &ObservationSet) -> Result<NllValue, LikelihoodError> {
    let monotone = model.is_monotone();
    Ok(match estimator {
        EstimatorKind::LieTrotter if monotone => lt_nll(model, obs),
        EstimatorKind::LieTrotter => lt_branching_nll(model, obs),
        EstimatorKind::Strang if monotone => strang_nll(model, obs),
        EstimatorKind::Strang => strang_branching_nll(model, obs),
        EstimatorKind::Kessler => kessler_nll(model, obs),
        EstimatorKind::EulerMaruyama => em_nll(model, obs),
        EstimatorKind::LampertiEuler => lamperti_em_nll(model, obs),
        EstimatorKind::TrueMle => return true_nll(model, obs),
        EstimatorKind::Hermite => return Err(LikelihoodError::Unsupported { estimator, model: model.kind() }),
    })
}

/// NLL at a raw parameter vector; invalid parameters give `+∞`.
pub fn nll(estimator: EstimatorKind, kind: ModelKind, params: &ParamVector, obs: &ObservationSet) -> Result<NllValue, LikelihoodError> {
    if !estimator.supports(kind) {
        return Err(LikelihoodError::Unsupported { estimator, model: kind });
    }
    match kind.bind(params) {
        Ok(model) => model_nll(estimator, &model, obs),
        Err(ModelError::InvalidParams { .. }) => Ok(NllValue::invalid(InvalidReason::ParamsInvalid, obs.n())),
        Err(e) => Err(e.into()),
    }
}

/// `ln f(y | x0)` for one transition of length `h`; `−∞` outside the support.
pub fn transition_log_density(estimator: EstimatorKind, model: &Model, h: f64, x0: f64, y: f64) -> Result<f64, LikelihoodError> {
    if !estimator.supports(model.kind()) {
        return Err(LikelihoodError::Unsupported { estimator, model: model.kind() });
    }
    let c = nll_constant(h);
    let mut buf = Vec::with_capacity(8);
    let term = match estimator {
        EstimatorKind::LieTrotter => lt_pair(model, h, x0, y, !model.is_monotone(), &mut buf),
        EstimatorKind::Strang => strang_pair(model, h, x0, y, !model.is_monotone(), &mut buf),
        EstimatorKind::Kessler => kessler_pair(model, h, x0, y),
        EstimatorKind::EulerMaruyama => em_pair(model, h, x0, y),
        EstimatorKind::LampertiEuler => lamperti_em_pair(model, h, x0, y, &mut buf),
        EstimatorKind::TrueMle => return Ok(model.exact_logpdf(h, x0, y)?),
        EstimatorKind::Hermite => unreachable!("rejected above"),
    };
    Ok(match term {
        Ok(t) => -t - c,
        Err(_) => f64::NEG_INFINITY,
    })
}

pub fn transition_density(estimator: EstimatorKind, model: &Model, h: f64, x0: f64, y: f64) -> Result<f64, LikelihoodError> {
    transition_log_density(estimator, model, h, x0, y).map(f64::exp)
}

#[cfg(test)]
mod tests;
