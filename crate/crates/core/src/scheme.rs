//! One-step integrators and path simulation.
//!
//! Every stepper consumes a Brownian increment `ξ ~ N(0, h)` directly, so a
//! coarsened noise grid can be fed to the same code.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{DomainError, Model, ModelError, ModelKind, ParamVector, Splitting};
use crate::rng::{NoiseGrid, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    LieTrotter,
    Strang,
    EulerMaruyama,
    Milstein,
    SemiDiscrete,
    LampertiEuler,
    Exact,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::LieTrotter,
        SchemeKind::Strang,
        SchemeKind::EulerMaruyama,
        SchemeKind::Milstein,
        SchemeKind::SemiDiscrete,
        SchemeKind::LampertiEuler,
        SchemeKind::Exact,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SchemeKind::LieTrotter => "lt",
            SchemeKind::Strang => "strang",
            SchemeKind::EulerMaruyama => "eum",
            SchemeKind::Milstein => "milstein",
            SchemeKind::SemiDiscrete => "sd",
            SchemeKind::LampertiEuler => "lamperti_eum",
            SchemeKind::Exact => "exact",
        }
    }

    pub fn splitting(self) -> Option<Splitting> {
        match self {
            SchemeKind::LieTrotter => Some(Splitting::LieTrotter),
            SchemeKind::Strang => Some(Splitting::Strang),
            _ => None,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown scheme `{0}` (known: lt, strang, eum, milstein, sd, lamperti_eum, exact)")]
pub struct UnknownScheme(pub String);

impl FromStr for SchemeKind {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeKind::ALL.into_iter().find(|k| k.id() == s).ok_or_else(|| UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("path aborted at step {step}: {reason}")]
    PathAborted { step: usize, reason: DomainError },
    #[error("initial state {0} lies outside the state space")]
    InvalidStart(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Lie–Trotter: `v⁻¹(ξ + v(φ¹ₕ(x)))`.
pub fn lt_step(model: &Model, h: f64, x: f64, xi: f64) -> Result<f64, DomainError> {
    model.phi2(h, model.phi1(h, x)?, xi)
}

/// Strang: `φ¹_{h/2}(v⁻¹(ξ + v(φ¹_{h/2}(x))))`.
pub fn strang_step(model: &Model, h: f64, x: f64, xi: f64) -> Result<f64, DomainError> {
    let half = 0.5 * h;
    model.phi1(half, model.phi2(h, model.phi1(half, x)?, xi)?)
}

pub fn em_step(model: &Model, h: f64, x: f64, xi: f64) -> f64 {
    x + model.f(x) * h + model.g(x) * xi
}

pub fn milstein_step(model: &Model, h: f64, x: f64, xi: f64) -> f64 {
    em_step(model, h, x, xi) + 0.5 * model.g_g_prime(x) * (xi * xi - h)
}

/// Semi-discrete: Euler on the ODE subequation, exact SDE flow.
pub fn sd_step(model: &Model, h: f64, x: f64, xi: f64) -> Result<f64, DomainError> {
    let z = x + model.f1(x) * h;
    let z = model.state_space().project(z).ok_or(DomainError::FlowExit { value: z })?;
    model.phi2(h, z, xi)
}

/// Euler–Maruyama applied to the Lamperti-transformed process.
pub fn lamperti_em_step(model: &Model, h: f64, x: f64, xi: f64) -> Result<f64, DomainError> {
    let y = model.v(x)?;
    let next = model.v_inv(y + model.lamperti_drift(y)? * h + xi)?;
    model.state_space().project(next).ok_or(DomainError::OutsideStateSpace { value: next })
}

/// Dispatches a single step; the exact scheme has no increment form.
pub fn step(kind: SchemeKind, model: &Model, h: f64, x: f64, xi: f64) -> Result<f64, DomainError> {
    match kind {
        SchemeKind::LieTrotter => lt_step(model, h, x, xi),
        SchemeKind::Strang => strang_step(model, h, x, xi),
        SchemeKind::EulerMaruyama => Ok(em_step(model, h, x, xi)),
        SchemeKind::Milstein => Ok(milstein_step(model, h, x, xi)),
        SchemeKind::SemiDiscrete => sd_step(model, h, x, xi),
        SchemeKind::LampertiEuler => lamperti_em_step(model, h, x, xi),
        SchemeKind::Exact => unreachable!("the exact scheme is sampled, not stepped"),
    }
}

/// Time the ODE sub-flow may run from `x` without crossing zero.
fn ode_budget(model: &Model, splitting: Splitting, h: f64, x: f64) -> Result<f64, DomainError> {
    if x == 0.0 && model.state_space().lower == 0.0 && model.ode_flow().vector_field(0.0) < 0.0 {
        return Ok(0.0);
    }
    model.adaptive_step(splitting, h, x)
}

/// A splitting step whose ODE sub-flows are shortened so they stop at zero.
/// The SDE sub-flow always uses the full increment, which keeps the time grid
/// of the noise intact. Returns the new state and the total ODE time used.
pub fn adaptive_split_step(model: &Model, splitting: Splitting, h: f64, x: f64, xi: f64) -> Result<(f64, f64), DomainError> {
    match splitting {
        Splitting::LieTrotter => {
            let t = ode_budget(model, splitting, h, x)?;
            Ok((model.phi2(h, model.phi1(t, x)?, xi)?, t))
        }
        Splitting::Strang => {
            let half = 0.5 * h;
            let t1 = 0.5 * ode_budget(model, splitting, h, x)?;
            let u = model.phi2(h, model.phi1(t1, x)?, xi)?;
            let t2 = 0.5 * ode_budget(model, splitting, h, u)?;
            debug_assert!(t1 <= half && t2 <= half);
            Ok((model.phi1(t2, u)?, t1 + t2))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimOptions {
    /// Shorten ODE sub-flows near an attainable zero boundary (LT/Strang).
    pub adaptive: bool,
    /// Clip EuM/Milstein outputs onto finite state-space bounds.
    pub truncate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: ModelKind,
    pub params: ParamVector,
    pub scheme: SchemeKind,
    pub t0: f64,
    pub h: f64,
    pub values: Vec<f64>,
    /// Per-step ODE time actually used, present for adaptive runs.
    pub ode_time: Option<Vec<f64>>,
    /// Per-step flag: the ODE time was shortened.
    pub adaptive_flags: Option<Vec<bool>>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    pub fn end(&self) -> f64 {
        *self.values.last().expect("trajectory holds the initial value")
    }

    /// True when no step had its flow time altered.
    pub fn is_uniform(&self) -> bool {
        self.adaptive_flags.as_ref().is_none_or(|flags| !flags.iter().any(|f| *f))
    }
}

fn truncate(model: &Model, x: f64) -> f64 {
    let space = model.state_space();
    x.clamp(space.lower, space.upper)
}

/// Iterates a scheme over every increment of `grid`, starting from `x0`.
pub fn simulate_path(kind: SchemeKind, model: &Model, x0: f64, grid: &NoiseGrid, opts: SimOptions) -> Result<Trajectory, SchemeError> {
    if !model.state_space().contains(x0) {
        return Err(SchemeError::InvalidStart(x0));
    }
    let h = grid.h;
    let n = grid.n_steps();
    let mut values = Vec::with_capacity(n + 1);
    values.push(x0);
    let adaptive = opts.adaptive && kind.splitting().is_some();
    let mut ode_time = adaptive.then(|| Vec::with_capacity(n));
    let mut flags = adaptive.then(|| Vec::with_capacity(n));

    if kind == SchemeKind::Exact {
        let mut rng = grid.key.with_purpose(Purpose::ExactSampling).rng();
        let mut x = x0;
        for _ in 0..n {
            x = model.exact_sample(h, x, &mut rng)?;
            values.push(x);
        }
    } else {
        let mut x = x0;
        for (k, &xi) in grid.increments.iter().enumerate() {
            let next = if adaptive {
                let (next, used) = adaptive_split_step(model, kind.splitting().unwrap(), h, x, xi)
                    .map_err(|reason| SchemeError::PathAborted { step: k, reason })?;
                let full = h;
                ode_time.as_mut().unwrap().push(used);
                flags.as_mut().unwrap().push(used < full);
                next
            } else {
                step(kind, model, h, x, xi).map_err(|reason| SchemeError::PathAborted { step: k, reason })?
            };
            x = if opts.truncate && matches!(kind, SchemeKind::EulerMaruyama | SchemeKind::Milstein) {
                truncate(model, next)
            } else {
                next
            };
            values.push(x);
        }
    }
    Ok(Trajectory {
        model: model.kind(),
        params: model.params().clone(),
        scheme: kind,
        t0: 0.0,
        h,
        values,
        ode_time,
        adaptive_flags: flags,
    })
}
