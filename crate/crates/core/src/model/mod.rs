//! Registered scalar SDE models `dX = f(X) dt + g(X) dW`.
//!
//! Every model is split as `f = f₁ + f₂`, where `dx = f₁(x) dt` has an
//! explicit flow and `dX = f₂(X) dt + g(X) dW` is solved through its Lamperti
//! map. In Lamperti coordinates the second subequation is a Brownian motion
//! with constant drift `shift` (zero for every model but Ginzburg–Landau), so
//! `f₂ = g·g'/2 + shift·g`.
//!
//! Parameter orderings (part of the CLI contract):
//!
//! | id | drift block | diffusion block |
//! |----|-------------|-----------------|
//! | `ou` | theta, mu | |
//! | `cir` | theta, mu | b |
//! | `student`, `igbm`, `f_diffusion`, `wright_fisher` | theta, mu | a |
//! | `ahn_gao` | kappa, theta | sigma |
//! | `ginzburg_landau`, `verhulst` | eta, lambda | sigma |

mod exact;
mod flow;
mod lamperti;

pub use flow::OdeFlow;
pub use lamperti::{Lamperti, BRANCH_WINDOW_SD};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Relative slack within which values just outside the state space are
/// snapped back onto the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("state {value} lies outside the state space")]
    OutsideStateSpace { value: f64 },
    #[error("ODE flow leaves the state space (reached {value})")]
    FlowExit { value: f64 },
    #[error("inverse ODE flow is undefined at {value}")]
    FlowInverse { value: f64 },
    #[error("Lamperti map is undefined at {value}")]
    Lamperti { value: f64 },
    #[error("inverse Lamperti map is undefined at {value}")]
    LampertiInverse { value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model `{0}` (known: {known})", known = ModelKind::ALL.map(|m| m.id()).join(", "))]
    UnknownModel(String),
    #[error("{model} expects {expected} parameters ({names}), got {got}")]
    Shape { model: ModelKind, expected: usize, got: usize, names: String },
    #[error("invalid parameters for {model}: {reason}")]
    InvalidParams { model: ModelKind, reason: String },
    #[error("{what} is not available for {model}")]
    Unsupported { model: ModelKind, what: &'static str },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Ou,
    Cir,
    Student,
    Igbm,
    FDiffusion,
    WrightFisher,
    AhnGao,
    GinzburgLandau,
    Verhulst,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Ou,
        ModelKind::Cir,
        ModelKind::Student,
        ModelKind::Igbm,
        ModelKind::FDiffusion,
        ModelKind::WrightFisher,
        ModelKind::AhnGao,
        ModelKind::GinzburgLandau,
        ModelKind::Verhulst,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Ou => "ou",
            ModelKind::Cir => "cir",
            ModelKind::Student => "student",
            ModelKind::Igbm => "igbm",
            ModelKind::FDiffusion => "f_diffusion",
            ModelKind::WrightFisher => "wright_fisher",
            ModelKind::AhnGao => "ahn_gao",
            ModelKind::GinzburgLandau => "ginzburg_landau",
            ModelKind::Verhulst => "verhulst",
        }
    }

    pub fn drift_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::AhnGao => &["kappa", "theta"],
            ModelKind::GinzburgLandau | ModelKind::Verhulst => &["eta", "lambda"],
            _ => &["theta", "mu"],
        }
    }

    pub fn diffusion_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Ou => &[],
            ModelKind::Cir => &["b"],
            ModelKind::Student | ModelKind::Igbm | ModelKind::FDiffusion | ModelKind::WrightFisher => &["a"],
            ModelKind::AhnGao | ModelKind::GinzburgLandau | ModelKind::Verhulst => &["sigma"],
        }
    }

    /// Drift names followed by diffusion names.
    pub fn param_names(self) -> Vec<&'static str> {
        self.drift_names().iter().chain(self.diffusion_names()).copied().collect()
    }

    pub fn shape(self) -> (usize, usize) {
        (self.drift_names().len(), self.diffusion_names().len())
    }

    pub fn is_pearson(self) -> bool {
        matches!(
            self,
            ModelKind::Ou | ModelKind::Cir | ModelKind::Student | ModelKind::Igbm | ModelKind::FDiffusion | ModelKind::WrightFisher
        )
    }

    /// Models with a closed-form transition law.
    pub fn has_exact_law(self) -> bool {
        matches!(self, ModelKind::Ou | ModelKind::Cir | ModelKind::AhnGao)
    }

    /// A valid parameter set used for defaults and self-checks.
    pub fn reference_params(self) -> ParamVector {
        let (theta, sigma) = match self {
            ModelKind::Ou => (vec![2.0, 1.0], vec![]),
            ModelKind::Cir => (vec![2.0, 6.0], vec![0.2]),
            ModelKind::Student => (vec![2.0, 1.0], vec![0.5]),
            ModelKind::Igbm => (vec![1.0, 1.0], vec![0.5]),
            ModelKind::FDiffusion => (vec![2.0, 10.0], vec![2.0]),
            ModelKind::WrightFisher => (vec![1.0, 0.5], vec![-0.3]),
            ModelKind::AhnGao => (vec![0.2, 2.0], vec![0.5]),
            ModelKind::GinzburgLandau => (vec![0.5, 1.0], vec![0.5]),
            ModelKind::Verhulst => (vec![1.0, 1.0], vec![0.5]),
        };
        ParamVector::new(theta, sigma)
    }

    /// An interior starting state matching `reference_params`.
    pub fn reference_state(self) -> f64 {
        match self {
            ModelKind::WrightFisher => 0.3,
            ModelKind::Ou | ModelKind::GinzburgLandau => 0.5,
            _ => 1.0,
        }
    }

    pub fn bind(self, params: &ParamVector) -> Result<Model, ModelError> {
        Model::new(self, params.clone())
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}

/// Joint parameter `α = (θ-block, σ-block)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub theta: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ParamVector {
    pub fn new(theta: Vec<f64>, sigma: Vec<f64>) -> Self {
        Self { theta, sigma }
    }

    /// Splits a flat vector in the model's declared order.
    pub fn from_flat(kind: ModelKind, flat: &[f64]) -> Result<Self, ModelError> {
        let (d1, d2) = kind.shape();
        if flat.len() != d1 + d2 {
            return Err(ModelError::Shape {
                model: kind,
                expected: d1 + d2,
                got: flat.len(),
                names: kind.param_names().join(", "),
            });
        }
        Ok(Self { theta: flat[..d1].to_vec(), sigma: flat[d1..].to_vec() })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.sigma).copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.theta.len() + self.sigma.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Entrance,
    Attainable,
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpace {
    pub lower: f64,
    pub upper: f64,
    pub lower_boundary: Boundary,
    pub upper_boundary: Boundary,
    /// Whether the finite endpoint itself belongs to the closed state space
    /// used for data and scheme outputs.
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl StateSpace {
    fn real_line() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            lower_boundary: Boundary::Natural,
            upper_boundary: Boundary::Natural,
            lower_closed: false,
            upper_closed: false,
        }
    }

    fn half_line(lower_boundary: Boundary, lower_closed: bool) -> Self {
        Self {
            lower: 0.0,
            upper: f64::INFINITY,
            lower_boundary,
            upper_boundary: Boundary::Natural,
            lower_closed,
            upper_closed: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = x > self.lower || (self.lower_closed && x == self.lower);
        let below = x < self.upper || (self.upper_closed && x == self.upper);
        above && below
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    /// Snaps floating-point residue back onto a closed boundary.
    pub fn project(&self, x: f64) -> Option<f64> {
        if self.contains(x) {
            return Some(x);
        }
        if x.is_nan() {
            return None;
        }
        if self.lower_closed && x < self.lower && self.lower - x <= BOUNDARY_TOLERANCE * self.lower.abs().max(1.0) {
            return Some(self.lower);
        }
        if self.upper_closed && x > self.upper && x - self.upper <= BOUNDARY_TOLERANCE * self.upper.abs().max(1.0) {
            return Some(self.upper);
        }
        None
    }
}

/// Which splitting composition a one-step quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Splitting {
    LieTrotter,
    Strang,
}

/// Pearson coefficients: `dX = −θ(X − μ)dt + √(2θ(aX² + bX + c)) dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pearson {
    pub theta: f64,
    pub mu: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Pearson {
    pub fn theta_tilde(&self) -> f64 {
        self.theta * (1.0 + self.a)
    }

    pub fn mu_tilde(&self) -> f64 {
        (self.mu - 0.5 * self.b) / (1.0 + self.a)
    }

    /// Mean of the SDE subequation `dX = θ(aX + b/2)dt + g dW` after time `h`.
    fn sde_mean(&self, h: f64, z: f64) -> f64 {
        if self.a == 0.0 {
            z + 0.5 * self.theta * self.b * h
        } else {
            let shift = 0.5 * self.b / self.a;
            (self.theta * self.a * h).exp() * (z + shift) - shift
        }
    }
}

/// `f(x) = c0 + c1 x + c2 x² + c3 x³`
#[derive(Debug, Clone, Copy, PartialEq)]
struct Drift {
    c0: f64,
    c1: f64,
    c2: f64,
    c3: f64,
}

/// A model bound to a validated parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    params: ParamVector,
    drift: Drift,
    lamperti: Lamperti,
    flow: OdeFlow,
    shift: f64,
    space: StateSpace,
    pearson: Option<Pearson>,
    ergodic: Option<bool>,
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl Model {
    pub fn new(kind: ModelKind, params: ParamVector) -> Result<Self, ModelError> {
        let (d1, d2) = kind.shape();
        if params.theta.len() != d1 || params.sigma.len() != d2 {
            return Err(ModelError::Shape {
                model: kind,
                expected: d1 + d2,
                got: params.dim(),
                names: kind.param_names().join(", "),
            });
        }
        let invalid = |reason: &str| ModelError::InvalidParams { model: kind, reason: reason.to_string() };
        if params.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        if kind.is_pearson() {
            Self::pearson(kind, params, invalid)
        } else {
            Self::polynomial(kind, params, invalid)
        }
    }

    fn pearson(kind: ModelKind, params: ParamVector, invalid: impl Fn(&str) -> ModelError) -> Result<Self, ModelError> {
        let theta = params.theta[0];
        let mu = params.theta[1];
        if !positive(theta) {
            return Err(invalid("theta must be positive"));
        }
        let scale = |a: f64| (2.0 * theta * a).abs().sqrt();
        let mut ergodic = None;
        let (a, b, c, lamperti, space) = match kind {
            ModelKind::Ou => (0.0, 0.0, 1.0, Lamperti::Affine { s: (2.0 * theta).sqrt() }, StateSpace::real_line()),
            ModelKind::Cir => {
                let b = params.sigma[0];
                if !positive(mu) || !positive(b) {
                    return Err(invalid("mu and b must be positive"));
                }
                let lower = if mu >= b { Boundary::Entrance } else { Boundary::Attainable };
                (0.0, b, 0.0, Lamperti::Sqrt { k: 2.0 * theta * b }, StateSpace::half_line(lower, true))
            }
            ModelKind::Student => {
                let a = params.sigma[0];
                if !positive(a) {
                    return Err(invalid("a must be positive"));
                }
                (a, 0.0, a, Lamperti::Asinh { s: scale(a) }, StateSpace::real_line())
            }
            ModelKind::Igbm => {
                let a = params.sigma[0];
                if !positive(a) || !positive(mu) {
                    return Err(invalid("a and mu must be positive"));
                }
                (a, 0.0, 0.0, Lamperti::Log { s: scale(a) }, StateSpace::half_line(Boundary::Entrance, false))
            }
            ModelKind::FDiffusion => {
                let a = params.sigma[0];
                if !positive(a) || !positive(mu) {
                    return Err(invalid("a and mu must be positive"));
                }
                let lower = if mu >= 1.0 { Boundary::Entrance } else { Boundary::Attainable };
                ergodic = Some(mu >= a);
                (a, a, 0.0, Lamperti::AsinhSqrt { s: scale(a) }, StateSpace::half_line(lower, true))
            }
            ModelKind::WrightFisher => {
                let a = params.sigma[0];
                if !(a > -1.0 && a < 0.0) {
                    return Err(invalid("a must lie in (-1, 0)"));
                }
                if !(mu > 0.0 && mu < 1.0) {
                    return Err(invalid("mu must lie in (0, 1)"));
                }
                let entrance = mu.min(1.0 - mu) >= -a;
                let boundary = if entrance { Boundary::Entrance } else { Boundary::Attainable };
                let space = StateSpace {
                    lower: 0.0,
                    upper: 1.0,
                    lower_boundary: boundary,
                    upper_boundary: boundary,
                    lower_closed: true,
                    upper_closed: true,
                };
                (a, -a, 0.0, Lamperti::Arcsin { s: scale(a) }, space)
            }
            _ => unreachable!("not a Pearson model"),
        };
        let pearson = Pearson { theta, mu, a, b, c };
        Ok(Self {
            kind,
            drift: Drift { c0: theta * mu, c1: -theta, c2: 0.0, c3: 0.0 },
            lamperti,
            flow: OdeFlow::Linear { rate: pearson.theta_tilde(), center: pearson.mu_tilde() },
            shift: 0.0,
            space,
            pearson: Some(pearson),
            ergodic,
            params,
        })
    }

    fn polynomial(kind: ModelKind, params: ParamVector, invalid: impl Fn(&str) -> ModelError) -> Result<Self, ModelError> {
        let (p, q) = (params.theta[0], params.theta[1]);
        let sigma = params.sigma[0];
        let half_var = 0.5 * sigma * sigma;
        let (drift, lamperti, flow, shift, lower) = match kind {
            ModelKind::AhnGao => {
                let (kappa, theta) = (p, q);
                if !positive(kappa) || !positive(theta) || !positive(sigma) {
                    return Err(invalid("kappa, theta and sigma must be positive"));
                }
                let drift = Drift { c0: 0.0, c1: kappa * theta, c2: -kappa, c3: 0.0 };
                let flow = OdeFlow::Logistic { a: kappa * theta, b: kappa + 0.75 * sigma * sigma };
                (drift, Lamperti::InvSqrt { s: sigma }, flow, 0.0, Boundary::Entrance)
            }
            ModelKind::GinzburgLandau => {
                let (eta, lambda) = (p, q);
                if !(eta >= 0.0) || !positive(lambda) || !positive(sigma) {
                    return Err(invalid("eta must be non-negative, lambda and sigma positive"));
                }
                let drift = Drift { c0: 0.0, c1: eta + half_var, c2: 0.0, c3: -lambda };
                (drift, Lamperti::Log { s: sigma }, OdeFlow::Cubic { lambda }, eta / sigma, Boundary::Natural)
            }
            ModelKind::Verhulst => {
                let (eta, lambda) = (p, q);
                if !positive(eta) || !positive(lambda) || !positive(sigma) {
                    return Err(invalid("eta, lambda and sigma must be positive"));
                }
                let drift = Drift { c0: 0.0, c1: eta + half_var, c2: -lambda, c3: 0.0 };
                let flow = OdeFlow::Logistic { a: eta, b: lambda };
                (drift, Lamperti::Log { s: sigma }, flow, 0.0, Boundary::Natural)
            }
            _ => unreachable!("Pearson models are handled separately"),
        };
        Ok(Self {
            kind,
            drift,
            lamperti,
            flow,
            shift,
            space: StateSpace::half_line(lower, false),
            pearson: None,
            ergodic: None,
            params,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.space
    }

    pub fn pearson_coefficients(&self) -> Option<&Pearson> {
        self.pearson.as_ref()
    }

    /// F-diffusion only: whether `μ ≥ a`, the condition stated for ergodicity.
    /// Reported separately from the boundary type, which uses `μ ≥ 1`.
    pub fn ergodic(&self) -> Option<bool> {
        self.ergodic
    }

    pub fn lamperti_map(&self) -> &Lamperti {
        &self.lamperti
    }

    pub fn ode_flow(&self) -> &OdeFlow {
        &self.flow
    }

    /// Constant drift of the SDE subequation in Lamperti coordinates.
    pub fn lamperti_shift(&self) -> f64 {
        self.shift
    }

    pub fn is_monotone(&self) -> bool {
        self.lamperti.is_monotone()
    }

    pub fn f(&self, x: f64) -> f64 {
        let d = &self.drift;
        d.c0 + x * (d.c1 + x * (d.c2 + x * d.c3))
    }

    pub fn f_prime(&self, x: f64) -> f64 {
        let d = &self.drift;
        d.c1 + x * (2.0 * d.c2 + 3.0 * x * d.c3)
    }

    pub fn f_second(&self, x: f64) -> f64 {
        2.0 * self.drift.c2 + 6.0 * self.drift.c3 * x
    }

    pub fn g(&self, x: f64) -> f64 {
        self.lamperti.g(x)
    }

    pub fn g_prime(&self, x: f64) -> f64 {
        self.lamperti.g_prime(x)
    }

    pub fn g_g_prime(&self, x: f64) -> f64 {
        self.lamperti.g_g_prime(x)
    }

    /// `(g²)'' `
    pub fn g2_second(&self, x: f64) -> f64 {
        self.lamperti.g2_second(x)
    }

    /// Drift of the explicitly solvable ODE subequation.
    pub fn f1(&self, x: f64) -> f64 {
        self.flow.vector_field(x)
    }

    /// Drift of the Lamperti-reducible SDE subequation.
    pub fn f2(&self, x: f64) -> f64 {
        0.5 * self.g_g_prime(x) + self.shift * self.g(x)
    }

    fn check_state(&self, x: f64) -> Result<f64, DomainError> {
        self.space.project(x).ok_or(DomainError::OutsideStateSpace { value: x })
    }

    /// `φ¹ₕ(x)`.
    pub fn phi1(&self, h: f64, x: f64) -> Result<f64, DomainError> {
        let x = self.check_state(x)?;
        let y = self.flow.forward(h, x);
        self.space.project(y).ok_or(DomainError::FlowExit { value: y })
    }

    /// `(φ¹ₕ⁻¹(y), d/dy φ¹ₕ⁻¹(y))`; the preimage must lie in the state space.
    pub fn phi1_inverse(&self, h: f64, y: f64) -> Result<(f64, f64), DomainError> {
        let (x, dx) = self.flow.inverse(h, y)?;
        if !x.is_finite() || !dx.is_finite() {
            return Err(DomainError::FlowInverse { value: y });
        }
        let x = self.space.project(x).ok_or(DomainError::FlowInverse { value: y })?;
        Ok((x, dx))
    }

    pub fn v(&self, x: f64) -> Result<f64, DomainError> {
        self.lamperti.v(x)
    }

    pub fn v_inv(&self, y: f64) -> Result<f64, DomainError> {
        self.lamperti.v_inv(y)
    }

    /// `φ²ₕ(x, ξ) = v⁻¹(v(x) + shift·h + ξ)`.
    pub fn phi2(&self, h: f64, x: f64, xi: f64) -> Result<f64, DomainError> {
        let x = self.check_state(x)?;
        let y = self.v_inv(self.v(x)? + self.shift * h + xi)?;
        self.check_state(y)
    }

    /// Drift of the unit-diffusion process `v(X)`.
    pub fn lamperti_drift(&self, y: f64) -> Result<f64, DomainError> {
        let x = self.v_inv(y)?;
        if !self.space.contains_interior(x) {
            return Err(DomainError::OutsideStateSpace { value: x });
        }
        let g = self.g(x);
        Ok((self.f(x) - 0.5 * self.g_g_prime(x)) / g)
    }

    /// Largest step `≤ h` keeping the linear ODE flow from `x` non-negative,
    /// for half-line Pearson models whose flow centre is negative. The Strang
    /// bound is twice the Lie–Trotter bound because each half-flow runs for
    /// half the step.
    pub fn adaptive_step(&self, splitting: Splitting, h: f64, x: f64) -> Result<f64, DomainError> {
        if self.space.lower != 0.0 || !self.space.upper.is_infinite() {
            return Ok(h);
        }
        if !(x > 0.0) {
            return Err(DomainError::OutsideStateSpace { value: x });
        }
        Ok(match self.flow.time_to_zero(x) {
            Some(tau) => match splitting {
                Splitting::LieTrotter => h.min(tau),
                Splitting::Strang => h.min(2.0 * tau),
            },
            None => h,
        })
    }

    /// Conditional mean of one splitting step from `x`, in closed form.
    pub fn step_mean(&self, splitting: Splitting, h: f64, x: f64) -> Result<f64, ModelError> {
        let p = self.pearson.ok_or(ModelError::Unsupported { model: self.kind, what: "closed-form step mean" })?;
        let (rate, center) = (p.theta_tilde(), p.mu_tilde());
        let flow = |t: f64, z: f64| center + (-rate * t).exp() * (z - center);
        Ok(match splitting {
            Splitting::LieTrotter => p.sde_mean(h, flow(h, x)),
            Splitting::Strang => flow(0.5 * h, p.sde_mean(h, flow(0.5 * h, x))),
        })
    }

    /// True conditional mean `E[X_t | X_0 = x]`, where known in closed form.
    pub fn conditional_mean(&self, t: f64, x: f64) -> Result<f64, ModelError> {
        match self.pearson {
            Some(p) => Ok(p.mu + (-p.theta * t).exp() * (x - p.mu)),
            None => Err(ModelError::Unsupported { model: self.kind, what: "closed-form conditional mean" }),
        }
    }
}
