//! Exact transition laws for the models that have one.
//!
//! * OU: Gaussian.
//! * CIR: scaled noncentral chi-square.
//! * Ahn–Gao: `1/X` is a CIR process, so draws and densities go through the
//!   reciprocal of a CIR transition.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{Model, ModelError, ModelKind};
use crate::special::{noncentral_chi2_logpdf, normal_logpdf, sample_noncentral_chi2};

/// CIR law in the `(θ, μ, b)` parameterisation, `dX = −θ(X − μ)dt + √(2θbX) dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirLaw {
    pub theta: f64,
    pub mu: f64,
    pub b: f64,
}

impl CirLaw {
    pub fn degrees_of_freedom(&self) -> f64 {
        2.0 * self.mu / self.b
    }

    /// `(scale, noncentrality)` with `X_t = scale · χ²(df, nc)`.
    pub fn scale_and_noncentrality(&self, t: f64, x0: f64) -> (f64, f64) {
        let decay = (-self.theta * t).exp();
        let one_minus = -(-self.theta * t).exp_m1();
        let scale = 0.5 * one_minus * self.b;
        (scale, x0 * decay / scale)
    }

    pub fn sample<R: RngCore + ?Sized>(&self, t: f64, x0: f64, rng: &mut R) -> f64 {
        let (scale, nc) = self.scale_and_noncentrality(t, x0);
        scale * sample_noncentral_chi2(rng, self.degrees_of_freedom(), nc)
    }

    pub fn logpdf(&self, t: f64, x0: f64, y: f64) -> f64 {
        let (scale, nc) = self.scale_and_noncentrality(t, x0);
        noncentral_chi2_logpdf(y / scale, self.degrees_of_freedom(), nc) - scale.ln()
    }

    pub fn mean(&self, t: f64, x0: f64) -> f64 {
        self.mu + (-self.theta * t).exp() * (x0 - self.mu)
    }

    pub fn variance(&self, t: f64, x0: f64) -> f64 {
        let d = (-self.theta * t).exp();
        let one_minus = -(-self.theta * t).exp_m1();
        2.0 * self.b * x0 * (d - d * d) + self.mu * self.b * one_minus * one_minus
    }
}

impl Model {
    fn unsupported(&self) -> ModelError {
        ModelError::Unsupported { model: self.kind, what: "exact transition law" }
    }

    /// The CIR law of `X` (CIR) or of `1/X` (Ahn–Gao).
    pub fn cir_law(&self) -> Option<CirLaw> {
        match self.kind {
            ModelKind::Cir => Some(CirLaw { theta: self.params.theta[0], mu: self.params.theta[1], b: self.params.sigma[0] }),
            ModelKind::AhnGao => {
                let (kappa, theta, sigma) = (self.params.theta[0], self.params.theta[1], self.params.sigma[0]);
                let rate = kappa * theta;
                Some(CirLaw { theta: rate, mu: (kappa + sigma * sigma) / rate, b: sigma * sigma / (2.0 * rate) })
            }
            _ => None,
        }
    }

    /// One draw of `X_t | X_0 = x0`.
    pub fn exact_sample<R: RngCore + ?Sized>(&self, t: f64, x0: f64, rng: &mut R) -> Result<f64, ModelError> {
        match self.kind {
            ModelKind::Ou => {
                let (mean, var) = self.ou_moments(t, x0);
                let z: f64 = StandardNormal.sample(rng);
                Ok(mean + var.sqrt() * z)
            }
            ModelKind::Cir => Ok(self.cir_law().unwrap().sample(t, x0, rng)),
            ModelKind::AhnGao => Ok(1.0 / self.cir_law().unwrap().sample(t, 1.0 / x0, rng)),
            _ => Err(self.unsupported()),
        }
    }

    /// `ln f(y | x0)` of the exact transition law over time `t`.
    pub fn exact_logpdf(&self, t: f64, x0: f64, y: f64) -> Result<f64, ModelError> {
        match self.kind {
            ModelKind::Ou => {
                let (mean, var) = self.ou_moments(t, x0);
                Ok(normal_logpdf(y, mean, var))
            }
            ModelKind::Cir => Ok(self.cir_law().unwrap().logpdf(t, x0, y)),
            ModelKind::AhnGao => {
                if !(y > 0.0) {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(self.cir_law().unwrap().logpdf(t, 1.0 / x0, 1.0 / y) - 2.0 * y.ln())
            }
            _ => Err(self.unsupported()),
        }
    }

    /// Exact conditional mean and variance (OU and CIR).
    pub fn exact_moments(&self, t: f64, x0: f64) -> Option<(f64, f64)> {
        match self.kind {
            ModelKind::Ou => Some(self.ou_moments(t, x0)),
            ModelKind::Cir => {
                let law = self.cir_law().unwrap();
                Some((law.mean(t, x0), law.variance(t, x0)))
            }
            _ => None,
        }
    }

    fn ou_moments(&self, t: f64, x0: f64) -> (f64, f64) {
        let (theta, mu) = (self.params.theta[0], self.params.theta[1]);
        (mu + (-theta * t).exp() * (x0 - mu), -(-2.0 * theta * t).exp_m1())
    }
}
