//! Normalisation checks for transition densities.

use crate::likelihood::{transition_density, EstimatorKind, LikelihoodError};
use crate::model::Model;
use crate::quad::{integrate, integrate_lower_tail, integrate_upper_tail, integrate_with_breaks};

const SPAN: f64 = 30.0;
const BREAKS: [f64; 17] = [-30.0, -20.0, -10.0, -6.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 10.0, 20.0, 30.0];

/// `∫ f(y | x0) dy` over the state space by adaptive quadrature.
///
/// The bulk is split at multiples of the local scale `g(φ¹ₕ(x0))·√h` around
/// the flow image; infinite tails are mapped onto finite intervals.
pub fn total_mass(estimator: EstimatorKind, model: &Model, h: f64, x0: f64, tol: f64) -> Result<f64, LikelihoodError> {
    let center = model.phi1(h, x0).map_err(crate::model::ModelError::from)?;
    let scale = (model.g(center) * h.sqrt()).max(1e-8 * (1.0 + center.abs()));
    // Probe once so unsupported combinations surface as errors.
    transition_density(estimator, model, h, x0, center)?;
    let f = |y: f64| transition_density(estimator, model, h, x0, y).unwrap_or(0.0);
    let space = *model.state_space();
    let lo = space.lower.max(center - SPAN * scale);
    let hi = space.upper.min(center + SPAN * scale);
    let breaks: Vec<f64> = BREAKS.iter().map(|k| center + k * scale).collect();
    let share = tol / 3.0;
    let mut mass = integrate_with_breaks(f, lo, hi, &breaks, share);
    if lo > space.lower {
        mass += if space.lower.is_finite() { integrate(f, space.lower, lo, share) } else { integrate_lower_tail(f, lo, scale, share) };
    }
    if hi < space.upper {
        mass += if space.upper.is_finite() { integrate(f, hi, space.upper, share) } else { integrate_upper_tail(f, hi, scale, share) };
    }
    Ok(mass)
}
