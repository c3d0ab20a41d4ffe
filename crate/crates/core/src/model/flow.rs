//! Exact flows of the deterministic subequation `dx/dt = f₁(x)`.

use super::DomainError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeFlow {
    /// `f₁(x) = −rate·(x − center)`
    Linear { rate: f64, center: f64 },
    /// `f₁(x) = a·x − b·x²`
    Logistic { a: f64, b: f64 },
    /// `f₁(x) = −lambda·x³`
    Cubic { lambda: f64 },
}

impl OdeFlow {
    pub fn vector_field(&self, x: f64) -> f64 {
        match *self {
            OdeFlow::Linear { rate, center } => -rate * (x - center),
            OdeFlow::Logistic { a, b } => a * x - b * x * x,
            OdeFlow::Cubic { lambda } => -lambda * x * x * x,
        }
    }

    /// `φ¹ₕ(x)` without any state-space check.
    pub fn forward(&self, h: f64, x: f64) -> f64 {
        if h == 0.0 {
            return x;
        }
        match *self {
            OdeFlow::Linear { rate, center } => center + (-rate * h).exp() * (x - center),
            OdeFlow::Logistic { a, b } => {
                let growth = (a * h).exp();
                a * growth * x / (a + b * x * (a * h).exp_m1())
            }
            OdeFlow::Cubic { lambda } => x / (2.0 * lambda * h * x * x + 1.0).sqrt(),
        }
    }

    /// `φ¹ₕ⁻¹(y)` and its derivative in `y`.
    pub fn inverse(&self, h: f64, y: f64) -> Result<(f64, f64), DomainError> {
        match *self {
            OdeFlow::Linear { rate, center } => {
                let growth = (rate * h).exp();
                Ok((center + growth * (y - center), growth))
            }
            OdeFlow::Logistic { a, b } => {
                let growth = (a * h).exp();
                let denom = a * growth - b * y * (a * h).exp_m1();
                if !(denom > 0.0) {
                    return Err(DomainError::FlowInverse { value: y });
                }
                Ok((a * y / denom, a * a * growth / (denom * denom)))
            }
            OdeFlow::Cubic { lambda } => {
                let rest = 1.0 - 2.0 * lambda * h * y * y;
                if !(rest > 0.0) {
                    return Err(DomainError::FlowInverse { value: y });
                }
                Ok((y / rest.sqrt(), rest.powf(-1.5)))
            }
        }
    }

    /// Time for the linear flow started at `x > 0` to reach 0, when it does.
    pub fn time_to_zero(&self, x: f64) -> Option<f64> {
        match *self {
            OdeFlow::Linear { rate, center } if center < 0.0 && x > 0.0 => Some(-(-center / (x - center)).ln() / rate),
            _ => None,
        }
    }
}
