//! Diffusion coefficients and their Lamperti maps `v(x) = ∫ dx / g(x)`.

use super::DomainError;

/// Gaussian weight cut-off used when enumerating preimages of a periodic
/// inverse map: branches further than this many standard deviations from the
/// mean carry relative weight below 1e-16.
pub const BRANCH_WINDOW_SD: f64 = 9.0;

/// The shape of `g`, with its scale folded in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lamperti {
    /// `g = s`
    Affine { s: f64 },
    /// `g = √(k·x)`
    Sqrt { k: f64 },
    /// `g = s·√(1 + x²)`
    Asinh { s: f64 },
    /// `g = s·x`
    Log { s: f64 },
    /// `g = s·√(x(1 + x))`
    AsinhSqrt { s: f64 },
    /// `g = s·√(x(1 − x))`
    Arcsin { s: f64 },
    /// `g = s·x^{3/2}`
    InvSqrt { s: f64 },
}

impl Lamperti {
    /// `g(x)`. Outside the natural domain the radicand is clipped at zero so
    /// that schemes which leave the state space by design still evaluate.
    pub fn g(&self, x: f64) -> f64 {
        match *self {
            Lamperti::Affine { s } => s,
            Lamperti::Sqrt { k } => (k * x).max(0.0).sqrt(),
            Lamperti::Asinh { s } => s * x.hypot(1.0),
            Lamperti::Log { s } => s * x.abs(),
            Lamperti::AsinhSqrt { s } => s * (x * (1.0 + x)).max(0.0).sqrt(),
            Lamperti::Arcsin { s } => s * (x * (1.0 - x)).max(0.0).sqrt(),
            Lamperti::InvSqrt { s } => s * x.max(0.0).powf(1.5),
        }
    }

    pub fn g_prime(&self, x: f64) -> f64 {
        match *self {
            Lamperti::Affine { .. } => 0.0,
            Lamperti::Sqrt { k } => 0.5 * k / (k * x).sqrt(),
            Lamperti::Asinh { s } => s * x / x.hypot(1.0),
            Lamperti::Log { s } => s * x.signum(),
            Lamperti::AsinhSqrt { s } => s * (2.0 * x + 1.0) / (2.0 * (x * (1.0 + x)).sqrt()),
            Lamperti::Arcsin { s } => s * (1.0 - 2.0 * x) / (2.0 * (x * (1.0 - x)).sqrt()),
            Lamperti::InvSqrt { s } => 1.5 * s * x.sqrt(),
        }
    }

    /// `g·g' = ½ (g²)'`, finite even where `g'` is not.
    pub fn g_g_prime(&self, x: f64) -> f64 {
        match *self {
            Lamperti::Affine { .. } => 0.0,
            Lamperti::Sqrt { k } => 0.5 * k,
            Lamperti::Asinh { s } | Lamperti::Log { s } => s * s * x,
            Lamperti::AsinhSqrt { s } => 0.5 * s * s * (2.0 * x + 1.0),
            Lamperti::Arcsin { s } => 0.5 * s * s * (1.0 - 2.0 * x),
            Lamperti::InvSqrt { s } => 1.5 * s * s * x * x,
        }
    }

    /// `(g²)''`
    pub fn g2_second(&self, x: f64) -> f64 {
        match *self {
            Lamperti::Affine { .. } | Lamperti::Sqrt { .. } => 0.0,
            Lamperti::Asinh { s } | Lamperti::Log { s } | Lamperti::AsinhSqrt { s } => 2.0 * s * s,
            Lamperti::Arcsin { s } => -2.0 * s * s,
            Lamperti::InvSqrt { s } => 6.0 * s * s * x,
        }
    }

    /// Whether `v⁻¹` is one-to-one on the whole real line.
    pub fn is_monotone(&self) -> bool {
        matches!(self, Lamperti::Affine { .. } | Lamperti::Asinh { .. } | Lamperti::Log { .. })
    }

    pub fn v(&self, x: f64) -> Result<f64, DomainError> {
        let bad = || DomainError::Lamperti { value: x };
        if x.is_nan() {
            return Err(bad());
        }
        match *self {
            Lamperti::Affine { s } => Ok(x / s),
            Lamperti::Sqrt { k } => {
                if x < 0.0 {
                    return Err(bad());
                }
                Ok(2.0 * x.sqrt() / k.sqrt())
            }
            Lamperti::Asinh { s } => Ok(x.asinh() / s),
            Lamperti::Log { s } => {
                if x <= 0.0 {
                    return Err(bad());
                }
                Ok(x.ln() / s)
            }
            Lamperti::AsinhSqrt { s } => {
                if x < 0.0 {
                    return Err(bad());
                }
                Ok(2.0 * x.sqrt().asinh() / s)
            }
            Lamperti::Arcsin { s } => Ok(2.0 * clipped_unit_sqrt(x)?.asin() / s),
            Lamperti::InvSqrt { s } => {
                if x <= 0.0 {
                    return Err(bad());
                }
                Ok(-2.0 / (s * x.sqrt()))
            }
        }
    }

    pub fn v_inv(&self, y: f64) -> Result<f64, DomainError> {
        if y.is_nan() {
            return Err(DomainError::LampertiInverse { value: y });
        }
        let x = match *self {
            Lamperti::Affine { s } => s * y,
            Lamperti::Sqrt { k } => 0.25 * k * y * y,
            Lamperti::Asinh { s } => (s * y).sinh(),
            Lamperti::Log { s } => (s * y).exp(),
            Lamperti::AsinhSqrt { s } => (0.5 * s * y).sinh().powi(2),
            Lamperti::Arcsin { s } => (0.5 * s * y).sin().powi(2),
            Lamperti::InvSqrt { s } => {
                if y == 0.0 {
                    return Err(DomainError::LampertiInverse { value: y });
                }
                4.0 / (s * s * y * y)
            }
        };
        if x.is_finite() {
            Ok(x)
        } else {
            Err(DomainError::LampertiInverse { value: y })
        }
    }

    /// All `y` with `v⁻¹(y) = x` that matter for a Gaussian centred at
    /// `center` with standard deviation `sd`. The branch nearest to the centre
    /// is always included. Output is sorted.
    pub fn preimages(&self, x: f64, center: f64, sd: f64, out: &mut Vec<f64>) -> Result<(), DomainError> {
        out.clear();
        let base = self.v(x)?;
        match *self {
            Lamperti::Affine { .. } | Lamperti::Asinh { .. } | Lamperti::Log { .. } => out.push(base),
            Lamperti::Sqrt { .. } | Lamperti::AsinhSqrt { .. } | Lamperti::InvSqrt { .. } => {
                let r = base.abs();
                out.push(-r);
                if r > 0.0 {
                    out.push(r);
                }
            }
            Lamperti::Arcsin { s } => {
                let period = 2.0 * std::f64::consts::PI / s;
                let r = base.abs();
                let lo = center - BRANCH_WINDOW_SD * sd;
                let hi = center + BRANCH_WINDOW_SD * sd;
                let k_lo = ((lo - r) / period).floor() as i64 - 1;
                let k_hi = ((hi + r) / period).ceil() as i64 + 1;
                let mut nearest = f64::NAN;
                let mut nearest_dist = f64::INFINITY;
                for k in k_lo..=k_hi {
                    let shift = k as f64 * period;
                    for cand in [shift - r, shift + r] {
                        let dist = (cand - center).abs();
                        if dist < nearest_dist {
                            nearest_dist = dist;
                            nearest = cand;
                        }
                        if cand >= lo && cand <= hi {
                            out.push(cand);
                        }
                    }
                }
                if out.is_empty() {
                    out.push(nearest);
                }
                out.sort_by(f64::total_cmp);
                // r = 0 or r = half period makes neighbouring branches coincide.
                let tol = 1e-12 * period;
                out.dedup_by(|a, b| (*a - *b).abs() <= tol);
            }
        }
        Ok(())
    }
}

/// `√x` for a proportion, tolerating rounding residue at 0 and 1.
fn clipped_unit_sqrt(x: f64) -> Result<f64, DomainError> {
    const TOL: f64 = 1e-12;
    let r = if x < 0.0 {
        if x < -TOL {
            return Err(DomainError::Lamperti { value: x });
        }
        0.0
    } else {
        x.sqrt()
    };
    if r > 1.0 {
        if r > 1.0 + TOL {
            return Err(DomainError::Lamperti { value: x });
        }
        return Ok(1.0);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wright_fisher_branches_cover_window() {
        let lam = Lamperti::Arcsin { s: 0.8f64.sqrt() };
        let mut out = Vec::new();
        lam.preimages(0.3, 0.4, 0.5, &mut out).unwrap();
        assert!(out.len() >= 2);
        for y in &out {
            assert!((lam.v_inv(*y).unwrap() - 0.3).abs() < 1e-12);
            assert!((y - 0.4).abs() <= BRANCH_WINDOW_SD * 0.5 + 1e-9);
        }
        // Far from any branch: still returns the nearest one.
        lam.preimages(0.3, 1.0, 1e-6, &mut out).unwrap();
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn boundary_branches_are_not_duplicated() {
        let lam = Lamperti::Arcsin { s: 1.0 };
        let mut out = Vec::new();
        lam.preimages(0.0, 0.0, 3.0, &mut out).unwrap();
        let mut sorted = out.clone();
        sorted.dedup();
        assert_eq!(out, sorted);
        assert!(out.windows(2).all(|w| w[1] - w[0] > 1.0));
        lam.preimages(1.0, 0.0, 3.0, &mut out).unwrap();
        assert!(out.windows(2).all(|w| w[1] - w[0] > 1.0));
    }

    #[test]
    fn proportion_residue_is_clipped() {
        let lam = Lamperti::Arcsin { s: 1.0 };
        assert!(lam.v(1.0 + 1e-14).is_ok());
        assert!(lam.v(-1e-14).is_ok());
        assert!(lam.v(1.0 + 1e-6).is_err());
        assert!(lam.v(-1e-6).is_err());
    }
}
