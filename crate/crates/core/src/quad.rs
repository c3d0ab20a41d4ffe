//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Used to integrate transition densities over the state space. Intervals
//! are bisected until the Kronrod/Gauss discrepancy is below the local share
//! of the tolerance. Integrable endpoint singularities such as `1/√x` are
//! handled by repeated bisection near the endpoint.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Upper bound on the number of live subintervals.
const MAX_INTERVALS: usize = 4000;

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (i, &x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kron * half, (kron - gauss).abs() * half)
}

/// Globally adaptive: always bisect the subinterval with the largest error
/// estimate until the summed estimate meets `tol` or the budget runs out.
fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let (value, err) = kronrod(f, a, b);
    let mut parts = vec![(a, b, value, err)];
    let mut total_err = err;
    while total_err > tol && parts.len() < MAX_INTERVALS {
        let (worst, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one interval");
        let (lo, hi, _, e) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            // Interval exhausted at machine precision; keep it and stop refining it.
            parts.push((lo, hi, kronrod(f, lo, hi).0, 0.0));
            total_err -= e;
            continue;
        }
        let (v1, e1) = kronrod(f, lo, mid);
        let (v2, e2) = kronrod(f, mid, hi);
        total_err += e1 + e2 - e;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}

/// `∫_a^b f` on a finite interval to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let guard = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adapt(&guard, a, b, tol)
}

/// Integrates over `[a, b]` split at `breaks` (sorted, clipped to the interval).
/// Splitting at the location of sharp features keeps the first Kronrod pass
/// from stepping over a narrow peak.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut points: Vec<f64> = breaks.iter().copied().filter(|p| *p > a && *p < b).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut edges = Vec::with_capacity(points.len() + 2);
    edges.push(a);
    edges.extend(points);
    edges.push(b);
    let share = tol / (edges.len() - 1) as f64;
    edges.windows(2).map(|w| integrate(&f, w[0], w[1], share)).sum()
}

/// `∫_a^∞ f`, mapped onto `[0, 1)` via `x = a + s·t/(1 − t)`.
pub fn integrate_upper_tail<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, tol: f64) -> f64 {
    let g = |t: f64| {
        let one_minus = 1.0 - t;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let x = a + scale * t / one_minus;
        f(x) * scale / (one_minus * one_minus)
    };
    integrate(g, 0.0, 1.0, tol)
}

/// `∫_{-∞}^b f`.
pub fn integrate_lower_tail<F: Fn(f64) -> f64>(f: F, b: f64, scale: f64, tol: f64) -> f64 {
    integrate_upper_tail(|x| f(2.0 * b - x), b, scale, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14);
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let v = integrate(|x| 0.5 / x.sqrt(), 0.0, 1.0, 1e-10);
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn narrow_gaussian_with_breaks() {
        let sd = 1e-3;
        let pdf = |x: f64| (-(x - 3.0).powi(2) / (2.0 * sd * sd)).exp() / (sd * (std::f64::consts::TAU).sqrt());
        let v = integrate_with_breaks(pdf, 0.0, 10.0, &[3.0 - 10.0 * sd, 3.0, 3.0 + 10.0 * sd], 1e-12);
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn exponential_tail() {
        let v = integrate_upper_tail(|x| (-x).exp(), 1.0, 1.0, 1e-12);
        assert!((v - (-1f64).exp()).abs() < 1e-10);
        let w = integrate_lower_tail(|x| x.exp(), 0.0, 1.0, 1e-12);
        assert!((w - 1.0).abs() < 1e-10);
    }
}
