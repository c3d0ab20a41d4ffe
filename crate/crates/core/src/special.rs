//! Small numerical helpers shared by the likelihoods and exact laws.

use rand::RngCore;
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `½·ln(2πh)`, the per-observation constant dropped from the pseudo-likelihoods.
#[inline]
pub fn half_log_2pi(h: f64) -> f64 {
    LN_SQRT_2PI + 0.5 * h.ln()
}

#[inline]
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let r = x - mean;
    -0.5 * r * r / var - half_log_2pi(var)
}

#[inline]
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    normal_logpdf(x, mean, var).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Σ exp(v)`; `-∞` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Log-density of the noncentral chi-square law with `df` degrees of freedom
/// and noncentrality `nc`, evaluated as a Poisson mixture of central
/// chi-squares. Terms are generated from the dominant index outwards with
/// the exact term ratio, so only one pair of `ln_gamma` calls is needed.
pub fn noncentral_chi2_logpdf(x: f64, df: f64, nc: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    let half_k = 0.5 * df;
    if nc <= 0.0 {
        return (half_k - 1.0) * x.ln() - 0.5 * x - half_k * std::f64::consts::LN_2 - ln_gamma(half_k);
    }
    let half_nc = 0.5 * nc;
    let log_term = |j: f64| {
        -half_nc + j * half_nc.ln() - ln_gamma(j + 1.0) + (half_k + j - 1.0) * x.ln()
            - 0.5 * x
            - (half_k + j) * std::f64::consts::LN_2
            - ln_gamma(half_k + j)
    };
    let q = 0.25 * nc * x;
    let disc = (half_k - 1.0).powi(2) + nc * x;
    let peak = ((-(half_k + 1.0) + disc.sqrt()) / 2.0).max(0.0).round();
    let log_peak = log_term(peak);

    // Relative weights w_j / w_peak accumulated in both directions.
    let cutoff = 1e-18;
    let mut total = 1.0;
    let mut w = 1.0;
    let mut j = peak;
    loop {
        w *= q / ((j + 1.0) * (half_k + j));
        j += 1.0;
        total += w;
        if w < cutoff * total || j > peak + 1e6 {
            break;
        }
    }
    let mut w = 1.0;
    let mut j = peak;
    while j >= 1.0 {
        w *= (j * (half_k + j - 1.0)) / q;
        j -= 1.0;
        total += w;
        if w < cutoff * total {
            break;
        }
    }
    log_peak + total.ln()
}

/// One draw from the noncentral chi-square law via its Poisson mixture.
pub fn sample_noncentral_chi2<R: RngCore + ?Sized>(rng: &mut R, df: f64, nc: f64) -> f64 {
    let extra = if nc > 0.0 {
        let poisson = Poisson::new(0.5 * nc).expect("positive Poisson rate");
        poisson.sample(rng)
    } else {
        0.0
    };
    let shape = 0.5 * df + extra;
    let gamma = Gamma::new(shape, 2.0).expect("positive gamma shape");
    gamma.sample(rng)
}
