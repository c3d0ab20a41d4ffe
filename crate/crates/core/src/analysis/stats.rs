//! Sample summaries and least squares used across the studies.

use super::AnalysisError;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Linear-interpolation quantile on sorted data (positions `p·(n − 1)`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Quartiles {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let s = sorted(xs);
        Some(Self { q25: quantile_sorted(&s, 0.25), median: quantile_sorted(&s, 0.5), q75: quantile_sorted(&s, 0.75) })
    }

    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

/// Moment-based skewness `m₃/m₂^{3/2}`.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Moment-based excess kurtosis `m₄/m₂² − 3`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit, AnalysisError> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(AnalysisError::TooFewRows { need: 2, got: n.min(y.len()) });
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_of_small_sets() {
        let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((q.q25, q.median, q.q75), (2.0, 3.0, 4.0));
        let q = Quartiles::of(&[1.0, 2.0]).unwrap();
        assert_eq!(q.median, 1.5);
        assert!(Quartiles::of(&[]).is_none());
    }

    #[test]
    fn ols_recovers_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let fit = ols(&x, &y).unwrap();
        assert!((fit.slope - 2.5).abs() < 1e-14 && (fit.intercept + 1.0).abs() < 1e-14);
        assert!((fit.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shape_moments_of_symmetric_two_point() {
        let xs = [-1.0, 1.0, -1.0, 1.0];
        assert!(skewness(&xs).abs() < 1e-15);
        assert!((excess_kurtosis(&xs) + 2.0).abs() < 1e-14);
        assert!((variance(&xs) - 4.0 / 3.0).abs() < 1e-15);
    }
}
