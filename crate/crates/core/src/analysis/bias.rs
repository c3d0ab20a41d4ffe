//! One-step bias of the splitting means against the exact conditional mean.

use super::convergence::fit_order;
use super::stats::LineFit;
use super::AnalysisError;
use crate::model::{Model, Splitting};

#[derive(Debug, Clone, PartialEq)]
pub struct BiasScan {
    /// `(h, |scheme mean − exact mean|)`.
    pub rows: Vec<(f64, f64)>,
    pub fit: Option<LineFit>,
    /// Every bias is zero to rounding: the scheme mean is exact.
    pub degenerate_zero: bool,
}

impl BiasScan {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

pub fn bias_order_scan(model: &Model, splitting: Splitting, x: f64, h_list: &[f64]) -> Result<BiasScan, AnalysisError> {
    let rows = h_list
        .iter()
        .map(|&h| {
            let scheme = model.step_mean(splitting, h, x)?;
            let exact = model.conditional_mean(h, x)?;
            Ok((h, (scheme - exact).abs()))
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    let scale = 1.0 + x.abs();
    let degenerate_zero = rows.iter().all(|(_, b)| *b <= 1e-13 * scale);
    let fit = if degenerate_zero { None } else { fit_order(&rows).ok() };
    Ok(BiasScan { rows, fit, degenerate_zero })
}
