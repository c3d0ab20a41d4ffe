//! Experiment harness: convergence curves, distributional comparisons,
//! inference studies and the invariant suite.

use thiserror::Error;

use crate::likelihood::LikelihoodError;
use crate::model::ModelError;
use crate::optimize::OptimizeError;
use crate::rng::RngError;
use crate::scheme::SchemeError;

pub mod bias;
pub mod check;
pub mod convergence;
pub mod density;
pub mod normality;
pub mod preservation;
pub mod stats;
pub mod study;
pub mod wasserstein;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("step {h} is not a multiple of h_fine = {h_fine} dividing T = {t}")]
    NonNested { h: f64, h_fine: f64, t: f64 },
    #[error("need at least {need} usable rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("need at least {need} converged replicates, got {got}")]
    TooFewConverged { need: usize, got: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Rng(#[from] RngError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}
