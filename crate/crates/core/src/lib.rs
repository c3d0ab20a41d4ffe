//! Splitting schemes and pseudo-likelihood estimators for scalar SDEs whose
//! diffusion part is reducible through the Lamperti transform.

pub mod analysis;
pub mod likelihood;
pub mod model;
pub mod optimize;
pub mod quad;
pub mod rng;
pub mod scheme;
pub mod special;
