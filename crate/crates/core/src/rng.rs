//! Deterministic random streams and Brownian increment grids.
//!
//! Every stream is addressed by a [`StreamKey`]. The key is hashed with
//! SHA-256 into a ChaCha8 seed, so any (seed, path, purpose) triple can be
//! regenerated independently of all others and of thread scheduling.
//!
//! Normals are produced with the Box–Muller transform from 53-bit uniforms on
//! (0, 1]. Both outputs of each pair are used, in order (cosine first).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RngError {
    #[error("time step must be positive and finite, got {0}")]
    NonPositiveStep(f64),
    #[error("count must be at least 1")]
    EmptyCount,
    #[error("coarsening factor {factor} does not divide {n_steps} steps")]
    NonDivisor { factor: usize, n_steps: usize },
}

/// What a stream is used for. Different purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Purpose {
    PathNoise,
    ExactSampling,
    Bootstrap,
    OptimizerJitter,
}

impl Purpose {
    fn tag(self) -> u8 {
        match self {
            Purpose::PathNoise => 1,
            Purpose::ExactSampling => 2,
            Purpose::Bootstrap => 3,
            Purpose::OptimizerJitter => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub path_index: u64,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(seed: u64, path_index: u64, purpose: Purpose) -> Self {
        Self { seed, path_index, purpose }
    }

    pub fn path_noise(seed: u64, path_index: u64) -> Self {
        Self::new(seed, path_index, Purpose::PathNoise)
    }

    pub fn with_purpose(self, purpose: Purpose) -> Self {
        Self { purpose, ..self }
    }

    /// The generator for this key, positioned at the start of its stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(b"splitsde/stream/v1");
        hasher.update(self.seed.to_le_bytes());
        hasher.update(self.path_index.to_le_bytes());
        hasher.update([self.purpose.tag()]);
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }

    pub fn normals(&self) -> NormalStream<ChaCha8Rng> {
        NormalStream::new(self.rng())
    }
}

/// Uniform on (0, 1], never zero so that `ln` is finite.
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box–Muller standard normals drawn from an arbitrary generator.
#[derive(Debug, Clone)]
pub struct NormalStream<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> NormalStream<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = open_unit(&mut self.rng);
        let u2 = open_unit(&mut self.rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(r * angle.sin());
        r * angle.cos()
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// `count` i.i.d. standard normal variates for `key`.
pub fn standard_normal(key: StreamKey, count: usize) -> Result<Vec<f64>, RngError> {
    if count == 0 {
        return Err(RngError::EmptyCount);
    }
    let mut stream = key.normals();
    Ok((0..count).map(|_| stream.next_standard()).collect())
}

/// A fixed field of Brownian increments with variance `h` each.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGrid {
    pub key: StreamKey,
    pub h: f64,
    pub increments: Vec<f64>,
}

impl NoiseGrid {
    pub fn n_steps(&self) -> usize {
        self.increments.len()
    }

    pub fn horizon(&self) -> f64 {
        self.h * self.increments.len() as f64
    }

    /// Left-to-right sum of all increments (the Brownian endpoint).
    pub fn total(&self) -> f64 {
        self.increments.iter().fold(0.0, |acc, &v| acc + v)
    }
}

pub fn make_noise_grid(key: StreamKey, h_fine: f64, n_steps: usize) -> Result<NoiseGrid, RngError> {
    if !(h_fine > 0.0 && h_fine.is_finite()) {
        return Err(RngError::NonPositiveStep(h_fine));
    }
    if n_steps == 0 {
        return Err(RngError::EmptyCount);
    }
    let scale = h_fine.sqrt();
    let mut stream = key.normals();
    let increments = (0..n_steps).map(|_| scale * stream.next_standard()).collect();
    Ok(NoiseGrid { key, h: h_fine, increments })
}

/// Sum consecutive blocks of `factor` increments.
pub fn coarsen(grid: &NoiseGrid, factor: usize) -> Result<NoiseGrid, RngError> {
    let n = grid.n_steps();
    if factor == 0 || n % factor != 0 {
        return Err(RngError::NonDivisor { factor, n_steps: n });
    }
    let increments = grid
        .increments
        .chunks_exact(factor)
        .map(|block| block.iter().fold(0.0, |acc, &v| acc + v))
        .collect();
    Ok(NoiseGrid { key: grid.key, h: grid.h * factor as f64, increments })
}
