//! Synthetic degradation: periodic blur followed by noise.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` (a counter-based
//! stream cipher generator with a portable, documented output stream), so a
//! seed fixes the noise bit for bit on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::blur::{BlurOperator, SpaceInvariantBlur};
use crate::error::{Error, Result};
use crate::image::{Image, PointSpreadFunction, INTENSITY_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Each pixel is replaced, with probability `fraction`, by values drawn
    /// uniformly from `[0, 255]` (one draw per channel).
    ImpulseUniform { fraction: f64 },
    /// Additive `N(0, sigma^2)`, then clamped to `[INTENSITY_FLOOR, 255]`.
    Gaussian { sigma: f64 },
    /// Each value replaced by a Poisson draw with that mean, floored at
    /// `INTENSITY_FLOOR`.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn impulse(fraction: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::ImpulseUniform { fraction },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::ImpulseUniform { fraction } if !(0.0..=1.0).contains(&fraction) => {
                Err(Error::Config(format!("noise fraction must lie in [0, 1], got {fraction}")))
            }
            NoiseKind::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")))
            }
            _ => Ok(()),
        }
    }
}

/// Blurs every channel with periodic boundaries. Restoration code never goes
/// through this path, so synthesis and restoration discretise differently.
pub fn synth_blur(g: &Image, psf: &PointSpreadFunction) -> Image {
    SpaceInvariantBlur::periodic(psf.clone()).apply(g)
}

pub fn add_noise(img: &Image, spec: &NoiseSpec) -> Result<Image> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = img.clone();
    match spec.kind {
        NoiseKind::ImpulseUniform { fraction } => {
            if fraction == 0.0 {
                return Ok(out);
            }
            for y in 0..img.height() {
                for x in 0..img.width() {
                    if rng.random::<f64>() < fraction {
                        for c in 0..img.channels() {
                            out.set(x, y, c, 255.0 * rng.random::<f64>());
                        }
                    }
                }
            }
        }
        NoiseKind::Gaussian { sigma } => {
            if sigma == 0.0 {
                return Ok(out.map(|v| v.clamp(INTENSITY_FLOOR, 255.0)));
            }
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
            let noisy = img
                .data()
                .iter()
                .map(|&v| (v + normal.sample(&mut rng)).clamp(INTENSITY_FLOOR, 255.0))
                .collect();
            out = img.with_data(noisy);
        }
        NoiseKind::Poisson => {
            let mut noisy = Vec::with_capacity(img.data().len());
            for &v in img.data() {
                let draw = if v > 0.0 {
                    Poisson::new(v)
                        .map_err(|e| Error::Domain(format!("Poisson mean {v}: {e}")))?
                        .sample(&mut rng)
                } else {
                    0.0
                };
                noisy.push(draw.max(INTENSITY_FLOOR));
            }
            out = img.with_data(noisy);
        }
    }
    Ok(out)
}
