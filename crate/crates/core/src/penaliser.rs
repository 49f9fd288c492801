//! Penaliser functions for data and smoothness terms.
//!
//! Derivatives are taken with respect to the penaliser's own argument: for a
//! smoothness penaliser that argument is the squared gradient magnitude `s2`,
//! so `psi_prime` is the diffusivity.

use crate::error::{Error, Result};

/// Default regularisation constant of the robust data penaliser (grey-value²).
pub const DEFAULT_ROBUST_EPS: f64 = 1e-2;
/// Default regularisation constant of the total variation derivative (grey-values).
pub const DEFAULT_TV_EPS: f64 = 1e-3;
/// Default regularisation constant of the L1 residual penaliser (grey-values).
pub const DEFAULT_L1_EPS: f64 = 1e-1;

/// Csiszár's asymmetric divergence `r_f(w) = w - f - f ln(w / f)`.
///
/// Nonnegative and strictly convex in `w`, zero only at `w = f`.
pub fn rf(w: f64, f: f64) -> Result<f64> {
    if !(w > 0.0 && f > 0.0) || !w.is_finite() || !f.is_finite() {
        return Err(Error::Domain(format!(
            "r_f requires positive finite arguments, got w = {w}, f = {f}"
        )));
    }
    Ok(rf_unchecked(w, f))
}

/// [`rf`] without the domain check, clamped at zero against rounding.
#[inline]
pub fn rf_unchecked(w: f64, f: f64) -> f64 {
    (w - f - f * (w / f).ln()).max(0.0)
}

/// Penaliser `Phi` applied to the divergence in the data term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataPenaliser {
    /// `Phi(s) = s`; recovers the plain Richardson-Lucy data term.
    Identity,
    /// `Phi(s) = sqrt(s + eps) - sqrt(eps)`, sub-linear growth.
    RobustSqrt { eps: f64 },
}

impl Default for DataPenaliser {
    fn default() -> Self {
        DataPenaliser::RobustSqrt {
            eps: DEFAULT_ROBUST_EPS,
        }
    }
}

impl DataPenaliser {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DataPenaliser::Identity => Ok(()),
            DataPenaliser::RobustSqrt { eps } if eps > 0.0 && eps.is_finite() => Ok(()),
            DataPenaliser::RobustSqrt { eps } => Err(Error::Config(format!(
                "robust penaliser eps must be positive, got {eps}"
            ))),
        }
    }

    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            DataPenaliser::Identity => s,
            DataPenaliser::RobustSqrt { eps } => (s + eps).sqrt() - eps.sqrt(),
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            DataPenaliser::Identity => 1.0,
            DataPenaliser::RobustSqrt { eps } => 0.5 / (s + eps).sqrt(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, DataPenaliser::Identity)
    }
}

pub fn phi_prime(s: f64, p: &DataPenaliser) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("Phi' requires s >= 0, got {s}")));
    }
    Ok(p.derivative(s))
}

/// Penaliser `Psi` of the squared gradient magnitude in the regulariser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothnessPenaliser {
    /// `Psi(s2) = s2`.
    WhittakerTikhonov,
    /// `Psi(s2) = sqrt(s2 + eps^2)`.
    TotalVariation { eps: f64 },
    /// `Psi(s2) = lambda^2 ln(1 + s2 / lambda^2)`, rational diffusivity.
    PeronaMalik { lambda: f64 },
}

impl Default for SmoothnessPenaliser {
    fn default() -> Self {
        SmoothnessPenaliser::TotalVariation {
            eps: DEFAULT_TV_EPS,
        }
    }
}

impl SmoothnessPenaliser {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SmoothnessPenaliser::WhittakerTikhonov => true,
            SmoothnessPenaliser::TotalVariation { eps } => eps > 0.0 && eps.is_finite(),
            SmoothnessPenaliser::PeronaMalik { lambda } => lambda > 0.0 && lambda.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid smoothness penaliser {self:?}")))
        }
    }

    #[inline]
    pub fn value(&self, s2: f64) -> f64 {
        match *self {
            SmoothnessPenaliser::WhittakerTikhonov => s2,
            SmoothnessPenaliser::TotalVariation { eps } => (s2 + eps * eps).sqrt(),
            SmoothnessPenaliser::PeronaMalik { lambda } => {
                let l2 = lambda * lambda;
                l2 * (s2 / l2).ln_1p()
            }
        }
    }

    /// Diffusivity `Psi'(s2)`.
    #[inline]
    pub fn derivative(&self, s2: f64) -> f64 {
        match *self {
            SmoothnessPenaliser::WhittakerTikhonov => 1.0,
            SmoothnessPenaliser::TotalVariation { eps } => 0.5 / (s2 + eps * eps).sqrt(),
            SmoothnessPenaliser::PeronaMalik { lambda } => 1.0 / (1.0 + s2 / (lambda * lambda)),
        }
    }
}

pub fn psi_prime(s2: f64, p: &SmoothnessPenaliser) -> Result<f64> {
    if !(s2 >= 0.0) {
        return Err(Error::Domain(format!("Psi' requires s2 >= 0, got {s2}")));
    }
    Ok(p.derivative(s2))
}

/// Regularised L1 penaliser of the squared residual, `Phi(s2) = sqrt(s2 + eps^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularisedL1 {
    pub eps: f64,
}

impl Default for RegularisedL1 {
    fn default() -> Self {
        Self {
            eps: DEFAULT_L1_EPS,
        }
    }
}

impl RegularisedL1 {
    #[inline]
    pub fn value(&self, s2: f64) -> f64 {
        (s2 + self.eps * self.eps).sqrt()
    }

    #[inline]
    pub fn derivative(&self, s2: f64) -> f64 {
        0.5 / (s2 + self.eps * self.eps).sqrt()
    }
}
