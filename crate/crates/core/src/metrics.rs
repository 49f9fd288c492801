//! Restoration quality and energy evaluation.

use std::fmt::Write as _;

use crate::blur::{BlurOperator, SpaceInvariantBlur};
use crate::diffusion;
use crate::error::{Error, Result};
use crate::image::{Image, PointSpreadFunction};
use crate::solver::SolverConfig;

fn variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

/// `10 log10(var(g) / var(g - u))` in dB, variances taken jointly over all
/// channels. Returns `+inf` when `g - u` is constant.
pub fn snr(u: &Image, g: &Image) -> Result<f64> {
    u.check_same_shape(g, "snr")?;
    let var_g = variance(g.data().iter().copied());
    if !(var_g > 0.0) {
        return Err(Error::Domain("SNR undefined for a constant reference image".into()));
    }
    let var_err = variance(g.data().iter().zip(u.data()).map(|(a, b)| a - b));
    if var_err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (var_g / var_err).log10())
}

/// Discrete functional `sum Phi(R) + alpha/2 sum Psi(G)` with mirror-boundary
/// blur, `R = sum_c r_{f_c}(H u_c)` and `G = sum_c s2_c`.
///
/// The regulariser carries the factor 1/2 so that the fixed-point updates are
/// stationary exactly where this energy is.
pub fn energy(u: &Image, f: &Image, psf: &PointSpreadFunction, cfg: &SolverConfig) -> Result<f64> {
    energy_with(u, f, &SpaceInvariantBlur::spatial(psf.clone()), cfg)
}

pub fn energy_with(
    u: &Image,
    f: &Image,
    blur: &dyn BlurOperator,
    cfg: &SolverConfig,
) -> Result<f64> {
    u.check_same_shape(f, "energy")?;
    let hu = blur.apply(u);
    let n = u.plane_len();
    let mut r = vec![0.0; n];
    for c in 0..u.channels() {
        for ((acc, &w), &obs) in r.iter_mut().zip(hu.plane(c)).zip(f.plane(c)) {
            *acc += crate::penaliser::rf(w, obs)?;
        }
    }
    let data: f64 = r.iter().map(|&s| cfg.data_penaliser.value(s)).sum();
    if cfg.alpha == 0.0 {
        return Ok(data);
    }
    Ok(data + cfg.alpha * diffusion::regulariser_energy(u, &cfg.smoothness_penaliser, true))
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub method: String,
    pub variant: String,
    pub alpha: f64,
    pub iterations: usize,
    pub snr_db: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub min_value: f64,
    pub wall_s: f64,
}

impl BenchRecord {
    pub const CSV_HEADER: &'static str = "method,variant,alpha,iterations,snr_db,energy_final,wall_s";

    /// Serialises as `method,variant,alpha,iterations,snr_db,energy_final,wall_s`.
    /// `with_timing = false` writes the wall time as 0 so the row is
    /// reproducible byte for byte.
    pub fn csv_row(&self, with_timing: bool) -> String {
        let wall = if with_timing { self.wall_s } else { 0.0 };
        format!(
            "{},{},{},{},{:.4},{:.6e},{:.3}",
            self.method, self.variant, self.alpha, self.iterations, self.snr_db, self.energy_final, wall
        )
    }
}

pub fn records_to_csv(records: &[BenchRecord], with_timing: bool) -> String {
    let mut out = String::new();
    out.push_str(BenchRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row(with_timing));
    }
    out
}
