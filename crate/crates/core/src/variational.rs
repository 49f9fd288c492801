//! Explicit gradient descent for the robust variational model
//! `E[u] = 1/2 sum Phi((f - Hu)^2) + alpha/2 sum Psi(|grad u|^2)`, with a
//! regularised L1 data penaliser.
//!
//! The unconstrained flow is `u' = u - tau dE/du`; the positivity-constrained
//! flow uses the multiplicative gradient, `u' = u - tau u dE/du`.

use crate::blur::{BlurOperator, SpaceInvariantBlur};
use crate::diffusion;
use crate::error::{Error, Result};
use crate::image::{Image, PointSpreadFunction};
use crate::penaliser::{RegularisedL1, SmoothnessPenaliser};
use crate::solver::{IterationTrace, TraceEntry};

/// Default explicit Euler time step.
pub const DEFAULT_TAU: f64 = 0.05;
/// Default time step of the constrained flow, whose effective step is
/// `tau * u` and therefore scales with the grey values.
pub const DEFAULT_CONSTRAINED_TAU: f64 = 0.0025;

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    pub tau: f64,
    pub iterations: usize,
    pub alpha: f64,
    pub data_penaliser: RegularisedL1,
    pub smoothness_penaliser: SmoothnessPenaliser,
    pub constrained: bool,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            iterations: 1500,
            alpha: 0.06,
            data_penaliser: RegularisedL1::default(),
            smoothness_penaliser: SmoothnessPenaliser::PeronaMalik { lambda: 15.0 },
            constrained: false,
        }
    }
}

impl DescentConfig {
    /// Defaults for the positivity-constrained flow.
    pub fn constrained() -> Self {
        Self {
            tau: DEFAULT_CONSTRAINED_TAU,
            constrained: true,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.data_penaliser.eps > 0.0 && self.data_penaliser.eps.is_finite()) {
            return Err(Error::Config("L1 eps must be positive".into()));
        }
        self.smoothness_penaliser.validate()
    }
}

struct Evaluation {
    energy: f64,
    /// `-dE/du`.
    descent: Vec<f64>,
}

fn evaluate(u: &Image, f: &Image, blur: &dyn BlurOperator, cfg: &DescentConfig) -> Evaluation {
    let (w, h, n) = (u.width(), u.height(), u.plane_len());
    let hu = blur.apply(u);
    let residual: Vec<f64> = f.data().iter().zip(hu.data()).map(|(a, b)| a - b).collect();

    // Channels share Phi'(sum_c r_c^2).
    let mut s2 = vec![0.0; n];
    for c in 0..u.channels() {
        for (acc, r) in s2.iter_mut().zip(&residual[c * n..(c + 1) * n]) {
            *acc += r * r;
        }
    }
    let mut energy: f64 = s2.iter().map(|&s| 0.5 * cfg.data_penaliser.value(s)).sum();
    let weights: Vec<f64> = s2.iter().map(|&s| cfg.data_penaliser.derivative(s)).collect();

    let mut descent = vec![0.0; u.data().len()];
    let mut weighted = vec![0.0; n];
    for c in 0..u.channels() {
        for ((o, r), wt) in weighted.iter_mut().zip(&residual[c * n..(c + 1) * n]).zip(&weights) {
            *o = wt * r;
        }
        blur.adjoint_plane(&weighted, &mut descent[c * n..(c + 1) * n], w, h);
    }

    if cfg.alpha > 0.0 {
        let g = diffusion::squared_gradient(u, true);
        energy += cfg.alpha * g[0].iter().map(|&s| 0.5 * cfg.smoothness_penaliser.value(s)).sum::<f64>();
        let diff = diffusion::diffusivities(&g, &cfg.smoothness_penaliser);
        let div = diffusion::divergence_from_diffusivity(u, &diff);
        for (d, v) in descent.iter_mut().zip(div) {
            *d += cfg.alpha * v;
        }
    }
    Evaluation { energy, descent }
}

/// Discrete energy of the variational model under mirror boundaries.
pub fn variational_energy(u: &Image, f: &Image, psf: &PointSpreadFunction, cfg: &DescentConfig) -> Result<f64> {
    u.check_same_shape(f, "variational energy")?;
    Ok(evaluate(u, f, &SpaceInvariantBlur::spatial(psf.clone()), cfg).energy)
}

/// Energy evaluated with an arbitrary blur operator.
pub fn variational_energy_with(u: &Image, f: &Image, blur: &dyn BlurOperator, cfg: &DescentConfig) -> Result<f64> {
    u.check_same_shape(f, "variational energy")?;
    Ok(evaluate(u, f, blur, cfg).energy)
}

/// The descent direction: `-dE/du`, or `-u dE/du` when constrained.
pub fn descent_direction(u: &Image, f: &Image, blur: &dyn BlurOperator, cfg: &DescentConfig) -> Result<Image> {
    u.check_same_shape(f, "descent direction")?;
    let mut dir = evaluate(u, f, blur, cfg).descent;
    if cfg.constrained {
        for (d, &v) in dir.iter_mut().zip(u.data()) {
            *d *= v;
        }
    }
    Ok(u.with_data(dir))
}

fn apply_step(u: &Image, descent: &[f64], cfg: &DescentConfig, iteration: usize) -> Result<Image> {
    let tau = cfg.tau;
    let data: Vec<f64> = if cfg.constrained {
        u.data().iter().zip(descent).map(|(&v, &d)| v + tau * v * d).collect()
    } else {
        u.data().iter().zip(descent).map(|(&v, &d)| v + tau * d).collect()
    };
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { iteration });
    }
    if cfg.constrained && data.iter().any(|&v| v <= 0.0) {
        return Err(Error::StepSize { iteration, tau });
    }
    Ok(u.with_data(data))
}

/// One explicit Euler step with mirror-boundary convolution.
pub fn descent_step(u: &Image, f: &Image, psf: &PointSpreadFunction, cfg: &DescentConfig) -> Result<Image> {
    descent_step_with(u, f, &SpaceInvariantBlur::spatial(psf.clone()), cfg)
}

pub fn descent_step_with(u: &Image, f: &Image, blur: &dyn BlurOperator, cfg: &DescentConfig) -> Result<Image> {
    cfg.validate()?;
    u.check_same_shape(f, "descent step")?;
    if cfg.constrained && !(u.min() > 0.0) {
        return Err(Error::Domain("constrained descent needs a positive iterate".into()));
    }
    let eval = evaluate(u, f, blur, cfg);
    apply_step(u, &eval.descent, cfg, 1)
}

/// Iterates from `u0 = f`; every trace entry carries the energy. Any energy
/// increase adds a warning to the trace.
pub fn run_descent(f: &Image, psf: &PointSpreadFunction, cfg: &DescentConfig) -> Result<(Image, IterationTrace)> {
    run_descent_observed(f, psf, cfg, |_, _| {})
}

pub fn run_descent_observed(
    f: &Image,
    psf: &PointSpreadFunction,
    cfg: &DescentConfig,
    mut observer: impl FnMut(usize, &Image),
) -> Result<(Image, IterationTrace)> {
    cfg.validate()?;
    if cfg.constrained && !(f.min() > 0.0) {
        return Err(Error::Domain("constrained descent needs a positive observed image".into()));
    }
    let blur = SpaceInvariantBlur::spatial(psf.clone());
    let mut trace = IterationTrace::default();
    let mut u = f.clone();
    let mut eval = evaluate(&u, f, &blur, cfg);
    trace.initial_energy = Some(eval.energy);
    let mut previous = eval.energy;
    let mut increases = 0;
    let mut first_increase = None;
    for k in 1..=cfg.iterations {
        let next = apply_step(&u, &eval.descent, cfg, k)?;
        let next_eval = evaluate(&next, f, &blur, cfg);
        let diff: f64 = next.data().iter().zip(u.data()).map(|(a, b)| (a - b).abs()).sum();
        let rel_change = diff / u.data().iter().map(|v| v.abs()).sum::<f64>();
        if next_eval.energy > previous {
            increases += 1;
            first_increase.get_or_insert(k);
        }
        previous = next_eval.energy;
        trace.entries.push(TraceEntry {
            iteration: k,
            energy: Some(next_eval.energy),
            min_value: next.min(),
            rel_change,
        });
        observer(k, &next);
        u = next;
        eval = next_eval;
    }
    if let Some(first) = first_increase {
        trace.warnings.push(format!(
            "energy increased in {increases} of {} steps, first at iteration {first}; reduce tau (currently {})",
            cfg.iterations, cfg.tau
        ));
    }
    Ok((u, trace))
}
