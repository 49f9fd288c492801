//! Multiplicative fixed-point solvers of the Richardson-Lucy family.
//!
//! All four variants share one update,
//!
//! ```text
//!          H*(w * f / Hu) + alpha [D]+
//! u' = u * ----------------------------
//!            H*(w)       - alpha [D]-
//! ```
//!
//! with `w = Phi'(r_f(Hu))`, `D = div(Psi'(|grad u|^2) grad u)` evaluated at
//! the current iterate and `[z]+- = (z +- |z|) / 2`. Plain RL drops the
//! regulariser and uses `w = 1`; regularised RL keeps `w = 1` and replaces
//! `H* 1` by the constant 1. Routing the positive part of `D` to the
//! numerator and the negative part to the denominator keeps every iterate
//! positive.

use std::fmt;
use std::str::FromStr;

use crate::blur::{BlurOperator, SpaceInvariantBlur};
use crate::diffusion;
use crate::error::{Error, Result};
use crate::image::{Image, PointSpreadFunction};
use crate::metrics;
use crate::penaliser::{rf_unchecked, DataPenaliser, SmoothnessPenaliser};
use crate::scratch;

/// Floor for the blurred estimate in the quotient `f / Hu` (grey-values).
pub const DIVISION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Rl,
    Regularised,
    Robust,
    Rrrl,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Rl, Variant::Regularised, Variant::Robust, Variant::Rrrl];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Rl => "rl",
            Variant::Regularised => "regularised",
            Variant::Robust => "robust",
            Variant::Rrrl => "rrrl",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rl" => Ok(Variant::Rl),
            "regularised" | "regularized" | "regrl" => Ok(Variant::Regularised),
            "robust" | "robustrl" => Ok(Variant::Robust),
            "rrrl" => Ok(Variant::Rrrl),
            other => Err(Error::Config(format!("unknown RL variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub iterations: usize,
    pub alpha: f64,
    pub data_penaliser: DataPenaliser,
    pub smoothness_penaliser: SmoothnessPenaliser,
    /// Stop once `|u' - u|_1 / |u|_1` falls below this value.
    pub stop_rel_change: Option<f64>,
    /// Evaluate the energy every this many iterations (and at the last one).
    pub record_energy_every: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            alpha: 0.0,
            data_penaliser: DataPenaliser::default(),
            smoothness_penaliser: SmoothnessPenaliser::default(),
            stop_rel_change: None,
            record_energy_every: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if let Some(t) = self.stop_rel_change {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("stop_rel_change must lie in (0, 1), got {t}")));
            }
        }
        if self.record_energy_every == Some(0) {
            return Err(Error::Config("record_energy_every must be at least 1".into()));
        }
        self.data_penaliser.validate()?;
        self.smoothness_penaliser.validate()
    }

    /// The penaliser and weight a variant actually uses: plain and
    /// regularised RL use the identity data penaliser; plain and robust RL
    /// carry no regulariser.
    pub fn effective_for(&self, variant: Variant) -> SolverConfig {
        let mut cfg = self.clone();
        if matches!(variant, Variant::Rl | Variant::Regularised) {
            cfg.data_penaliser = DataPenaliser::Identity;
        }
        if matches!(variant, Variant::Rl | Variant::Robust) {
            cfg.alpha = 0.0;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: Option<f64>,
    pub min_value: f64,
    pub rel_change: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub entries: Vec<TraceEntry>,
    /// Energy of the initial image, when energy recording is enabled.
    pub initial_energy: Option<f64>,
    /// Number of quotient evaluations that hit [`DIVISION_FLOOR`].
    pub floored_pixels: usize,
    pub stopped_early: bool,
    pub warnings: Vec<String>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.entries.iter().rev().find_map(|e| e.energy)
    }

    pub fn min_value(&self) -> f64 {
        self.entries.iter().map(|e| e.min_value).fold(f64::INFINITY, f64::min)
    }
}

struct StepOutput {
    image: Image,
    floored: usize,
}

/// Shared update. `coupled` selects the multi-channel rule (shared
/// `Phi'(R)` and `Psi'(G)`); otherwise every channel is treated as a
/// separate scalar image.
fn update(
    u: &Image,
    f: &Image,
    blur: &dyn BlurOperator,
    variant: Variant,
    cfg: &SolverConfig,
    coupled: bool,
) -> Result<StepOutput> {
    u.check_same_shape(f, "iterate and observed image")?;
    let cfg = cfg.effective_for(variant);
    let (w, h, channels) = (u.width(), u.height(), u.channels());
    let n = u.plane_len();

    // `hu` becomes the floored `Hu`, then `w f / Hu` in place.
    let mut hu = blur.apply(u).into_data();
    let mut floored = 0;
    for b in hu.iter_mut() {
        if !(*b >= DIVISION_FLOOR) {
            floored += 1;
            *b = DIVISION_FLOOR;
        }
    }

    let robust = !cfg.data_penaliser.is_identity();
    let regularised = cfg.alpha > 0.0 && variant != Variant::Rl;
    let groups = if coupled || channels == 1 { 1 } else { channels };
    let group_of = |c: usize| if groups == 1 { 0 } else { c };

    // Data weights Phi'(R), one plane per group, and `hu <- w f / Hu`.
    let mut weights = robust.then(|| scratch::zeroed(groups * n));
    if let Some(weights) = &mut weights {
        let phi = cfg.data_penaliser;
        if groups == channels {
            for ((b, &obs), wt) in hu.iter_mut().zip(f.data()).zip(weights.iter_mut()) {
                let q = obs / *b;
                *wt = phi.derivative((*b - obs + obs * q.ln()).max(0.0));
                *b = *wt * q;
            }
        } else {
            for c in 0..channels {
                for ((r, &b), &obs) in weights.iter_mut().zip(&hu[c * n..(c + 1) * n]).zip(f.plane(c)) {
                    *r += rf_unchecked(b, obs);
                }
            }
            weights.iter_mut().for_each(|v| *v = phi.derivative(*v));
            for c in 0..channels {
                for ((b, &obs), &wt) in hu[c * n..(c + 1) * n].iter_mut().zip(f.plane(c)).zip(weights.iter()) {
                    *b = wt * obs / *b;
                }
            }
        }
    } else {
        hu.iter_mut().zip(f.data()).for_each(|(b, &obs)| *b = obs / *b);
    }

    // H*(w f / Hu) per channel and H* w per group, paired where possible.
    let mut numerator = scratch::zeroed(u.data().len());
    let mut weight_adjoint = weights.as_ref().map(|_| scratch::zeroed(groups * n));
    for c in 0..channels {
        let ratio = &hu[c * n..(c + 1) * n];
        let num = &mut numerator[c * n..(c + 1) * n];
        match (&weights, &mut weight_adjoint) {
            (Some(wt), Some(adj)) if group_of(c) == c => {
                let span = c * n..(c + 1) * n;
                blur.adjoint_plane_pair([ratio, &wt[span.clone()]], [num, &mut adj[span]], w, h);
            }
            _ => blur.adjoint_plane(ratio, num, w, h),
        }
    }

    let div = if regularised {
        let s2 = diffusion::squared_gradient(u, groups == 1 && channels > 1);
        let diff = diffusion::diffusivities(&s2, &cfg.smoothness_penaliser);
        let div = diffusion::divergence_from_diffusivity(u, &diff);
        s2.into_iter().chain(diff).for_each(scratch::recycle);
        Some(div)
    } else {
        None
    };

    scratch::recycle(hu);
    weights.into_iter().for_each(scratch::recycle);
    // The numerator buffer is overwritten with the next iterate.
    let mut out = numerator;
    for c in 0..channels {
        let (g, span) = (group_of(c), c * n..(c + 1) * n);
        let base = weight_adjoint.as_ref().map(|adj| &adj[g * n..(g + 1) * n]);
        let d = div.as_ref().map(|d| &d[span.clone()]);
        let (out, uc) = (&mut out[span], &u.data()[c * n..(c + 1) * n]);
        if variant == Variant::Rl && base.is_none() {
            out.iter_mut().zip(uc).for_each(|(o, &x)| *o *= x);
        } else if let Some(i) = combine(out, uc, base, d, cfg.alpha) {
            let value = base.map_or(1.0, |b| b[i]) - d.map_or(0.0, |d| (cfg.alpha * d[i]).min(0.0));
            return Err(Error::Stability {
                x: i % w,
                y: i / w,
                channel: c,
                value,
                alpha: cfg.alpha,
            });
        }
    }
    weight_adjoint.into_iter().chain(div).for_each(scratch::recycle);
    Ok(StepOutput {
        image: u.with_data(out),
        floored,
    })
}

/// `out <- (out + alpha [d]+) / (base - alpha [d]-) * u`, with `base = 1` when
/// absent. Returns the first pixel whose denominator is not positive and finite.
fn combine(out: &mut [f64], u: &[f64], base: Option<&[f64]>, d: Option<&[f64]>, alpha: f64) -> Option<usize> {
    let split = |d: f64| {
        let ad = alpha * d;
        if ad > 0.0 {
            (ad, 0.0)
        } else {
            (0.0, ad)
        }
    };
    let mut stable = true;
    match (base, d) {
        (Some(base), Some(d)) => {
            for (((o, &x), &b), &d) in out.iter_mut().zip(u).zip(base).zip(d) {
                let (pos, neg) = split(d);
                let den = b - neg;
                stable &= den > 0.0 && den.is_finite();
                *o = (*o + pos) / den * x;
            }
        }
        (Some(base), None) => {
            for ((o, &x), &b) in out.iter_mut().zip(u).zip(base) {
                stable &= b > 0.0 && b.is_finite();
                *o = *o / b * x;
            }
        }
        (None, Some(d)) => {
            for ((o, &x), &d) in out.iter_mut().zip(u).zip(d) {
                let (pos, neg) = split(d);
                let den = 1.0 - neg;
                stable &= den > 0.0 && den.is_finite();
                *o = (*o + pos) / den * x;
            }
        }
        (None, None) => out.iter_mut().zip(u).for_each(|(o, &x)| *o *= x),
    }
    if stable {
        return None;
    }
    (0..out.len()).find(|&i| {
        let den = base.map_or(1.0, |b| b[i]) - d.map_or(0.0, |d| split(d[i]).1);
        !(den > 0.0 && den.is_finite())
    })
}

fn guarded(step: StepOutput) -> Result<Image> {
    if step.floored > 0 {
        Err(Error::DivisionGuard {
            count: step.floored,
        })
    } else {
        Ok(step.image)
    }
}

/// One Richardson-Lucy step `u' = H*(f / Hu) * u`.
pub fn rl_step(u: &Image, f: &Image, blur: &dyn BlurOperator) -> Result<Image> {
    guarded(update(u, f, blur, Variant::Rl, &SolverConfig::default(), false)?)
}

/// One regularised RL step (identity data penaliser, sign-split regulariser).
/// Multi-channel inputs share the coupled diffusivity `Psi'(G)`.
pub fn regularised_rl_step(
    u: &Image,
    f: &Image,
    blur: &dyn BlurOperator,
    cfg: &SolverConfig,
) -> Result<Image> {
    guarded(update(u, f, blur, Variant::Regularised, cfg, true)?)
}

/// One robust RL step (no regulariser), applied channel by channel.
pub fn robust_rl_step(u: &Image, f: &Image, blur: &dyn BlurOperator, cfg: &SolverConfig) -> Result<Image> {
    guarded(update(u, f, blur, Variant::Robust, cfg, false)?)
}

/// One robust and regularised RL step, applied channel by channel.
pub fn rrrl_step(u: &Image, f: &Image, blur: &dyn BlurOperator, cfg: &SolverConfig) -> Result<Image> {
    guarded(update(u, f, blur, Variant::Rrrl, cfg, false)?)
}

/// One multi-channel RRRL step with shared `Phi'(R)`, `R = sum_i r_{f_i}(H u_i)`,
/// and shared `Psi'(G)`, `G = sum_i |grad u_i|^2`.
pub fn rrrl_step_multichannel(
    u: &Image,
    f: &Image,
    blur: &dyn BlurOperator,
    cfg: &SolverConfig,
) -> Result<Image> {
    guarded(update(u, f, blur, Variant::Rrrl, cfg, true)?)
}

/// Runs a variant from `u0 = f` with mirror-boundary convolution.
pub fn run(
    f: &Image,
    psf: &PointSpreadFunction,
    cfg: &SolverConfig,
    variant: Variant,
) -> Result<(Image, IterationTrace)> {
    run_observed(f, psf, cfg, variant, |_, _| {})
}

/// [`run`] with a callback receiving `(k, u^k)` after every step.
pub fn run_observed(
    f: &Image,
    psf: &PointSpreadFunction,
    cfg: &SolverConfig,
    variant: Variant,
    mut observer: impl FnMut(usize, &Image),
) -> Result<(Image, IterationTrace)> {
    cfg.validate()?;
    if !(f.min() > 0.0) {
        return Err(Error::Domain(format!(
            "observed image must be strictly positive (min {}); lift zeros first",
            f.min()
        )));
    }
    let blur = SpaceInvariantBlur::spatial(psf.clone());
    let energy_cfg = cfg.effective_for(variant);
    let energy_of = |u: &Image| metrics::energy_with(u, f, &blur, &energy_cfg);

    let mut trace = IterationTrace {
        initial_energy: cfg.record_energy_every.map(|_| energy_of(f)).transpose()?,
        ..Default::default()
    };
    let mut u = f.clone();
    for k in 1..=cfg.iterations {
        let step = update(&u, f, &blur, variant, cfg, true)?;
        trace.floored_pixels += step.floored;
        let next = step.image;
        if next.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: k });
        }
        let min_value = next.min();
        if !(min_value > 0.0) {
            return Err(Error::Divergence { iteration: k });
        }
        let diff: f64 = next.data().iter().zip(u.data()).map(|(a, b)| (a - b).abs()).sum();
        let rel_change = diff / u.data().iter().map(|v| v.abs()).sum::<f64>();
        let last = k == cfg.iterations
            || cfg.stop_rel_change.is_some_and(|t| rel_change < t);
        let energy = match cfg.record_energy_every {
            Some(every) if k % every == 0 || last => Some(energy_of(&next)?),
            _ => None,
        };
        trace.entries.push(TraceEntry {
            iteration: k,
            energy,
            min_value,
            rel_change,
        });
        observer(k, &next);
        scratch::recycle(std::mem::replace(&mut u, next).into_data());
        if last {
            trace.stopped_early = k < cfg.iterations;
            break;
        }
    }
    if trace.floored_pixels > 0 {
        trace.warnings.push(format!(
            "division guard floored {} quotient evaluations",
            trace.floored_pixels
        ));
    }
    Ok((u, trace))
}
