//! Benchmark presets replaying the two synthetic experiment designs: a
//! moderately blurred image with 15 % impulse noise (`fig1`) and a severely
//! motion-blurred one with 30 % impulse noise (`fig2`).
//!
//! The bundled scene is a 256x256 grey photograph; the kernels are bundled
//! stand-ins (an irregular 13x13 shake path and a 31x31 curved motion path),
//! so the presets reproduce the protocol rather than specific pixel values.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use crate::degrade::{add_noise, synth_blur, NoiseSpec};
use crate::error::{Error, Result};
use crate::image::{Image, PointSpreadFunction, INTENSITY_FLOOR};
use crate::io;
use crate::metrics::{snr, BenchRecord};
use crate::penaliser::{DataPenaliser, RegularisedL1, SmoothnessPenaliser};
use crate::solver::{self, IterationTrace, SolverConfig, Variant};
use crate::variational::{self, DescentConfig, DEFAULT_CONSTRAINED_TAU, DEFAULT_TAU};

pub const SCENE_FILE: &str = "camera256.pgm";
pub const FIG1_PSF_FILE: &str = "psf_fig1.txt";
pub const FIG2_PSF_FILE: &str = "psf_fig2.txt";

const BUNDLED_SCENE: &[u8] = include_bytes!("../assets/camera256.pgm");
const BUNDLED_FIG1_PSF: &str = include_str!("../assets/psf_fig1.txt");
const BUNDLED_FIG2_PSF: &str = include_str!("../assets/psf_fig2.txt");

/// Edge-preserving regulariser used by the regularised RL variants.
pub const RL_REGULARISER: SmoothnessPenaliser = SmoothnessPenaliser::PeronaMalik { lambda: 15.0 };
/// Regulariser of the variational baselines.
pub const VARIATIONAL_REGULARISER: SmoothnessPenaliser = SmoothnessPenaliser::PeronaMalik { lambda: 15.0 };

#[derive(Debug, Clone)]
pub struct BenchAssets {
    pub scene: Image,
    pub fig1_psf: PointSpreadFunction,
    pub fig2_psf: PointSpreadFunction,
}

impl BenchAssets {
    pub fn bundled() -> Self {
        Self {
            scene: io::decode_pnm(BUNDLED_SCENE, SCENE_FILE).expect("bundled scene is valid"),
            fig1_psf: io::parse_psf_text(BUNDLED_FIG1_PSF, FIG1_PSF_FILE).expect("bundled kernel is valid"),
            fig2_psf: io::parse_psf_text(BUNDLED_FIG2_PSF, FIG2_PSF_FILE).expect("bundled kernel is valid"),
        }
    }

    /// Loads `camera256.pgm`, `psf_fig1.txt` and `psf_fig2.txt` from `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            scene: io::load_image(dir.join(SCENE_FILE))?,
            fig1_psf: io::load_psf(dir.join(FIG1_PSF_FILE))?,
            fig2_psf: io::load_psf(dir.join(FIG2_PSF_FILE))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Fig1,
    Fig2,
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(PresetName::Fig1),
            "fig2" => Ok(PresetName::Fig2),
            other => Err(Error::Config(format!("unknown preset {other:?} (expected fig1 or fig2)"))),
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetName::Fig1 => "fig1",
            PresetName::Fig2 => "fig2",
        })
    }
}

/// One restoration method with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    RichardsonLucy { variant: Variant, config: SolverConfig },
    Variational { config: DescentConfig },
}

impl MethodSpec {
    pub fn rl(variant: Variant, iterations: usize, alpha: f64) -> Self {
        MethodSpec::RichardsonLucy {
            variant,
            config: SolverConfig {
                iterations,
                alpha,
                data_penaliser: DataPenaliser::default(),
                smoothness_penaliser: RL_REGULARISER,
                stop_rel_change: None,
                record_energy_every: Some(iterations),
            }
            .effective_for(variant),
        }
    }

    pub fn variational(constrained: bool, alpha: f64, iterations: usize) -> Self {
        MethodSpec::Variational {
            config: DescentConfig {
                tau: if constrained { DEFAULT_CONSTRAINED_TAU } else { DEFAULT_TAU },
                iterations,
                alpha,
                data_penaliser: RegularisedL1::default(),
                smoothness_penaliser: VARIATIONAL_REGULARISER,
                constrained,
            },
        }
    }

    pub fn method_id(&self) -> &'static str {
        match self {
            MethodSpec::RichardsonLucy { variant, .. } => match variant {
                Variant::Rl => "RL",
                Variant::Regularised => "regRL",
                Variant::Robust => "robustRL",
                Variant::Rrrl => "RRRL",
            },
            MethodSpec::Variational { .. } => "variational",
        }
    }

    pub fn variant_label(&self) -> &'static str {
        match self {
            MethodSpec::RichardsonLucy { variant, .. } => variant.name(),
            MethodSpec::Variational { config } if config.constrained => "constrained",
            MethodSpec::Variational { .. } => "unconstrained",
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            MethodSpec::RichardsonLucy { config, .. } => config.alpha,
            MethodSpec::Variational { config } => config.alpha,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            MethodSpec::RichardsonLucy { config, .. } => config.iterations,
            MethodSpec::Variational { config } => config.iterations,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: PresetName,
    pub psf: PointSpreadFunction,
    pub noise_fraction: f64,
    pub methods: Vec<MethodSpec>,
}

impl Preset {
    pub fn new(name: PresetName, assets: &BenchAssets) -> Self {
        match name {
            PresetName::Fig1 => Preset {
                name,
                psf: assets.fig1_psf.clone(),
                noise_fraction: 0.15,
                methods: vec![
                    MethodSpec::rl(Variant::Rl, 10, 0.0),
                    MethodSpec::rl(Variant::Regularised, 100, 0.1),
                    MethodSpec::rl(Variant::Robust, 50, 0.0),
                    MethodSpec::rl(Variant::Rrrl, 200, 0.005),
                    MethodSpec::rl(Variant::Rrrl, 2000, 0.005),
                    MethodSpec::variational(false, 0.06, 1500),
                    MethodSpec::variational(true, 0.06, 1500),
                ],
            },
            PresetName::Fig2 => Preset {
                name,
                psf: assets.fig2_psf.clone(),
                noise_fraction: 0.30,
                methods: vec![
                    MethodSpec::rl(Variant::Rl, 10, 0.0),
                    MethodSpec::rl(Variant::Regularised, 100, 0.05),
                    MethodSpec::rl(Variant::Robust, 100, 0.0),
                    MethodSpec::rl(Variant::Rrrl, 400, 0.003),
                    MethodSpec::variational(false, 0.06, 1500),
                    MethodSpec::variational(true, 0.09, 1500),
                ],
            },
        }
    }

    /// Periodic blur plus impulse noise, then the intensity floor.
    pub fn degrade(&self, scene: &Image, seed: u64) -> Result<Degradation> {
        let blurred = synth_blur(scene, &self.psf);
        let noisy = add_noise(&blurred, &NoiseSpec::impulse(self.noise_fraction, seed))?;
        let (observed, _) = noisy.lift_floor(INTENSITY_FLOOR);
        Ok(Degradation {
            truth: scene.clone(),
            observed,
            psf: self.psf.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Degradation {
    pub truth: Image,
    pub observed: Image,
    pub psf: PointSpreadFunction,
}

/// Result of one method run: the restored image, its trace and the record.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub restored: Image,
    pub trace: IterationTrace,
    pub record: BenchRecord,
}

pub fn run_method(d: &Degradation, method: &MethodSpec) -> Result<MethodRun> {
    let start = Instant::now();
    let (restored, trace, energy_initial) = match method {
        MethodSpec::RichardsonLucy { variant, config } => {
            let (u, trace) = solver::run(&d.observed, &d.psf, config, *variant)?;
            let e0 = trace.initial_energy.unwrap_or(f64::NAN);
            (u, trace, e0)
        }
        MethodSpec::Variational { config } => {
            let (u, trace) = variational::run_descent(&d.observed, &d.psf, config)?;
            let e0 = trace.initial_energy.unwrap_or(f64::NAN);
            (u, trace, e0)
        }
    };
    let wall_s = start.elapsed().as_secs_f64();
    let record = BenchRecord {
        method: method.method_id().to_string(),
        variant: method.variant_label().to_string(),
        alpha: method.alpha(),
        iterations: method.iterations(),
        snr_db: snr(&restored, &d.truth)?,
        energy_initial,
        energy_final: trace.final_energy().unwrap_or(f64::NAN),
        min_value: trace.min_value(),
        wall_s,
    };
    Ok(MethodRun {
        restored,
        trace,
        record,
    })
}

/// Degrades the bundled scene per preset and runs every method in order.
pub fn bench_preset(name: PresetName, seed: u64, assets: &BenchAssets) -> Result<Vec<BenchRecord>> {
    let preset = Preset::new(name, assets);
    let d = preset.degrade(&assets.scene, seed)?;
    preset
        .methods
        .iter()
        .map(|m| run_method(&d, m).map(|r| r.record))
        .collect()
}
