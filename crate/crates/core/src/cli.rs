//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O or file
//! format error, 3 numerical failure (divergence, instability, step size).
//! Errors are reported on stderr as a single `error[<kind>]: <message>` line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{bench_preset, BenchAssets, PresetName};
use crate::blur::{BlurOperator, BoundaryMode, SpaceInvariantBlur};
use crate::degrade::{add_noise, NoiseKind, NoiseSpec};
use crate::error::{Error, Result};
use crate::image::INTENSITY_FLOOR;
use crate::io;
use crate::metrics::{records_to_csv, snr};
use crate::penaliser::{
    DataPenaliser, RegularisedL1, SmoothnessPenaliser, DEFAULT_L1_EPS, DEFAULT_ROBUST_EPS, DEFAULT_TV_EPS,
};
use crate::solver::{self, IterationTrace, SolverConfig, Variant};
use crate::variational::{self, DescentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rldeconv", version, about = "Richardson-Lucy family deconvolution toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Blur an image with a kernel.
    Blur(BlurArgs),
    /// Add seeded synthetic noise to an image.
    Noise(NoiseArgs),
    /// Restore a blurred image.
    Deconv(Box<DeconvArgs>),
    /// Run a benchmark preset and write CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Cyclic,
    Reflect,
}

#[derive(Debug, Args)]
struct BlurArgs {
    #[arg(long)]
    psf: PathBuf,
    #[arg(long, value_enum, default_value = "cyclic")]
    boundary: BoundaryArg,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseArg {
    Impulse,
    Gaussian,
    Poisson,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[arg(long, value_enum, default_value = "impulse")]
    kind: NoiseArg,
    /// Fraction of pixels replaced (impulse noise).
    #[arg(long, default_value_t = 0.15, allow_negative_numbers = true)]
    fraction: f64,
    /// Standard deviation in grey values (Gaussian noise).
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Debug, Args)]
struct DeconvArgs {
    /// rl, regularised, robust, rrrl, variational or variational-constrained.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// identity or robust.
    #[arg(long)]
    data_penaliser: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    robust_eps: Option<f64>,
    /// wt (Whittaker-Tikhonov), tv (total variation) or pm (Perona-Malik).
    #[arg(long)]
    smoothness: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    tv_eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    l1_eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    stop_rel_change: Option<f64>,
    /// Flat `key = value` file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
    #[arg(long, required_unless_present = "dump_config")]
    psf: Option<PathBuf>,
    /// Sharp reference image; prints the SNR of the result.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[arg(required_unless_present = "dump_config")]
    input: Option<PathBuf>,
    #[arg(required_unless_present = "dump_config")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value = "fig1")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory with camera256.pgm, psf_fig1.txt and psf_fig2.txt; the
    /// bundled copies are used otherwise.
    #[arg(long)]
    assets: Option<PathBuf>,
    /// Write 0 for wall time so that the CSV is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rl(Variant),
    Variational { constrained: bool },
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variational" => Ok(Method::Variational { constrained: false }),
            "variational-constrained" => Ok(Method::Variational { constrained: true }),
            other => other.parse().map(Method::Rl).map_err(|_| {
                Error::Config(format!(
                    "unknown method {other:?} (expected rl, regularised, robust, rrrl, variational or variational-constrained)"
                ))
            }),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Rl(v) => write!(f, "{v}"),
            Method::Variational { constrained: false } => f.write_str("variational"),
            Method::Variational { constrained: true } => f.write_str("variational-constrained"),
        }
    }
}

const CONFIG_KEYS: [&str; 11] = [
    "method",
    "iterations",
    "alpha",
    "data_penaliser",
    "robust_eps",
    "smoothness",
    "tv_eps",
    "lambda",
    "l1_eps",
    "tau",
    "stop_rel_change",
];

/// Fully resolved `deconv` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconvSettings {
    pub method: Method,
    pub iterations: usize,
    pub alpha: f64,
    pub data_penaliser: String,
    pub robust_eps: f64,
    pub smoothness: String,
    pub tv_eps: f64,
    pub lambda: f64,
    pub l1_eps: f64,
    pub tau: f64,
    pub stop_rel_change: Option<f64>,
}

impl DeconvSettings {
    /// Module defaults for `method`.
    pub fn defaults(method: Method) -> Self {
        let solver = SolverConfig::default();
        let descent = match method {
            Method::Variational { constrained: true } => DescentConfig::constrained(),
            _ => DescentConfig::default(),
        };
        let (iterations, alpha, smoothness) = match method {
            Method::Rl(_) => (solver.iterations, solver.alpha, solver.smoothness_penaliser),
            Method::Variational { .. } => (descent.iterations, descent.alpha, descent.smoothness_penaliser),
        };
        let (smoothness_name, tv_eps, lambda) = match smoothness {
            SmoothnessPenaliser::WhittakerTikhonov => ("wt", DEFAULT_TV_EPS, 15.0),
            SmoothnessPenaliser::TotalVariation { eps } => ("tv", eps, 15.0),
            SmoothnessPenaliser::PeronaMalik { lambda } => ("pm", DEFAULT_TV_EPS, lambda),
        };
        Self {
            method,
            iterations,
            alpha,
            data_penaliser: "robust".into(),
            robust_eps: DEFAULT_ROBUST_EPS,
            smoothness: smoothness_name.into(),
            tv_eps,
            lambda,
            l1_eps: DEFAULT_L1_EPS,
            tau: descent.tau,
            stop_rel_change: solver.stop_rel_change,
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
        }
        match key {
            "method" => self.method = value.parse()?,
            "iterations" => self.iterations = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "data_penaliser" => self.data_penaliser = value.to_string(),
            "robust_eps" => self.robust_eps = num(key, value)?,
            "smoothness" => self.smoothness = value.to_string(),
            "tv_eps" => self.tv_eps = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "l1_eps" => self.l1_eps = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "stop_rel_change" => {
                self.stop_rel_change = match value {
                    "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn data(&self) -> Result<DataPenaliser> {
        let p = match self.data_penaliser.as_str() {
            "identity" => DataPenaliser::Identity,
            "robust" => DataPenaliser::RobustSqrt { eps: self.robust_eps },
            other => return Err(Error::Config(format!("unknown data penaliser {other:?}"))),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn smoothness_penaliser(&self) -> Result<SmoothnessPenaliser> {
        let p = match self.smoothness.as_str() {
            "wt" => SmoothnessPenaliser::WhittakerTikhonov,
            "tv" => SmoothnessPenaliser::TotalVariation { eps: self.tv_eps },
            "pm" => SmoothnessPenaliser::PeronaMalik { lambda: self.lambda },
            other => return Err(Error::Config(format!("unknown smoothness penaliser {other:?}"))),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            iterations: self.iterations,
            alpha: self.alpha,
            data_penaliser: self.data()?,
            smoothness_penaliser: self.smoothness_penaliser()?,
            stop_rel_change: self.stop_rel_change,
            record_energy_every: Some(self.iterations),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn descent_config(&self) -> Result<DescentConfig> {
        if self.stop_rel_change.is_some() {
            return Err(Error::Config("stop_rel_change applies to the RL family only".into()));
        }
        let cfg = DescentConfig {
            tau: self.tau,
            iterations: self.iterations,
            alpha: self.alpha,
            data_penaliser: RegularisedL1 { eps: self.l1_eps },
            smoothness_penaliser: self.smoothness_penaliser()?,
            constrained: matches!(self.method, Method::Variational { constrained: true }),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Rl(_) => self.solver_config().map(|_| ()),
            Method::Variational { .. } => self.descent_config().map(|_| ()),
        }
    }

    /// `key = value` lines accepted back by [`parse_config_text`].
    pub fn to_config_text(&self) -> String {
        let stop = self.stop_rel_change.map_or("none".to_string(), |v| v.to_string());
        let values = [
            self.method.to_string(),
            self.iterations.to_string(),
            self.alpha.to_string(),
            self.data_penaliser.clone(),
            self.robust_eps.to_string(),
            self.smoothness.clone(),
            self.tv_eps.to_string(),
            self.lambda.to_string(),
            self.l1_eps.to_string(),
            self.tau.to_string(),
            stop,
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are skipped;
/// unknown and repeated keys are rejected.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown configuration key {key:?}", n + 1)));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: repeated key {key:?}", n + 1)));
        }
    }
    Ok(map)
}

/// Defaults, then the config file, then flags.
fn resolve(args: &DeconvArgs) -> Result<DeconvSettings> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let method: Method = match (&args.method, file.get("method")) {
        (Some(m), _) | (None, Some(m)) => m.parse()?,
        (None, None) => Method::Rl(Variant::Rrrl),
    };
    let mut settings = DeconvSettings::defaults(method);
    for (k, v) in &file {
        if k != "method" {
            settings.set(k, v)?;
        }
    }
    let flags: [(&str, Option<String>); 10] = [
        ("iterations", args.iterations.map(|v| v.to_string())),
        ("alpha", args.alpha.map(|v| v.to_string())),
        ("data_penaliser", args.data_penaliser.clone()),
        ("robust_eps", args.robust_eps.map(|v| v.to_string())),
        ("smoothness", args.smoothness.clone()),
        ("tv_eps", args.tv_eps.map(|v| v.to_string())),
        ("lambda", args.lambda.map(|v| v.to_string())),
        ("l1_eps", args.l1_eps.map(|v| v.to_string())),
        ("tau", args.tau.map(|v| v.to_string())),
        ("stop_rel_change", args.stop_rel_change.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            settings.set(k, &v)?;
        }
    }
    settings.validate()?;
    Ok(settings)
}

fn exit_code(err: &Error) -> i32 {
    match err {
        e if e.is_numerical() => EXIT_NUMERICAL,
        Error::Io { .. }
        | Error::Format { .. }
        | Error::UnsupportedChannels(_)
        | Error::InvalidImage(_)
        | Error::KernelShape { .. }
        | Error::DegenerateKernel(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Blur(a) => blur(a),
        Command::Noise(a) => noise(a),
        Command::Deconv(a) => deconv(*a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            exit_code(&e)
        }
    }
}

fn blur(a: BlurArgs) -> Result<()> {
    let psf = io::load_psf(&a.psf)?;
    let img = io::load_image(&a.input)?;
    let mode = match a.boundary {
        BoundaryArg::Cyclic => BoundaryMode::Cyclic,
        BoundaryArg::Reflect => BoundaryMode::Reflect,
    };
    let out = SpaceInvariantBlur::new(psf, mode).apply(&img);
    io::save_image(&out, &a.output)
}

fn noise(a: NoiseArgs) -> Result<()> {
    let kind = match a.kind {
        NoiseArg::Impulse => NoiseKind::ImpulseUniform { fraction: a.fraction },
        NoiseArg::Gaussian => NoiseKind::Gaussian { sigma: a.sigma },
        NoiseArg::Poisson => NoiseKind::Poisson,
    };
    let spec = NoiseSpec { kind, seed: a.seed };
    spec.validate()?;
    let img = io::load_image(&a.input)?;
    let (noisy, floored) = add_noise(&img, &spec)?.lift_floor(INTENSITY_FLOOR);
    io::save_image_annotated(&noisy, &a.output, &[floor_comment(floored)])
}

fn floor_comment(count: usize) -> String {
    format!("floored {count} value(s) to {INTENSITY_FLOOR}")
}

fn deconv(a: DeconvArgs) -> Result<()> {
    let settings = resolve(&a)?;
    if a.dump_config {
        print!("{}", settings.to_config_text());
        return Ok(());
    }
    let (Some(psf_path), Some(input), Some(output)) = (&a.psf, &a.input, &a.output) else {
        return Err(Error::Config("deconv needs --psf, an input and an output path".into()));
    };
    let psf = io::load_psf(psf_path)?;
    let loaded = io::load_image(input)?;
    let truth = a.ground_truth.as_deref().map(io::load_image).transpose()?;
    if let Some(g) = &truth {
        loaded.check_same_shape(g, "ground truth")?;
    }
    let (f, floored) = loaded.lift_floor(INTENSITY_FLOOR);
    if floored > 0 {
        eprintln!("note: {}", floor_comment(floored));
    }

    let (u, trace) = match settings.method {
        Method::Rl(variant) => solver::run(&f, &psf, &settings.solver_config()?, variant)?,
        Method::Variational { .. } => variational::run_descent(&f, &psf, &settings.descent_config()?)?,
    };
    report_trace(&trace);

    let comments = [
        format!("method {} iterations {} alpha {}", settings.method, trace.len(), settings.alpha),
        floor_comment(floored),
    ];
    io::save_image_annotated(&u, output, &comments)?;
    if let Some(g) = truth {
        println!("snr_db={:.4}", snr(&u, &g)?);
    }
    Ok(())
}

fn report_trace(trace: &IterationTrace) {
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
    if trace.floored_pixels > 0 {
        eprintln!("warning: division floor applied {} time(s)", trace.floored_pixels);
    }
    if trace.stopped_early {
        eprintln!("note: stopped after {} iteration(s)", trace.len());
    }
}

fn bench(a: BenchArgs) -> Result<()> {
    let preset: PresetName = a.preset.parse()?;
    let assets = match &a.assets {
        Some(dir) => BenchAssets::from_dir(dir)?,
        None => BenchAssets::bundled(),
    };
    let records = bench_preset(preset, a.seed, &assets)?;
    let csv = records_to_csv(&records, !a.no_timing);
    match &a.out {
        Some(path) => write_file(path, csv.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
