//! Command-line front end: experiment configuration, the `simulate`,
//! `certify` and `reproduce` subcommands, and artifact emission.
//!
//! Configuration is TOML with sections `[model]`, `[grid]`, `[time]`,
//! `[initial]`, `[samples]` and `[output]`; see `configs/` for the
//! canonical files. Command-line flags override file keys.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::banach::{Grid, GridFunction, NormKind};
use crate::certificates::{
    certify, fit_decay_rate, generate_samples, CertificateReport, CertifyOptions, DecayFit,
    SampleFamily, SampleSpec, Verdict,
};
use crate::closedloop::{time_grid, FeedbackLaw, Plant, PlantKind, Trajectory};
use crate::error::Error;
use crate::semigroup::SemigroupModel;

pub const EXAMPLE1_TOML: &str = include_str!("../configs/example1.toml");
pub const EXAMPLE2_TOML: &str = include_str!("../configs/example2.toml");
pub const EXAMPLE3_TOML: &str = include_str!("../configs/example3.toml");
pub const MATRIX_TOML: &str = include_str!("../configs/matrix.toml");

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{0}")]
    Numerical(#[from] Error),

    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => EXIT_CONFIG,
            Self::Numerical(_) | Self::Io(_) => EXIT_NUMERICAL,
        }
    }
}

fn config_err(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Re-labels a library parameter error as a config error on `key`.
fn as_config<T>(key: &str, r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        Error::InvalidParameter { reason, .. } | Error::InvalidGrid(reason) => config_err(key, reason),
        e => CliError::Numerical(e),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Example1,
    Example2,
    Example3,
    Matrix,
}

impl ModelId {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Example3 => "example3",
            Self::Matrix => "matrix",
        }
    }

    pub fn canonical_toml(self) -> &'static str {
        match self {
            Self::Example1 => EXAMPLE1_TOML,
            Self::Example2 => EXAMPLE2_TOML,
            Self::Example3 => EXAMPLE3_TOML,
            Self::Matrix => MATRIX_TOML,
        }
    }
}

impl FromStr for ModelId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "example1" => Ok(Self::Example1),
            "example2" => Ok(Self::Example2),
            "example3" => Ok(Self::Example3),
            "matrix" => Ok(Self::Matrix),
            _ => Err(config_err("model.id", format!("unknown model `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub id: ModelId,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_cells: usize,
    pub x_max: f64,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Time step for the heat models, base sampling step for transport.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_final: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "one_usize")]
    pub stride: usize,
    #[serde(default = "ten")]
    pub periods: usize,
    #[serde(default)]
    pub fit_t_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub y0: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesSection {
    pub count: usize,
    pub seed: u64,
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

impl Default for SamplesSection {
    fn default() -> Self {
        Self {
            count: 100,
            seed: 1,
            family: SampleFamily::Bumps.as_str().into(),
            window: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub samples: SamplesSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Parsed `k` profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KProfile {
    /// `a e^{-b x}`
    Exp { a: f64, b: f64 },
    /// `a` on `[0, l)`
    Const { a: f64, l: f64 },
    Zero,
}

impl KProfile {
    pub const DEFAULT: &'static str = "exp:0.5,1";

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Exp { a, b } => a * (-b * x).exp(),
            Self::Const { a, l } => {
                if x < l {
                    a
                } else {
                    0.0
                }
            }
            Self::Zero => 0.0,
        }
    }
}

fn parse_params(key: &str, s: &str, n: usize) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| config_err(key, format!("`{s}`: {e}")))?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(config_err(key, format!("`{s}`: expected {n} finite numbers")));
    }
    Ok(v)
}

impl FromStr for KProfile {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        const KEY: &str = "model.k_profile";
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        match name.trim() {
            "zero" => Ok(Self::Zero),
            "exp" => {
                let p = parse_params(KEY, rest, 2)?;
                Ok(Self::Exp { a: p[0], b: p[1] })
            }
            "const" => {
                let p = parse_params(KEY, rest, 2)?;
                Ok(Self::Const { a: p[0], l: p[1] })
            }
            _ => Err(config_err(KEY, format!("unknown profile `{s}`"))),
        }
    }
}

/// Parsed initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialSpec {
    Const(f64),
    /// `cos^2` bump of the given centre and width.
    Bump { center: f64, width: f64 },
    /// Random piecewise-constant state over the sample window.
    Random(u64),
}

impl FromStr for InitialSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        const KEY: &str = "initial.y0";
        let (name, rest) = s
            .split_once(':')
            .ok_or_else(|| config_err(KEY, format!("`{s}`: expected kind:params")))?;
        match name.trim() {
            "const" => Ok(Self::Const(parse_params(KEY, rest, 1)?[0])),
            "bump" => {
                let p = parse_params(KEY, rest, 2)?;
                if p[1] <= 0.0 {
                    return Err(config_err(KEY, "bump width must be positive"));
                }
                Ok(Self::Bump {
                    center: p[0],
                    width: p[1],
                })
            }
            "random" => rest
                .trim()
                .parse()
                .map(Self::Random)
                .map_err(|e| config_err(KEY, format!("`{s}`: {e}"))),
            _ => Err(config_err(KEY, format!("unknown initial data `{s}`"))),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let key = e.message().split('`').nth(1).unwrap_or("config").to_string();
            config_err(&key, e.to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn canonical(id: ModelId) -> Self {
        Self::from_toml(id.canonical_toml()).expect("canonical configs are valid")
    }

    /// TOML echo; parses back to an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn kind(&self) -> PlantKind {
        match self.model.id {
            ModelId::Example1 => PlantKind::Example1,
            ModelId::Example2 => PlantKind::Example2,
            ModelId::Example3 => PlantKind::Example3,
            ModelId::Matrix => PlantKind::Matrix,
        }
    }

    pub fn norm_kind(&self) -> NormKind {
        match self.model.id {
            ModelId::Example1 | ModelId::Example2 => NormKind::L1,
            ModelId::Example3 | ModelId::Matrix => NormKind::Sup,
        }
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        as_config("grid", Grid::new(0.0, self.grid.x_max, self.grid.n_cells))
    }

    pub fn dt(&self) -> Result<f64, CliError> {
        Ok(self.time.dt.unwrap_or(self.grid()?.dx()))
    }

    pub fn k_profile(&self) -> Result<KProfile, CliError> {
        self.model.k_profile.as_deref().unwrap_or(KProfile::DEFAULT).parse()
    }

    pub fn sample_spec(&self) -> Result<SampleSpec, CliError> {
        let family = as_config("samples.family", self.samples.family.parse())?;
        as_config("samples.count", SampleSpec::new(self.samples.count, self.samples.seed, family))
    }

    /// Sample support; for the outgoing transport model it leaves one
    /// horizon of room before `x_max`.
    pub fn window(&self) -> (f64, f64) {
        match self.samples.window {
            Some([a, b]) => (a, b),
            None if self.model.id == ModelId::Example2 => {
                (0.0, (self.grid.x_max - self.time.horizon).max(0.5 * self.grid.x_max))
            }
            None => (0.0, self.grid.x_max),
        }
    }

    /// Every key the chosen model needs is present and in range.
    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.model;
        if !(m.mu >= 0.0 && m.mu.is_finite()) {
            return Err(config_err("model.mu", "must be a non-negative number"));
        }
        let grid = self.grid()?;
        match m.id {
            ModelId::Example1 => {
                let alpha = m.alpha.ok_or_else(|| config_err("model.alpha", "required for example1"))?;
                if !alpha.is_finite() || m.mu * alpha.abs() >= 1.0 {
                    return Err(config_err("model.alpha", "mu * alpha must be below 1"));
                }
            }
            ModelId::Example2 => {
                let k = self.k_profile()?;
                let kf = as_config("model.k_profile", GridFunction::from_fn(grid, NormKind::L1, |x| k.eval(x)))?;
                let nk = kf.norm();
                if nk >= 1.0 {
                    return Err(config_err("model.k_profile", format!("|k|_1 = {nk} must be below 1")));
                }
                if kf.values().iter().any(|&v| v <= -1.0) {
                    return Err(config_err("model.k_profile", "1 + k must stay positive"));
                }
            }
            ModelId::Matrix => {
                if !m.b.is_some_and(f64::is_finite) {
                    return Err(config_err("model.b", "required for matrix"));
                }
            }
            ModelId::Example3 => {}
        }
        let t = &self.time;
        if let Some(dt) = t.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(config_err("time.dt", "must be positive"));
            }
        }
        if !(t.t_final >= 0.0 && t.t_final.is_finite()) {
            return Err(config_err("time.t_final", "must be non-negative"));
        }
        if !(t.horizon > 0.0 && t.horizon.is_finite()) {
            return Err(config_err("time.horizon", "must be positive"));
        }
        if t.stride == 0 {
            return Err(config_err("time.stride", "must be positive"));
        }
        if t.periods < 2 {
            return Err(config_err("time.periods", "must be at least 2"));
        }
        self.initial.y0.parse::<InitialSpec>()?;
        self.sample_spec()?;
        let (a, b) = self.window();
        if !(a < b && a >= 0.0 && b <= self.grid.x_max) {
            return Err(config_err("samples.window", format!("[{a}, {b}] must lie inside the grid")));
        }
        Ok(())
    }

    pub fn plant(&self) -> Result<Plant, CliError> {
        let grid = self.grid()?;
        let m = &self.model;
        match m.id {
            ModelId::Example1 => as_config("model.alpha", Plant::example1(grid, m.alpha.unwrap_or(1.0))),
            ModelId::Example2 => {
                let k = self.k_profile()?;
                let kf = as_config("model.k_profile", GridFunction::from_fn(grid, NormKind::L1, |x| k.eval(x)))?;
                as_config("model.k_profile", Plant::example2(kf))
            }
            ModelId::Example3 => as_config("time.dt", Plant::example3(grid, self.dt()?)),
            ModelId::Matrix => as_config("model.b", Plant::matrix(grid, self.dt()?, m.b.unwrap_or(0.0))),
        }
    }

    pub fn initial_state(&self) -> Result<GridFunction, CliError> {
        let grid = self.grid()?;
        let norm = self.norm_kind();
        let spec: InitialSpec = self.initial.y0.parse()?;
        let y = match spec {
            InitialSpec::Const(c) => GridFunction::constant(grid, norm, c),
            InitialSpec::Bump { center, width } => as_config(
                "initial.y0",
                GridFunction::from_fn(grid, norm, |x| {
                    let u = (x - center) / width;
                    if u.abs() < 0.5 {
                        (std::f64::consts::PI * u).cos().powi(2)
                    } else {
                        0.0
                    }
                }),
            )?,
            InitialSpec::Random(seed) => {
                let spec = as_config(
                    "initial.y0",
                    SampleSpec::new(1, seed, SampleFamily::RandomPiecewise),
                )?;
                as_config("initial.y0", generate_samples(&spec, grid, norm, self.window()))?.remove(0)
            }
        };
        Ok(y)
    }

    /// Stored times of a `simulate` run.
    pub fn storage_times(&self) -> Result<Vec<f64>, CliError> {
        Ok(time_grid(self.dt()? * self.time.stride as f64, self.time.t_final))
    }

    pub fn certify_options(&self) -> Result<CertifyOptions, CliError> {
        Ok(CertifyOptions {
            horizon: self.time.horizon,
            samples: self.sample_spec()?,
            window: self.window(),
            periods: self.time.periods,
            fit_t_min: self.time.fit_t_min,
            check_stability: true,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(id) = &o.model {
            self.model.id = id.parse()?;
        }
        if let Some(mu) = o.mu {
            self.model.mu = mu;
        }
        if let Some(t) = o.horizon {
            self.time.horizon = t;
        }
        if let Some(dx) = o.dx {
            if !(dx > 0.0) {
                return Err(config_err("--dx", "must be positive"));
            }
            self.grid.n_cells = (self.grid.x_max / dx).round().max(2.0) as usize;
        }
        if let Some(dt) = o.dt {
            self.time.dt = Some(dt);
        }
        if let Some(t) = o.t_final {
            self.time.t_final = t;
        }
        if let Some(y0) = &o.y0 {
            self.initial.y0 = y0.clone();
        }
        if let Some(seed) = o.seed {
            self.samples.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output.dir = Some(out.display().to_string());
        }
        self.validate()
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.output.dir.as_deref().unwrap_or("runs"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "semistab", version, about = "Closed-loop simulation and stabilization certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the closed loop and write `trajectory.csv`.
    Simulate(RunArgs),
    /// Estimate the constants and write the certificate.
    Certify(RunArgs),
    /// Run a canonical example end to end.
    Reproduce {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        /// 1, 2 or 3
        example: u8,
        /// Parent directory for the run directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML experiment config
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// example1, example2, example3 or matrix; selects the canonical config without --config
    #[arg(long)]
    pub model: Option<String>,
    /// Feedback gain
    #[arg(long)]
    pub mu: Option<f64>,
    /// Certificate horizon
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Cell width; rounds to the nearest whole cell count
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// const:<a>, bump:<center>,<width> or random:<seed>
    #[arg(long)]
    pub y0: Option<String>,
    /// Sample seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parent directory for the run directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// The config file, or the canonical config of `--model`, with the
    /// flags applied.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => {
                let id: ModelId = self
                    .overrides
                    .model
                    .as_deref()
                    .ok_or_else(|| config_err("--config", "give a config file or --model"))?
                    .parse()?;
                ExperimentConfig::canonical(id)
            }
        };
        cfg.apply(&self.overrides)?;
        Ok(cfg)
    }
}

/// One named check of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub certificate: Option<CertificateReport>,
    pub checks: Vec<Check>,
    pub timings: Vec<(&'static str, f64)>,
}

impl RunReport {
    fn new(command: &'static str, config: ExperimentConfig) -> Self {
        Self {
            command,
            config,
            certificate: None,
            checks: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn verdict(&self) -> Verdict {
        let cert = self.certificate.as_ref().is_none_or(|c| c.verdict == Verdict::Pass);
        Verdict::from_bool(cert && self.checks.iter().all(|c| c.pass))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# command: {}", self.command);
        s.push_str("# config\n");
        s.push_str(&self.config.to_toml());
        s.push_str("\n# checks\n");
        if let Some(c) = &self.certificate {
            let _ = writeln!(s, "certificate = {}", c.verdict.as_str());
        }
        for c in &self.checks {
            let _ = writeln!(s, "{} = {} ({})", c.name, Verdict::from_bool(c.pass).as_str(), c.detail);
        }
        let _ = writeln!(s, "verdict = {}", self.verdict().as_str());
        s.push_str("\n# timings (s)\n");
        for (k, t) in &self.timings {
            let _ = writeln!(s, "{k} = {t:.3}");
        }
        s
    }
}

/// Result of a command: where artifacts went and the overall verdict.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub report: RunReport,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.report.verdict() {
            Verdict::Pass => EXIT_OK,
            Verdict::Fail => EXIT_FAIL,
        }
    }
}

/// Creates `base/<label>-<timestamp>[-n]`, never reusing a directory.
pub fn unique_run_dir(base: &Path, label: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(base)?;
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
    for n in 0u32.. {
        let name = if n == 0 {
            format!("{label}-{stamp}")
        } else {
            format!("{label}-{stamp}-{n}")
        };
        let dir = base.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

fn write_trajectory(dir: &Path, traj: &Trajectory) -> io::Result<()> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    fs::write(dir.join("trajectory.csv"), buf)
}

fn write_certificate(dir: &Path, c: &CertificateReport) -> io::Result<()> {
    fs::write(dir.join("certificate.txt"), c.to_text())?;
    fs::write(dir.join("certificate.csv"), format!("{}\n{}\n", c.csv_header(), c.csv_row()))
}

fn timed<T>(report: &mut RunReport, label: &'static str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    report.timings.push((label, start.elapsed().as_secs_f64()));
    out
}

/// Closed-loop run of the configured model.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Trajectory, CliError> {
    let plant = cfg.plant()?;
    let y0 = cfg.initial_state()?;
    let times = cfg.storage_times()?;
    let traj = match plant.kind {
        PlantKind::Example3 | PlantKind::Matrix => {
            crate::closedloop::simulate_implicit(&plant, &y0, FeedbackLaw::bang_bang(cfg.model.mu), &times)?
        }
        _ => plant.simulate(&y0, cfg.model.mu, &times)?,
    };
    Ok(traj)
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut report = RunReport::new("simulate", cfg.clone());
    let traj = timed(&mut report, "simulate", || simulate(cfg))?;
    let dir = unique_run_dir(&cfg.output_dir(), &format!("simulate-{}", cfg.model.id.as_str()))?;
    write_trajectory(&dir, &traj)?;
    fs::write(dir.join("run_report.txt"), report.to_text())?;
    Ok(Outcome { dir, report })
}

/// The certificate of the configured model.
pub fn certificate(cfg: &ExperimentConfig) -> Result<CertificateReport, CliError> {
    let plant = cfg.plant()?;
    let y0 = cfg.initial_state()?;
    Ok(certify(&plant, &y0, &cfg.certify_options()?)?)
}

pub fn cmd_certify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut report = RunReport::new("certify", cfg.clone());
    let cert = timed(&mut report, "certify", || certificate(cfg))?;
    let dir = unique_run_dir(&cfg.output_dir(), &format!("certify-{}", cfg.model.id.as_str()))?;
    write_certificate(&dir, &cert)?;
    report.certificate = Some(cert);
    fs::write(dir.join("run_report.txt"), report.to_text())?;
    Ok(Outcome { dir, report })
}

fn fit_or_none(traj: &Trajectory, t_min: f64) -> Option<DecayFit> {
    fit_decay_rate(traj, t_min).ok()
}

/// Example-specific checks on the simulated trajectory at the configured gain.
pub fn reproduce_checks(cfg: &ExperimentConfig, traj: &Trajectory) -> Result<Vec<Check>, CliError> {
    let mu = cfg.model.mu;
    let plant = cfg.plant()?;
    let y0 = cfg.initial_state()?;
    let fit = fit_or_none(traj, cfg.time.fit_t_min);
    let mut checks = Vec::new();
    match cfg.model.id {
        ModelId::Example1 => {
            let extinct = traj
                .times
                .iter()
                .zip(&traj.norms)
                .filter(|(t, _)| **t >= 1.0)
                .all(|(_, n)| *n == 0.0);
            checks.push(Check {
                name: "exact_extinction",
                pass: extinct,
                detail: "norm is exactly 0 for t >= 1".into(),
            });
            checks.push(Check {
                name: "nilpotent_flag",
                pass: fit.is_some_and(|f| f.nilpotent),
                detail: "decay fit reports a nilpotent trajectory".into(),
            });
            if let Some(i) = traj.index_near(0.5, 1e-12) {
                let sg = SemigroupModel::LeftShiftCutoff { grid: *y0.grid() };
                let oracle = (-0.5 * mu).exp() * sg.evaluate(&y0, 0.5)?.norm();
                let err = (traj.norms[i] - oracle).abs();
                checks.push(Check {
                    name: "norm_at_half",
                    pass: err <= 1e-10,
                    detail: format!("|y(0.5)| = {} vs {oracle}", traj.norms[i]),
                });
            }
        }
        ModelId::Example2 => {
            let crate::operators::ControlOperatorModel::Multiplication { k } = &plant.operator else {
                unreachable!("example2 plant carries a multiplier")
            };
            let nk = k.norm();
            let n0 = traj.norms[0];
            let sandwich = traj.times.iter().zip(&traj.norms).all(|(t, n)| {
                let lo = (-mu * t - mu * nk).exp() * n0;
                let hi = (-mu * t + mu * nk).exp() * n0;
                *n >= lo * (1.0 - 1e-12) && *n <= hi * (1.0 + 1e-12)
            });
            checks.push(Check {
                name: "sandwich_bound",
                pass: sandwich,
                detail: format!("|k|_1 = {nk}"),
            });
            let sigma = fit.map_or(f64::NAN, |f| f.sigma);
            checks.push(Check {
                name: "rate_matches_gain",
                pass: (sigma - mu).abs() <= 0.02 * mu,
                detail: format!("sigma_emp = {sigma}, mu = {mu}"),
            });
        }
        ModelId::Example3 | ModelId::Matrix => {
            let sigma = fit.map_or(f64::NAN, |f| f.sigma);
            checks.push(Check {
                name: "rate_at_least_gain",
                pass: sigma >= 0.95 * mu,
                detail: format!("sigma_emp = {sigma}, mu = {mu}"),
            });
        }
    }
    Ok(checks)
}

pub fn canonical_example(example: u8) -> Result<ExperimentConfig, CliError> {
    let id = match example {
        1 => ModelId::Example1,
        2 => ModelId::Example2,
        3 => ModelId::Example3,
        _ => return Err(config_err("example", format!("{example} is not 1, 2 or 3"))),
    };
    Ok(ExperimentConfig::canonical(id))
}

pub fn cmd_reproduce(example: u8, out: Option<&Path>) -> Result<Outcome, CliError> {
    let mut cfg = canonical_example(example)?;
    if let Some(out) = out {
        cfg.output.dir = Some(out.display().to_string());
    }
    let mut report = RunReport::new("reproduce", cfg.clone());
    let cert = timed(&mut report, "certify", || certificate(&cfg))?;
    let traj = timed(&mut report, "simulate", || simulate(&cfg))?;
    report.checks = reproduce_checks(&cfg, &traj)?;
    let fit = fit_or_none(&traj, cfg.time.fit_t_min);
    if let Some(f) = fit {
        report.checks.push(Check {
            name: "decay_fit",
            pass: f.sigma > 0.0,
            detail: format!("sigma_emp = {}, prefactor = {}", f.sigma, f.prefactor),
        });
    }
    if let Some(v) = cert.iterate {
        report.checks.push(Check {
            name: "iterate_bound",
            pass: v.pass,
            detail: format!("worst ratio {} over {} periods", v.worst_ratio, v.periods),
        });
    }
    let dir = unique_run_dir(&cfg.output_dir(), &format!("reproduce-{example}"))?;
    write_certificate(&dir, &cert)?;
    write_trajectory(&dir, &traj)?;
    report.certificate = Some(cert);
    fs::write(dir.join("run_report.txt"), report.to_text())?;
    Ok(Outcome { dir, report })
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args.resolve()?),
        Command::Certify(args) => cmd_certify(&args.resolve()?),
        Command::Reproduce { example, out } => cmd_reproduce(example, out.as_deref()),
    }
}
