//! JSON config file and its merge with command-line flags. Flags win.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn config_err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteArg {
    Closed,
    Generic,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteArg {
    Classical,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchArg {
    L4,
    L5,
}

/// Physical parameters shared by most subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct PhysArgs {
    #[arg(long)]
    pub mu: Option<f64>,
    /// Radiation factor of the bigger primary.
    #[arg(long)]
    pub q1: Option<f64>,
    /// Oblateness coefficient of the smaller primary.
    #[arg(long = "A2")]
    pub a2: Option<f64>,
    /// Dimensionless speed of light.
    #[arg(long)]
    pub cd: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EquilibriaArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    #[arg(long, value_enum)]
    pub branch: Option<BranchArg>,
    /// Newton tolerance on the rest force.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// `start:stop:count`, endpoints included.
    #[arg(long = "mu-grid")]
    pub mu_grid: Option<String>,
    #[arg(long = "epsilon-grid")]
    pub epsilon_grid: Option<String>,
    #[arg(long = "A2-grid")]
    pub a2_grid: Option<String>,
    #[arg(long = "W1-grid")]
    pub w1_grid: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "A2")]
    pub a2: Option<f64>,
    #[arg(long = "W1")]
    pub w1: Option<f64>,
    /// Add the critical mass of the Taylor-oracle quartic as a column.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BirkhoffArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    #[arg(long, value_enum)]
    pub route: Option<RouteArg>,
    /// Directory for the text dumps of the B1 and B2 series.
    #[arg(long = "dump-series")]
    pub dump_series: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    /// Initial state in the rotating frame; position defaults to L4 + (1e-4, 0).
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub y0: Option<f64>,
    #[arg(long)]
    pub vx0: Option<f64>,
    #[arg(long)]
    pub vy0: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long = "dt-out")]
    pub dt_out: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Spectrum sidecar path; defaults to `<output>.spectrum.json`.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Option<SuiteArg>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Triangular equilibrium by every available method.
    Equilibria(EquilibriaArgs),
    /// Linear stability report.
    Stability(PhysArgs),
    /// Critical mass over parameter grids, as CSV.
    Sweep(SweepArgs),
    /// Quadratic and cubic expansion coefficients against the Taylor oracle.
    Expand(PhysArgs),
    /// Frequencies, Whittaker transformation and normal-form residuals.
    NormalForm(PhysArgs),
    /// Second-order normalization.
    Birkhoff(BirkhoffArgs),
    /// Integrate the full equations and extract the dominant frequencies.
    Simulate(SimulateArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Equilibria(_) => "equilibria",
            Command::Stability(_) => "stability",
            Command::Sweep(_) => "sweep",
            Command::Expand(_) => "expand",
            Command::NormalForm(_) => "normal-form",
            Command::Birkhoff(_) => "birkhoff",
            Command::Simulate(_) => "simulate",
            Command::Verify(_) => "verify",
        }
    }

    pub fn empty(name: &str) -> Result<Self, ConfigError> {
        Ok(match name {
            "equilibria" => Command::Equilibria(Default::default()),
            "stability" => Command::Stability(Default::default()),
            "sweep" => Command::Sweep(Default::default()),
            "expand" => Command::Expand(Default::default()),
            "normal-form" => Command::NormalForm(Default::default()),
            "birkhoff" => Command::Birkhoff(Default::default()),
            "simulate" => Command::Simulate(Default::default()),
            "verify" => Command::Verify(Default::default()),
            other => return config_err(format!("unknown subcommand `{other}`")),
        })
    }
}

/// Config file schema. Keys mirror the long flag names.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub subcommand: Option<String>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub mu: Option<f64>,
    pub q1: Option<f64>,
    #[serde(rename = "A2")]
    pub a2: Option<f64>,
    pub cd: Option<f64>,
    pub branch: Option<BranchArg>,
    pub tol: Option<f64>,
    pub mu_grid: Option<String>,
    pub epsilon_grid: Option<String>,
    #[serde(rename = "A2_grid")]
    pub a2_grid: Option<String>,
    #[serde(rename = "W1_grid")]
    pub w1_grid: Option<String>,
    pub epsilon: Option<f64>,
    #[serde(rename = "W1")]
    pub w1: Option<f64>,
    pub oracle: Option<bool>,
    pub route: Option<RouteArg>,
    pub dump_series: Option<PathBuf>,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub vx0: Option<f64>,
    pub vy0: Option<f64>,
    pub t_end: Option<f64>,
    pub dt_out: Option<f64>,
    pub spectrum: Option<PathBuf>,
    pub suite: Option<SuiteArg>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .or_else(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).or_else(|e| config_err(format!("invalid config {}: {e}", path.display())))
    }
}

fn fill<T: Clone>(flag: &mut Option<T>, file: &Option<T>) {
    if flag.is_none() {
        *flag = file.clone();
    }
}

impl PhysArgs {
    fn merge(&mut self, c: &ConfigFile) {
        fill(&mut self.mu, &c.mu);
        fill(&mut self.q1, &c.q1);
        fill(&mut self.a2, &c.a2);
        fill(&mut self.cd, &c.cd);
    }
}

/// Fills every unset flag from the config file.
pub fn merge(cmd: &mut Command, c: &ConfigFile) {
    match cmd {
        Command::Equilibria(a) => {
            a.phys.merge(c);
            fill(&mut a.branch, &c.branch);
            fill(&mut a.tol, &c.tol);
        }
        Command::Stability(p) | Command::Expand(p) | Command::NormalForm(p) => p.merge(c),
        Command::Sweep(a) => {
            fill(&mut a.mu_grid, &c.mu_grid);
            fill(&mut a.epsilon_grid, &c.epsilon_grid);
            fill(&mut a.a2_grid, &c.a2_grid);
            fill(&mut a.w1_grid, &c.w1_grid);
            fill(&mut a.epsilon, &c.epsilon);
            fill(&mut a.a2, &c.a2);
            fill(&mut a.w1, &c.w1);
            a.oracle = a.oracle || c.oracle.unwrap_or(false);
        }
        Command::Birkhoff(a) => {
            a.phys.merge(c);
            fill(&mut a.route, &c.route);
            fill(&mut a.dump_series, &c.dump_series);
        }
        Command::Simulate(a) => {
            a.phys.merge(c);
            fill(&mut a.x0, &c.x0);
            fill(&mut a.y0, &c.y0);
            fill(&mut a.vx0, &c.vx0);
            fill(&mut a.vy0, &c.vy0);
            fill(&mut a.t_end, &c.t_end);
            fill(&mut a.dt_out, &c.dt_out);
            fill(&mut a.tol, &c.tol);
            fill(&mut a.spectrum, &c.spectrum);
        }
        Command::Verify(a) => fill(&mut a.suite, &c.suite),
    }
}

/// `start:stop:count`, endpoints included; `count = 1` gives `[start]`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return config_err(format!("grid `{s}` is not start:stop:count"));
    }
    let num = |t: &str| t.trim().parse::<f64>().or_else(|_| config_err(format!("bad number `{t}` in grid `{s}`")));
    let (a, b) = (num(parts[0])?, num(parts[1])?);
    let n: usize = parts[2].trim().parse().or_else(|_| config_err(format!("bad count in grid `{s}`")))?;
    if n == 0 {
        return config_err(format!("grid `{s}` is empty"));
    }
    if !(a.is_finite() && b.is_finite()) {
        return config_err(format!("grid `{s}` has non-finite bounds"));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

pub fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        config_err(format!("{name} must be positive, got {v}"))
    }
}
