//! JSON configuration with command-line overrides.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use vacuum_core::norms::Truncation;
use vacuum_core::radial::{Family, RunConfig};
use vacuum_core::GasParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub radial: usize,
    pub n_phi: usize,
    pub n_psi: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            radial: 64,
            n_phi: 6,
            n_psi: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeConfig {
    pub rtol: f64,
    pub atol: f64,
    /// End time; each subcommand has its own default when unset.
    pub t_end: Option<f64>,
    pub samples: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            rtol: 1e-10,
            atol: 1e-10,
            t_end: None,
            samples: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub cfl: f64,
    pub dt_max: f64,
    pub dt: Option<f64>,
    pub eps: f64,
    pub velocity_ratio: f64,
    pub family: Family,
    pub eps0: f64,
    pub energy_samples: usize,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let r = RunConfig::default();
        SolverConfig {
            cfl: r.cfl,
            dt_max: r.dt_max,
            dt: r.dt,
            eps: r.eps,
            velocity_ratio: r.velocity_ratio,
            family: r.family,
            eps0: r.eps0,
            energy_samples: r.energy_samples,
            max_steps: r.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub gamma: f64,
    pub mass: f64,
    pub seed: u64,
    pub grid: GridConfig,
    pub ode: OdeConfig,
    pub solver: SolverConfig,
    pub norms: Truncation,
    // Kept out of reports so identical runs in different directories match.
    #[serde(skip_serializing)]
    pub output: OutputConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            gamma: 2.0,
            mass: 1.0,
            seed: 0,
            grid: GridConfig::default(),
            ode: OdeConfig::default(),
            solver: SolverConfig::default(),
            norms: Truncation::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub mass: Option<f64>,
    #[arg(long = "t-end", global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Radial resolution.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Output directory (defaults to $VEL_OUT_DIR, then ./vel-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("validation error: `{key}`: {reason}"))
}

pub fn parse_str(text: &str, origin: &str) -> Result<Config, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError(format!("parse error in {origin}: {e}")))
}

/// Reads the file (if any), applies the overrides and validates the result.
pub fn parse_config(ov: &Overrides) -> Result<Config, ConfigError> {
    let mut cfg = match &ov.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
            parse_str(&text, &p.display().to_string())?
        }
        None => Config::default(),
    };
    if let Some(v) = ov.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = ov.mass {
        cfg.mass = v;
    }
    if let Some(v) = ov.t_end {
        cfg.ode.t_end = Some(v);
    }
    if let Some(v) = ov.eps {
        cfg.solver.eps = v;
    }
    if let Some(v) = ov.resolution {
        cfg.grid.radial = v;
    }
    if let Some(v) = &ov.out {
        cfg.output.dir = Some(v.clone());
    }
    if let Some(v) = ov.format {
        cfg.output.format = v;
    }
    if let Some(v) = ov.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Err(vacuum_core::Error::Parameter { name, reason }) = GasParams::new(self.gamma, self.mass) {
            return Err(invalid(name, reason));
        }
        let g = &self.grid;
        if g.radial < 16 {
            return Err(invalid("grid.radial", "need at least 16 radial nodes"));
        }
        if g.n_phi < 2 {
            return Err(invalid("grid.n_phi", "need at least 2 polar nodes"));
        }
        if g.n_psi < 4 || g.n_psi % 2 != 0 {
            return Err(invalid("grid.n_psi", "must be even and at least 4"));
        }
        if !(self.ode.rtol > 0.0) {
            return Err(invalid("ode.rtol", "must be positive"));
        }
        if !(self.ode.atol > 0.0) {
            return Err(invalid("ode.atol", "must be positive"));
        }
        if self.ode.samples < 10 {
            return Err(invalid("ode.samples", "need at least 10 samples"));
        }
        if let Some(t) = self.ode.t_end {
            if !(t > 0.0) || !t.is_finite() {
                return Err(invalid("ode.t_end", "must be positive"));
            }
        }
        let n = &self.norms;
        if n.max_time > 2 {
            return Err(invalid("norms.max_time", "time derivatives above 2 are not available"));
        }
        if n.max_space > 3 {
            return Err(invalid("norms.max_space", "spatial orders above 3 exceed differentiation capability"));
        }
        if let Err(vacuum_core::Error::Parameter { name, reason }) = self.run_config(1.0).validate() {
            return Err(invalid(&format!("solver.{name}"), reason));
        }
        Ok(())
    }

    pub fn t_end_or(&self, default: f64) -> f64 {
        self.ode.t_end.unwrap_or(default)
    }

    pub fn run_config(&self, t_end: f64) -> RunConfig {
        let s = &self.solver;
        RunConfig {
            gamma: self.gamma,
            mass: self.mass,
            resolution: self.grid.radial,
            energy_angular: (4, 8),
            cfl: s.cfl,
            dt_max: s.dt_max,
            dt: s.dt,
            t_end,
            eps: s.eps,
            velocity_ratio: s.velocity_ratio,
            family: s.family,
            energy_samples: s.energy_samples,
            truncation: self.norms,
            eps0: s.eps0,
            max_steps: s.max_steps,
            record_balance: false,
        }
    }

    /// `--out`, then the file, then `$VEL_OUT_DIR`, then `./vel-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os("VEL_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| Path::new("vel-out").to_path_buf())
    }
}
