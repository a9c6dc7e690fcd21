//! Driving the radial solver: initial data, monitors and recorded series.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;

use super::model::{RadialModel, RadialState};
use crate::error::{Error, Result};
use crate::geometry::{BallGrid, VectorField};
use crate::norms::{energy_functionals, BalanceSample, EnergyReport, EnergySample, Trajectory, Truncation};
use crate::params::{derive_constants, GasParams};
use crate::theta::log_grid;

/// Radial profile `ψ` of the initial perturbation `ω₀ = εψ(s)y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Family {
    /// `(1 - (s/r0)²)^power`.
    Polynomial { power: u32 },
    /// Smooth bump supported in `s < width · r0`.
    Bump { width: f64 },
}

impl Default for Family {
    fn default() -> Self {
        Family::Polynomial { power: 2 }
    }
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Polynomial { power } if power < 2 => Err(Error::param("family", "polynomial power must be at least 2")),
            Family::Bump { width } if !(width > 0.0 && width <= 1.0) => Err(Error::param("family", "bump width must lie in (0, 1]")),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, s: f64, r0: f64) -> f64 {
        let x = s / r0;
        match *self {
            Family::Polynomial { power } => (1.0 - x * x).max(0.0).powi(power as i32),
            Family::Bump { width } => {
                let z = x / width;
                if z < 1.0 {
                    (1.0 - 1.0 / (1.0 - z * z)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub gamma: f64,
    pub mass: f64,
    /// Radial nodes.
    pub resolution: usize,
    /// Angular nodes `(n_φ, n_ψ)` of the grid used for energy evaluation.
    pub energy_angular: (usize, usize),
    pub cfl: f64,
    /// Cap on the adaptive step.
    pub dt_max: f64,
    /// Fixed step; overrides the CFL rule when set.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub eps: f64,
    /// Initial velocity as a multiple of the displacement profile.
    pub velocity_ratio: f64,
    pub family: Family,
    /// Number of energy samples, log-spaced in `1+t`.
    pub energy_samples: usize,
    pub truncation: Truncation,
    /// Threshold `ε₀` of the a priori monitor.
    pub eps0: f64,
    pub max_steps: usize,
    /// Keep per-step balance integrals (needed for the energy identity check).
    pub record_balance: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gamma: 2.0,
            mass: 1.0,
            resolution: 64,
            energy_angular: (4, 8),
            cfl: 0.2,
            dt_max: 0.25,
            dt: None,
            t_end: 10.0,
            eps: 1e-3,
            velocity_ratio: 0.0,
            family: Family::default(),
            energy_samples: 40,
            truncation: Truncation::default(),
            eps0: 0.1,
            max_steps: 10_000_000,
            record_balance: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        GasParams::new(self.gamma, self.mass)?;
        if self.resolution < 16 {
            return Err(Error::param("resolution", "need at least 16 radial nodes"));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::param("eps", "amplitude must be finite and non-negative"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::param("t_end", "end time must be positive"));
        }
        if !(self.cfl > 0.0) || !(self.dt_max > 0.0) {
            return Err(Error::param("cfl", "step controls must be positive"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::param("dt", "fixed step must be positive"));
            }
        }
        if !(self.eps0 > 0.0) {
            return Err(Error::param("eps0", "monitor threshold must be positive"));
        }
        self.family.validate()
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    /// `𝓔 > ε₀²` or `(ln(1+t))² sup 𝓔 > ε₀²`.
    MonitorViolation,
    Degenerate,
    NonFinite,
    StepLimit,
}

impl StopReason {
    pub fn label(&self) -> &'static str {
        match self {
            StopReason::Completed => "completed",
            StopReason::MonitorViolation => "monitor_violation",
            StopReason::Degenerate => "degenerate",
            StopReason::NonFinite => "non_finite",
            StopReason::StepLimit => "step_limit",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Stored `f`, `f_t`, `f_tt` at one time, usable as an energy trajectory.
pub struct RadialSnapshot {
    pub t: f64,
    pub f: Vec<f64>,
    pub f_t: Vec<f64>,
    pub f_tt: Vec<f64>,
}

impl Trajectory for RadialSnapshot {
    fn max_time_derivative(&self) -> usize {
        2
    }

    fn time_derivative<'g>(&self, grid: &'g BallGrid, _t: f64, m: usize) -> Result<VectorField<'g>> {
        let prof = match m {
            0 => &self.f,
            1 => &self.f_t,
            2 => &self.f_tt,
            _ => return Err(Error::param("m", "time derivative not available")),
        };
        if grid.n_r != prof.len() {
            return Err(Error::Grid("energy grid must share the radial nodes".into()));
        }
        let values = (0..grid.len())
            .map(|idx| prof[grid.unindex(idx).0] * grid.positions()[idx])
            .collect();
        VectorField::from_values(grid, values)
    }
}

/// One row of the trajectory output.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub radius: f64,
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    pub v_add: f64,
    pub e_total: f64,
    pub physical_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub config: RunConfig,
    pub stop: StopReason,
    /// Error message accompanying an abnormal stop.
    pub stop_detail: Option<String>,
    pub steps: usize,
    pub rows: Vec<TrajectoryRow>,
    pub energy: EnergyReport,
    /// `(t, R(t))` after every step.
    pub boundary: Vec<(f64, f64)>,
    pub balance: Vec<BalanceSample>,
    /// Largest `‖f‖_∞` seen.
    pub max_f: f64,
    /// `sup_t 𝓔(t)` over the energy samples.
    pub sup_energy: f64,
    #[serde(skip)]
    pub final_state: Option<RadialState>,
}

impl RunOutput {
    /// Columns `t, R, E0, E1, E2, V_add, stop_reason`; the reason is filled
    /// on the last row only.
    pub fn write_trajectory_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "R", "E0", "E1", "E2", "V_add", "stop_reason"]).map_err(io)?;
        for (k, r) in self.rows.iter().enumerate() {
            let reason = if k + 1 == self.rows.len() { self.stop.label() } else { "" };
            let mut rec: Vec<String> = [r.t, r.radius, r.e0, r.e1, r.e2, r.v_add].iter().map(|x| format!("{x:.17e}")).collect();
            rec.push(reason.into());
            out.write_record(&rec).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn initial_state(model: &RadialModel, cfg: &RunConfig) -> RadialState {
    let r0 = model.consts.r0;
    let f: Vec<f64> = model.s.iter().map(|&s| cfg.eps * cfg.family.eval(s, r0)).collect();
    let f_t = f.iter().map(|v| cfg.velocity_ratio * v).collect();
    RadialState {
        t: 0.0,
        h: 0.0,
        h_t: 0.0,
        f,
        f_t,
    }
}

fn sample_energy(model: &RadialModel, grid: &BallGrid, st: &RadialState, trunc: &Truncation) -> Result<(EnergySample, Vec<String>)> {
    let rates = model.rates(st)?;
    let snap = RadialSnapshot {
        t: st.t,
        f: st.f.clone(),
        f_t: st.f_t.clone(),
        f_tt: rates.f_tt,
    };
    energy_functionals(&snap, grid, st.t, model.gamma(), trunc)
}

/// Evolves the configured perturbation to `t_end` or to the first stop.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let consts = derive_constants(&GasParams::new(cfg.gamma, cfg.mass)?, 1e-12)?;
    let model = RadialModel::new(&consts, cfg.resolution)?;
    let grid = BallGrid::new(&consts, cfg.resolution, cfg.energy_angular.0, cfg.energy_angular.1)?;
    let mut st = initial_state(&model, cfg);
    model.check_jacobian(&st.f)?;

    let targets = log_grid(cfg.t_end, cfg.energy_samples.max(2));
    let mut next_target = 0;
    let mut out = RunOutput {
        config: cfg.clone(),
        stop: StopReason::Completed,
        stop_detail: None,
        steps: 0,
        rows: Vec::new(),
        energy: EnergyReport::new(cfg.truncation),
        boundary: vec![(0.0, model.boundary_radius(&st))],
        balance: Vec::new(),
        max_f: st.f.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        sup_energy: 0.0,
        final_state: None,
    };
    if cfg.record_balance {
        out.balance.push(model.balance_sample(&st));
    }
    let tol = 1e-12 * cfg.t_end;

    loop {
        if next_target < targets.len() && st.t >= targets[next_target] - tol {
            while next_target < targets.len() && st.t >= targets[next_target] - tol {
                next_target += 1;
            }
            let (sample, notes) = sample_energy(&model, &grid, &st, &cfg.truncation)?;
            out.sup_energy = out.sup_energy.max(sample.e_total);
            out.rows.push(TrajectoryRow {
                t: st.t,
                radius: model.boundary_radius(&st),
                e0: sample.e_j.first().copied().unwrap_or(0.0),
                e1: sample.e_j.get(1).copied().unwrap_or(0.0),
                e2: sample.e_j.get(2).copied().unwrap_or(0.0),
                v_add: sample.v_add,
                e_total: sample.e_total,
                physical_mass: model.physical_mass(&st)?,
            });
            let e = sample.e_total;
            out.energy.push(sample, notes);
            let log_weight = (1.0 + st.t).ln().powi(2);
            let bound = cfg.eps0 * cfg.eps0;
            if e > bound || log_weight * out.sup_energy > bound {
                out.stop = StopReason::MonitorViolation;
                out.stop_detail = Some(format!("energy {e:.3e}, sup {:.3e} at t = {}", out.sup_energy, st.t));
                break;
            }
        }
        if st.t >= cfg.t_end - tol {
            break;
        }
        if out.steps >= cfg.max_steps {
            out.stop = StopReason::StepLimit;
            break;
        }
        let mut dt = cfg.dt.unwrap_or_else(|| model.cfl_step(&st, cfg.cfl).min(cfg.dt_max));
        if st.t + dt > cfg.t_end {
            dt = cfg.t_end - st.t;
        }
        match model.step(&st, dt) {
            Ok(next) => st = next,
            Err(Error::Degenerate { node, jacobian }) => {
                out.stop = StopReason::Degenerate;
                out.stop_detail = Some(format!("node {node}, J = {jacobian:.3e}"));
                break;
            }
            Err(Error::Integration { t, reason }) => {
                out.stop = StopReason::NonFinite;
                out.stop_detail = Some(format!("t = {t}: {reason}"));
                break;
            }
            Err(e) => return Err(e),
        }
        out.steps += 1;
        out.max_f = st.f.iter().fold(out.max_f, |m, v| m.max(v.abs()));
        out.boundary.push((st.t, model.boundary_radius(&st)));
        if cfg.record_balance {
            out.balance.push(model.balance_sample(&st));
        }
    }
    out.final_state = Some(st);
    Ok(out)
}
