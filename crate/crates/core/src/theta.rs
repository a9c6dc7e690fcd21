//! The time correction `θ = ν + h` and Liu's particular solutions.
//!
//! `θ` solves `θ'' + θ' = q θ^{2-3γ}` with `q = 1/(3γ-1)` and `θ(0) = 1`,
//! `θ'(0) = q`. It is integrated through `h = θ - ν`, where
//! `ν(t) = (1+t)^q` is the uncorrected scaling.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ode::Dopri5;
use crate::params::BarenblattConstants;

/// Highest derivative order reconstructed from the ODE.
pub const MAX_DERIVATIVE: usize = 4;

fn q_of(gamma: f64) -> f64 {
    1.0 / (3.0 * gamma - 1.0)
}

/// `ν` and its first `n` derivatives at `t`.
pub fn nu(gamma: f64, t: f64, n: usize) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::param("t", "time must be non-negative"));
    }
    let q = q_of(gamma);
    let mut out = Vec::with_capacity(n + 1);
    let mut coef = 1.0;
    for k in 0..=n {
        out.push(coef * (1.0 + t).powf(q - k as f64));
        coef *= q - k as f64;
    }
    Ok(out)
}

/// Whether the `ν` forcing in the `h` equation is kept. Dropping it leaves
/// `h ≡ 0` as the exact solution, which is useful as an integrator check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Forcing {
    #[default]
    Exact,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Number of log-spaced samples in `1+t`, including `t = 0`.
    pub samples: usize,
    pub forcing: Forcing,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        ThetaOptions {
            rtol: 1e-10,
            atol: 1e-10,
            samples: 400,
            forcing: Forcing::Exact,
        }
    }
}

/// Samples of `h` and `θ` on a log-spaced grid.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaPath {
    pub gamma: f64,
    pub times: Vec<f64>,
    pub h: Vec<f64>,
    pub h_t: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_t: Vec<f64>,
    pub theta_tt: Vec<f64>,
    /// Accumulated local error estimate of `h` at the final time.
    pub error_estimate: f64,
}

/// Times `(1+T)^{i/(n-1)} - 1`, `i < n`.
pub fn log_grid(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let l = (1.0 + t_end).ln();
    let mut out: Vec<f64> = (0..n).map(|i| (l * i as f64 / (n - 1) as f64).exp() - 1.0).collect();
    out[0] = 0.0;
    out[n - 1] = t_end;
    out
}

/// `θ'' = q θ^{2-3γ} - θ'`.
pub fn theta_accel(gamma: f64, theta: f64, theta_t: f64) -> f64 {
    q_of(gamma) * theta.powf(2.0 - 3.0 * gamma) - theta_t
}

/// `θ^{(k)}` for `k ≤ 4`, obtained by differentiating the ODE.
pub fn theta_derivatives(gamma: f64, theta: f64, theta_t: f64) -> [f64; MAX_DERIVATIVE + 1] {
    let q = q_of(gamma);
    let p = 2.0 - 3.0 * gamma;
    let d2 = q * theta.powf(p) - theta_t;
    let d3 = q * p * theta.powf(p - 1.0) * theta_t - d2;
    let d4 = q * p * ((p - 1.0) * theta.powf(p - 2.0) * theta_t * theta_t + theta.powf(p - 1.0) * d2) - d3;
    [theta, theta_t, d2, d3, d4]
}

/// Right-hand side of the first-order system for `(h, h_t)`.
pub(crate) fn h_rhs(gamma: f64, forcing: Forcing, t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
    let q = q_of(gamma);
    let p = 2.0 - 3.0 * gamma;
    let v = (1.0 + t).powf(q);
    let theta = v + y[0];
    if !(theta > 0.0) {
        return Err(Error::Integration {
            t,
            reason: format!("theta reached {theta:.6e}"),
        });
    }
    let base = match forcing {
        Forcing::Exact => q * v.powf(p) - q * (q - 1.0) * (1.0 + t).powf(q - 2.0) - q * (1.0 + t).powf(q - 1.0),
        Forcing::Zero => 0.0,
    };
    Ok([y[1], -y[1] + q * (theta.powf(p) - v.powf(p)) + base])
}

pub fn integrate_h(gamma: f64, t_end: f64, opts: &ThetaOptions) -> Result<ThetaPath> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::param("t_end", "end time must be positive"));
    }
    if !(gamma > 1.0) {
        return Err(Error::param("gamma", "gamma must exceed 1"));
    }
    let q = q_of(gamma);
    let p = 2.0 - 3.0 * gamma;
    let forcing = opts.forcing;
    let rhs = |t: f64, y: &[f64; 2]| h_rhs(gamma, forcing, t, y);
    let times = log_grid(t_end, opts.samples);
    let ode = Dopri5::with_tolerances(opts.rtol, opts.atol);
    let sol = ode.integrate(rhs, 0.0, [0.0, 0.0], &times)?;

    let n = times.len();
    let mut path = ThetaPath {
        gamma,
        times,
        h: Vec::with_capacity(n),
        h_t: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
        theta_t: Vec::with_capacity(n),
        theta_tt: Vec::with_capacity(n),
        error_estimate: sol.error_sum[0],
    };
    for (t, y) in path.times.iter().zip(&sol.states) {
        let v = (1.0 + t).powf(q);
        let vt = q * (1.0 + t).powf(q - 1.0);
        let vtt = q * (q - 1.0) * (1.0 + t).powf(q - 2.0);
        let theta = v + y[0];
        let theta_t = vt + y[1];
        path.h.push(y[0]);
        path.h_t.push(y[1]);
        path.theta.push(theta);
        path.theta_t.push(theta_t);
        path.theta_tt.push(match forcing {
            Forcing::Exact => theta_accel(gamma, theta, theta_t),
            // Without forcing h'' is integrated on its own; add ν''.
            Forcing::Zero => vtt - y[1] + q * (theta.powf(p) - v.powf(p)),
        });
    }
    Ok(path)
}

impl ThetaPath {
    /// Cubic Hermite interpolation of `(θ, θ_t)` with `θ_tt` from the ODE.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        let last = *self.times.last().expect("path is never empty");
        if !(0.0..=last).contains(&t) {
            return Err(Error::param("t", format!("outside [0, {last}]")));
        }
        let i = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return Ok((self.theta[i], self.theta_t[i], self.theta_tt[i])),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let dt = t1 - t0;
        let s = (t - t0) / dt;
        let (y0, y1) = (self.theta[i], self.theta[i + 1]);
        let (m0, m1) = (self.theta_t[i] * dt, self.theta_t[i + 1] * dt);
        let s2 = s * s;
        let s3 = s2 * s;
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        let yt = ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * y1 + (3.0 * s2 - 2.0 * s) * m1) / dt;
        Ok((y, yt, theta_accel(self.gamma, y, yt)))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["t", "h", "h_t", "theta", "theta_t", "theta_tt"]).map_err(io)?;
        for i in 0..self.times.len() {
            out.write_record(
                [self.times[i], self.h[i], self.h_t[i], self.theta[i], self.theta_t[i], self.theta_tt[i]]
                    .map(|v| format!("{v:.17e}")),
            )
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Fitted constants and signed margins of the decay bounds.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub gamma: f64,
    /// Smallest `K` with `θ ≤ K (1+t)^q` on the samples.
    pub k_fit: f64,
    /// `c_fit[k]` is the smallest `C` with `|θ^{(k)}| ≤ C (1+t)^{q-k}`, `k ≤ n`.
    pub c_fit: Vec<f64>,
    /// `max((1+t)^q - θ)`; non-positive when the lower bound holds.
    pub lower_violation: f64,
    /// `max(-θ_t)`; non-positive when θ is non-decreasing.
    pub monotone_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn verify_decay(path: &ThetaPath, n: usize, tolerance: f64) -> Result<DecayReport> {
    if n > MAX_DERIVATIVE {
        return Err(Error::param("n", format!("derivative order above {MAX_DERIVATIVE} is not supported")));
    }
    if path.times.len() < 2 {
        return Err(Error::Precondition("path needs at least two samples".into()));
    }
    let q = q_of(path.gamma);
    let mut c_fit = vec![0.0f64; n + 1];
    let mut lower = f64::NEG_INFINITY;
    let mut mono = f64::NEG_INFINITY;
    for i in 0..path.times.len() {
        let t = path.times[i];
        let d = theta_derivatives(path.gamma, path.theta[i], path.theta_t[i]);
        for (k, c) in c_fit.iter_mut().enumerate() {
            *c = c.max(d[k].abs() / (1.0 + t).powf(q - k as f64));
        }
        lower = lower.max((1.0 + t).powf(q) - path.theta[i]);
        mono = mono.max(-path.theta_t[i]);
    }
    let k_fit = c_fit[0];
    let finite = c_fit.iter().all(|c| c.is_finite());
    Ok(DecayReport {
        gamma: path.gamma,
        k_fit,
        c_fit,
        lower_violation: lower,
        monotone_violation: mono,
        tolerance,
        pass: finite && lower <= tolerance && mono <= tolerance,
    })
}

/// Coefficients of `c² = e - b r²`, `u = a r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiuState {
    pub a: f64,
    pub b: f64,
    pub e: f64,
}

impl LiuState {
    fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.e]
    }

    fn from_array(y: [f64; 3]) -> Self {
        LiuState { a: y[0], b: y[1], e: y[2] }
    }
}

pub fn liu_rhs(gamma: f64, s: &LiuState) -> LiuState {
    LiuState {
        a: -s.a - s.a * s.a + 2.0 * s.b / (gamma - 1.0),
        b: -(3.0 * gamma - 1.0) * s.a * s.b,
        e: -3.0 * (gamma - 1.0) * s.a * s.e,
    }
}

/// Liu coefficients of the Barenblatt solution.
pub fn liu_barenblatt(c: &BarenblattConstants, t: f64) -> LiuState {
    let g = c.gamma;
    let q = q_of(g);
    LiuState {
        a: q / (1.0 + t),
        b: g * c.b_bar / (1.0 + t),
        e: g * c.a_bar * (1.0 + t).powf(-3.0 * (g - 1.0) * q),
    }
}

/// Mass carried by `c² = e - b r²` on its support.
pub fn liu_mass(c: &BarenblattConstants, s: &LiuState) -> f64 {
    4.0 * std::f64::consts::PI * c.gamma.powf(-c.iota) * s.e.powf(c.iota + 1.5) * s.b.powf(-1.5) * c.moment
}

/// Barenblatt `a`-equation defect `ā' + ā² + ā - 2b̄/(γ-1) = q(q-1)/(1+t)²`.
pub fn barenblatt_a_defect(gamma: f64, t: f64) -> f64 {
    let q = q_of(gamma);
    q * (q - 1.0) / (1.0 + t).powi(2)
}

#[derive(Debug, Clone, Serialize)]
pub struct LiuDeviation {
    pub times: Vec<f64>,
    /// Largest relative deviation over `(a, b, e)`, scaled by `(1+t)/ln(2+t)`.
    pub scaled_deviation: Vec<f64>,
    pub mass: Vec<f64>,
    /// Slope of `ln(scaled_deviation)` against `ln t` over the last decade.
    pub last_decade_slope: f64,
    /// Supremum of the scaled deviation for `t ≥ 1`.
    pub bound_constant: f64,
    pub max_mass_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiuOptions {
    pub rtol: f64,
    pub atol: f64,
    pub samples: usize,
}

impl Default for LiuOptions {
    fn default() -> Self {
        // The components decay like powers of t, so the absolute floor is tiny.
        LiuOptions {
            rtol: 1e-10,
            atol: 1e-20,
            samples: 600,
        }
    }
}

pub fn liu_vs_barenblatt(c: &BarenblattConstants, init: LiuState, t_end: f64, opts: &LiuOptions) -> Result<LiuDeviation> {
    if !(init.b > 0.0 && init.e > 0.0) {
        return Err(Error::Precondition("Liu data needs b > 0 and e > 0".into()));
    }
    if !(t_end > 10.0) {
        return Err(Error::param("t_end", "end time must exceed 10"));
    }
    let gamma = c.gamma;
    let rhs = |t: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
        if !(y[1] > 0.0 && y[2] > 0.0) {
            return Err(Error::Integration {
                t,
                reason: "b or e left the admissible cone".into(),
            });
        }
        Ok(liu_rhs(gamma, &LiuState::from_array(*y)).to_array())
    };
    let times = log_grid(t_end, opts.samples);
    let sol = Dopri5::with_tolerances(opts.rtol, opts.atol).integrate(rhs, 0.0, init.to_array(), &times)?;

    let m0 = liu_mass(c, &init);
    let mut dev = Vec::with_capacity(times.len());
    let mut mass = Vec::with_capacity(times.len());
    let mut drift = 0.0f64;
    let mut bound = 0.0f64;
    for (&t, y) in times.iter().zip(&sol.states) {
        let s = LiuState::from_array(*y);
        let bar = liu_barenblatt(c, t);
        let rel = (s.a / bar.a - 1.0)
            .abs()
            .max((s.b / bar.b - 1.0).abs())
            .max((s.e / bar.e - 1.0).abs());
        let scaled = rel * (1.0 + t) / (2.0 + t).ln();
        if t >= 1.0 {
            bound = bound.max(scaled);
        }
        dev.push(scaled);
        let m = liu_mass(c, &s);
        drift = drift.max((m / m0 - 1.0).abs());
        mass.push(m);
    }
    let slope = log_log_slope(&times, &dev, t_end / 10.0);
    Ok(LiuDeviation {
        times,
        scaled_deviation: dev,
        mass,
        last_decade_slope: slope,
        bound_constant: bound,
        max_mass_drift: drift,
    })
}

/// Least-squares slope of `ln y` against `ln t` over samples with `t ≥ t_min`.
pub fn log_log_slope(t: &[f64], y: &[f64], t_min: f64) -> f64 {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(&t, &y)| t >= t_min && y > 0.0)
        .map(|(&t, &y)| (t.ln(), y.ln()))
        .collect();
    least_squares_slope(&pts)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
