//! Dormand–Prince 5(4) integrator with step control and exact output times.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-10,
            h_init: 1e-4,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

/// States at the requested output times plus step statistics.
#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    /// Sum over accepted steps of the embedded local error estimate, per component.
    pub error_sum: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Dopri5 {
            rtol,
            atol,
            ..Default::default()
        }
    }

    /// Integrates `y' = rhs(t, y)` from `(t0, y0)`, landing exactly on each
    /// entry of `outputs` (which must be sorted and `≥ t0`).
    pub fn integrate<const N: usize, F>(&self, mut rhs: F, t0: f64, y0: [f64; N], outputs: &[f64]) -> Result<OdeSolution<N>>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
            return Err(Error::param("outputs", "output times must be sorted and not precede t0"));
        }
        let mut sol = OdeSolution {
            times: Vec::with_capacity(outputs.len()),
            states: Vec::with_capacity(outputs.len()),
            error_sum: [0.0; N],
            accepted: 0,
            rejected: 0,
        };
        let mut t = t0;
        let mut y = y0;
        let mut h = self.h_init;
        let mut k = [[0.0; N]; 7];
        k[0] = rhs(t, &y)?;
        for &target in outputs {
            while t < target {
                if sol.accepted + sol.rejected >= self.max_steps {
                    return Err(Error::Integration {
                        t,
                        reason: "step budget exhausted".into(),
                    });
                }
                let last = target - t <= h;
                let step = if last { target - t } else { h.min(self.h_max) };
                for s in 1..7 {
                    let mut ys = y;
                    for (i, v) in ys.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for j in 0..s {
                            acc += A[s][j] * k[j][i];
                        }
                        *v += step * acc;
                    }
                    k[s] = rhs(t + C[s] * step, &ys)?;
                }
                let mut y_new = y;
                for (i, v) in y_new.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..6 {
                        acc += A[6][j] * k[j][i];
                    }
                    *v += step * acc;
                }
                let mut err_vec = [0.0; N];
                let mut norm = 0.0;
                for i in 0..N {
                    let mut e = 0.0;
                    for j in 0..7 {
                        e += E[j] * k[j][i];
                    }
                    e *= step;
                    err_vec[i] = e.abs();
                    let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                    norm += (e / scale).powi(2);
                }
                let norm = (norm / N as f64).sqrt();
                if !norm.is_finite() {
                    return Err(Error::Integration {
                        t,
                        reason: "non-finite error estimate".into(),
                    });
                }
                let factor = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                if norm <= 1.0 {
                    t = if last { target } else { t + step };
                    y = y_new;
                    k[0] = k[6];
                    for i in 0..N {
                        sol.error_sum[i] += err_vec[i];
                    }
                    sol.accepted += 1;
                    if !last {
                        h = step * factor;
                    } else {
                        h = h.max(step * factor);
                    }
                } else {
                    sol.rejected += 1;
                    h = step * factor.min(1.0);
                }
                if h < self.h_min {
                    return Err(Error::Integration {
                        t,
                        reason: format!("step size underflow (h = {h:.3e})"),
                    });
                }
            }
            sol.times.push(t);
            sol.states.push(y);
        }
        Ok(sol)
    }
}
