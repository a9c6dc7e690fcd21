//! Spherically symmetric perturbations `ω = f(t, s) y` and their
//! semi-discrete equation of motion.
//!
//! The spatial scheme is variational: node masses and cell energies define a
//! discrete kinetic and potential energy, and the force is the exact gradient
//! of the potential. Cell Jacobians come from the displaced cell volumes, so
//! the potential telescopes for uniform dilations and the centre carries no
//! spurious force. The zeroth order energy identity holds exactly in
//! continuous time and only the time integrator perturbs it.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::BallGrid;
use crate::norms::BalanceSample;
use crate::params::BarenblattConstants;
use crate::quadrature::fd_weights;
use crate::theta::{h_rhs, nu, Forcing};

/// Perturbation and time correction at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialState {
    pub t: f64,
    pub h: f64,
    pub h_t: f64,
    pub f: Vec<f64>,
    pub f_t: Vec<f64>,
}

impl RadialState {
    pub fn theta(&self, gamma: f64) -> (f64, f64) {
        let v = nu(gamma, self.t, 1).expect("t ≥ 0 along a run");
        (v[0] + self.h, v[1] + self.h_t)
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.h_t.is_finite() && self.f.iter().chain(&self.f_t).all(|x| x.is_finite())
    }
}

/// Time derivatives of a state under the semi-discrete law.
#[derive(Debug, Clone)]
pub struct Rates {
    pub h_t: f64,
    pub h_tt: f64,
    pub f_t: Vec<f64>,
    pub f_tt: Vec<f64>,
}

/// `M₀` for `∂ω = F Id + G ŷŷᵀ`, written so that it stays accurate for
/// small `F`, `G`.
pub fn radial_m0(gamma: f64, f: f64, g: f64) -> f64 {
    let ln_j = 2.0 * f.ln_1p() + (f + g).ln_1p();
    ((1.0 - gamma) * ln_j).exp_m1() / (gamma - 1.0) + 3.0 * f + g
}

/// Strong-form residual pieces at every node.
#[derive(Debug, Clone, Serialize)]
pub struct Residual {
    /// `(1/s)[∂_s(σ^{ι+1}Φ_R) + (2/s)σ^{ι+1}(Φ_R - Φ_T)]`, the divergence
    /// term divided by `y`.
    pub spatial: Vec<f64>,
    /// Full residual of the perturbation equation divided by `θ`.
    pub total: Vec<f64>,
}

/// Radial line of the reference ball together with the discrete energy.
#[derive(Debug, Clone)]
pub struct RadialModel {
    pub consts: BarenblattConstants,
    pub line: BallGrid,
    pub n: usize,
    pub ds: f64,
    pub s: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `4π σ_i^ι ∫ s⁴ ds` over the dual cell `[iΔs, (i+1)Δs]`.
    pub mass: Vec<f64>,
    /// `s_p³`, with `s_{-1} = 0` stored first.
    cube: Vec<f64>,
    /// `σ^{ι+1}` at the middle of cell `p = [s_{p-1}, s_p]` times its volume.
    cell_w: Vec<f64>,
    /// Weights extrapolating a node profile to `s = r0`.
    edge: [f64; 4],
}

impl RadialModel {
    pub fn new(consts: &BarenblattConstants, n: usize) -> Result<Self> {
        let line = BallGrid::new(consts, n, 2, 4)?;
        let ds = line.ds;
        let s = line.s.clone();
        let iota = consts.iota;
        let sig = |x: f64| (consts.a_bar - consts.b_bar * x * x).max(0.0);
        let sigma: Vec<f64> = s.iter().map(|&x| sig(x)).collect();
        let mass = (0..n)
            .map(|i| {
                let (a, b) = (i as f64 * ds, (i + 1) as f64 * ds);
                4.0 * PI * sigma[i].powf(iota) * (b.powi(5) - a.powi(5)) / 5.0
            })
            .collect();
        let mut cube = vec![0.0];
        cube.extend(s.iter().map(|x| x.powi(3)));
        let cell_w = (0..n)
            .map(|p| {
                let lo = if p == 0 { 0.0 } else { s[p - 1] };
                let mid = 0.5 * (lo + s[p]);
                4.0 * PI * sig(mid).powf(iota + 1.0) * (cube[p + 1] - cube[p]) / 3.0
            })
            .collect();
        let xs: Vec<f64> = s[n - 4..].to_vec();
        let w = fd_weights(consts.r0, &xs, 0);
        Ok(RadialModel {
            consts: consts.clone(),
            line,
            n,
            ds,
            s,
            sigma,
            mass,
            cube,
            cell_w,
            edge: [w[0], w[1], w[2], w[3]],
        })
    }

    pub fn gamma(&self) -> f64 {
        self.consts.gamma
    }

    fn q(&self) -> f64 {
        1.0 / (3.0 * self.gamma() - 1.0)
    }

    /// `(J_p - 1, div_p)` of cell `p` from the volume it occupies after
    /// the displacement. Node `p - 1` is the centre when `p = 0`.
    fn cell_strain(&self, f: &[f64], p: usize) -> (f64, f64) {
        let grow = |x: f64| x * (3.0 + x * (3.0 + x));
        let (lo, hi) = (self.cube[p], self.cube[p + 1]);
        let f_lo = if p == 0 { 0.0 } else { f[p - 1] };
        let d = hi - lo;
        ((hi * grow(f[p]) - lo * grow(f_lo)) / d, 3.0 * (hi * f[p] - lo * f_lo) / d)
    }

    /// Rejects profiles with a non-positive cell Jacobian or tangential stretch.
    pub fn check_jacobian(&self, f: &[f64]) -> Result<()> {
        for p in 0..self.n {
            let (jm1, _) = self.cell_strain(f, p);
            if !(1.0 + f[p] > 0.0 && jm1 > -1.0) {
                return Err(Error::Degenerate {
                    node: p,
                    jacobian: 1.0 + jm1,
                });
            }
        }
        Ok(())
    }

    /// Discrete `∫σ^{ι+1}M₀`.
    pub fn potential(&self, f: &[f64]) -> f64 {
        let gamma = self.gamma();
        (0..self.n)
            .map(|p| {
                let (jm1, div) = self.cell_strain(f, p);
                self.cell_w[p] * (((1.0 - gamma) * jm1.ln_1p()).exp_m1() / (gamma - 1.0) + div)
            })
            .sum()
    }

    /// `∂W/∂f_i`.
    pub fn force(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_jacobian(f)?;
        let gamma = self.gamma();
        let mut out = vec![0.0; self.n];
        for p in 0..self.n {
            let (jm1, _) = self.cell_strain(f, p);
            let lj = -gamma * jm1.ln_1p();
            let scale = 3.0 * self.cell_w[p] / (self.cube[p + 1] - self.cube[p]);
            // ∂M₀/∂f = (3 s³/D)(1 - J^{-γ}(1+f)²) for the outer node, minus for the inner.
            out[p] -= scale * self.cube[p + 1] * (lj + 2.0 * f[p].ln_1p()).exp_m1();
            if p > 0 {
                out[p - 1] += scale * self.cube[p] * (lj + 2.0 * f[p - 1].ln_1p()).exp_m1();
            }
        }
        Ok(out)
    }

    /// Right-hand side of the joint system for `(h, h_t, f, f_t)`.
    pub fn rates(&self, st: &RadialState) -> Result<Rates> {
        let gamma = self.gamma();
        let [h_t, h_tt] = h_rhs(gamma, Forcing::Exact, st.t, &[st.h, st.h_t])?;
        let (theta, theta_t) = st.theta(gamma);
        let damping = 1.0 + 2.0 * theta_t / theta;
        let stiff = theta.powf(1.0 - 3.0 * gamma);
        let q = self.q();
        let force = self.force(&st.f)?;
        let f_tt = (0..self.n)
            .map(|i| -damping * st.f_t[i] - stiff * (q * st.f[i] + force[i] / self.mass[i]))
            .collect();
        Ok(Rates {
            h_t,
            h_tt,
            f_t: st.f_t.clone(),
            f_tt,
        })
    }

    /// One classical Runge–Kutta step.
    pub fn step(&self, st: &RadialState, dt: f64) -> Result<RadialState> {
        let advance = |base: &RadialState, k: &Rates, a: f64| RadialState {
            t: base.t + a,
            h: base.h + a * k.h_t,
            h_t: base.h_t + a * k.h_tt,
            f: base.f.iter().zip(&k.f_t).map(|(x, d)| x + a * d).collect(),
            f_t: base.f_t.iter().zip(&k.f_tt).map(|(x, d)| x + a * d).collect(),
        };
        let k1 = self.rates(st)?;
        let k2 = self.rates(&advance(st, &k1, 0.5 * dt))?;
        let k3 = self.rates(&advance(st, &k2, 0.5 * dt))?;
        let k4 = self.rates(&advance(st, &k3, dt))?;
        let comb = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
        let next = RadialState {
            t: st.t + dt,
            h: st.h + dt * comb(k1.h_t, k2.h_t, k3.h_t, k4.h_t),
            h_t: st.h_t + dt * comb(k1.h_tt, k2.h_tt, k3.h_tt, k4.h_tt),
            f: (0..self.n)
                .map(|i| st.f[i] + dt * comb(k1.f_t[i], k2.f_t[i], k3.f_t[i], k4.f_t[i]))
                .collect(),
            f_t: (0..self.n)
                .map(|i| st.f_t[i] + dt * comb(k1.f_tt[i], k2.f_tt[i], k3.f_tt[i], k4.f_tt[i]))
                .collect(),
        };
        if !next.is_finite() {
            return Err(Error::Integration {
                t: next.t,
                reason: "non-finite state".into(),
            });
        }
        Ok(next)
    }

    /// Largest stable step suggested by the sound speed at the centre.
    pub fn cfl_step(&self, st: &RadialState, cfl: f64) -> f64 {
        let gamma = self.gamma();
        let (theta, _) = st.theta(gamma);
        cfl * self.ds / (gamma * self.consts.a_bar * theta.powf(1.0 - 3.0 * gamma)).sqrt()
    }

    /// Integrals of the zeroth order energy identity for the discrete system.
    pub fn balance_sample(&self, st: &RadialState) -> BalanceSample {
        let gamma = self.gamma();
        let (theta, theta_t) = st.theta(gamma);
        let kin: f64 = self.mass.iter().zip(&st.f_t).map(|(m, v)| m * v * v).sum();
        let pot = 0.5 * self.q() * self.mass.iter().zip(&st.f).map(|(m, v)| m * v * v).sum::<f64>() + self.potential(&st.f);
        let stiff = theta.powf(1.0 - 3.0 * gamma);
        let stiff_t = (1.0 - 3.0 * gamma) * stiff * theta_t / theta;
        BalanceSample {
            t: st.t,
            bracket: 0.5 * kin + stiff * pot,
            dissipation: (1.0 + 2.0 * theta_t / theta) * kin,
            rhs: stiff_t * pot,
        }
    }

    /// `f` extrapolated to the vacuum boundary.
    pub fn edge_value(&self, f: &[f64]) -> f64 {
        self.edge.iter().zip(&f[self.n - 4..]).map(|(w, v)| w * v).sum()
    }

    /// Physical boundary radius `θ r0 (1 + f(r0⁻))`.
    pub fn boundary_radius(&self, st: &RadialState) -> f64 {
        let (theta, _) = st.theta(self.gamma());
        theta * self.consts.r0 * (1.0 + self.edge_value(&st.f))
    }

    /// `G = s ∂_s f` at the nodes, through the odd extension of `s f`.
    pub fn node_strain(&self, f: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = self.s.iter().zip(f).map(|(s, v)| s * v).collect();
        self.line.d_s_line(&g, true).iter().zip(f).map(|(d, v)| d - v).collect()
    }

    /// Strong form of the perturbation equation at the nodes, given an
    /// acceleration profile.
    pub fn reduce_equation(&self, st: &RadialState, f_tt: &[f64]) -> Result<Residual> {
        let gamma = self.gamma();
        let iota = self.consts.iota;
        let g = self.node_strain(&st.f);
        let mut a = Vec::with_capacity(self.n);
        let mut b = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let (ff, gg) = (st.f[i], g[i]);
            let jac = (1.0 + ff).powi(2) * (1.0 + ff + gg);
            if !(1.0 + ff > 0.0 && jac > 0.0) {
                return Err(Error::Degenerate { node: i, jacobian: jac });
            }
            let jp = jac.powf(1.0 - gamma);
            let w = self.sigma[i].powf(iota + 1.0);
            a.push(w * (jp / (1.0 + ff) - 1.0));
            b.push(w * (jp / (1.0 + ff + gg) - 1.0));
        }
        let db = self.line.d_s_line(&b, false);
        let spatial: Vec<f64> = (0..self.n)
            .map(|i| {
                let s = self.s[i];
                (db[i] + 2.0 * (b[i] - a[i]) / s) / s
            })
            .collect();
        let (theta, theta_t) = st.theta(gamma);
        let damping = 1.0 + 2.0 * theta_t / theta;
        let stiff = theta.powf(1.0 - 3.0 * gamma);
        let q = self.q();
        let total = (0..self.n)
            .map(|i| {
                let r = self.sigma[i].powf(iota);
                r * f_tt[i] + damping * r * st.f_t[i] + stiff * (q * r * st.f[i] + spatial[i])
            })
            .collect();
        Ok(Residual { spatial, total })
    }

    /// Mass recomputed in physical coordinates from `ϱ = ρ̄₀ 𝒥^{-1}`, with
    /// the trapezoidal rule on the moved nodes plus the centre and the edge.
    pub fn physical_mass(&self, st: &RadialState) -> Result<f64> {
        let gamma = self.gamma();
        let iota = self.consts.iota;
        let (theta, _) = st.theta(gamma);
        let g = self.node_strain(&st.f);
        let mut pts = vec![(0.0, 0.0)];
        for i in 0..self.n {
            let jac = (1.0 + st.f[i]).powi(2) * (1.0 + st.f[i] + g[i]);
            if !(jac > 0.0) {
                return Err(Error::Degenerate { node: i, jacobian: jac });
            }
            let r = theta * self.s[i] * (1.0 + st.f[i]);
            let rho = self.sigma[i].powf(iota) / (theta.powi(3) * jac);
            pts.push((r, 4.0 * PI * r * r * rho));
        }
        pts.push((self.boundary_radius(st), 0.0));
        Ok(pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
    }
}
