//! Weighted energy, dissipation and curl functionals on trajectories.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;

use super::m0::m0_e0_point;
use crate::error::{Error, Result};
use crate::geometry::{curl_of, multi_indices, BallGrid, DeformationState, VectorField};

/// Source of `∂_t^m ω` on a grid.
pub trait Trajectory {
    /// Highest time derivative the trajectory can supply.
    fn max_time_derivative(&self) -> usize;
    fn time_derivative<'g>(&self, grid: &'g BallGrid, t: f64, m: usize) -> Result<VectorField<'g>>;
}

/// Trajectory given by a closure `(t, y, m) ↦ ∂_t^m ω(t, y)`.
pub struct FnTrajectory<F> {
    pub f: F,
    pub max_m: usize,
}

impl<F> Trajectory for FnTrajectory<F>
where
    F: Fn(f64, &Vector3<f64>, usize) -> Vector3<f64>,
{
    fn max_time_derivative(&self) -> usize {
        self.max_m
    }

    fn time_derivative<'g>(&self, grid: &'g BallGrid, t: f64, m: usize) -> Result<VectorField<'g>> {
        if m > self.max_m {
            return Err(Error::param("m", "time derivative not available"));
        }
        VectorField::from_values(grid, grid.positions().iter().map(|y| (self.f)(t, y, m)).collect())
    }
}

/// Retained derivative orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Truncation {
    pub j_max: usize,
    /// Largest `m` in `∂_t^m`.
    pub max_time: usize,
    /// Largest `n + l`.
    pub max_space: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            j_max: 2,
            max_time: 2,
            max_space: 2,
        }
    }
}

/// Caches `∂^α ∂̄^β X` for one base field. Operators apply right to left.
struct DerivativeCache<'g> {
    grid: &'g BallGrid,
    map: HashMap<(Vec<usize>, Vec<usize>), Vec<Vector3<f64>>>,
}

impl<'g> DerivativeCache<'g> {
    fn new(base: &VectorField<'g>) -> Self {
        let mut map = HashMap::new();
        map.insert((vec![], vec![]), base.values.clone());
        DerivativeCache { grid: base.grid(), map }
    }

    fn get(&mut self, alpha: &[usize], beta: &[usize]) -> &[Vector3<f64>] {
        let key = (alpha.to_vec(), beta.to_vec());
        if !self.map.contains_key(&key) {
            if !alpha.is_empty() {
                let rest = &alpha[1..];
                let jac = self.jacobian(rest, beta);
                for d in 0..3 {
                    let mut a = vec![d];
                    a.extend_from_slice(rest);
                    let vals = jac.iter().map(|m| m.column(d).into_owned()).collect();
                    self.map.entry((a, beta.to_vec())).or_insert(vals);
                }
            } else {
                let (_, rest) = beta.split_first().expect("non-empty key");
                let inner = self.get(&[], rest).to_vec();
                let mut parts = [vec![], vec![], vec![]];
                for c in 0..3 {
                    let comp: Vec<f64> = inner.iter().map(|v| v[c]).collect();
                    parts[c] = self.grid.angular(&comp);
                }
                for d in 0..3 {
                    let vals = (0..inner.len())
                        .map(|n| Vector3::new(parts[0][n][d], parts[1][n][d], parts[2][n][d]))
                        .collect();
                    let mut b = vec![d];
                    b.extend_from_slice(rest);
                    self.map.entry((vec![], b)).or_insert(vals);
                }
            }
        }
        &self.map[&key]
    }

    /// `[∂_k (∂^α ∂̄^β X)^i]`.
    fn jacobian(&mut self, alpha: &[usize], beta: &[usize]) -> Vec<Matrix3<f64>> {
        let vals = self.get(alpha, beta).to_vec();
        self.grid.jacobian(&vals)
    }
}

fn weighted(grid: &BallGrid, k: f64, f: impl Fn(usize) -> f64) -> f64 {
    (0..grid.len()).map(|n| grid.weights[n] * grid.sigma[n].powf(k) * f(n)).sum()
}

/// Contributions of one `(m, n, l)` triple.
#[derive(Debug, Clone, Serialize)]
pub struct TermBreakdown {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    /// `𝓔` summand.
    pub script_e: f64,
    pub frak_e_i: f64,
    pub frak_e_ii: f64,
    pub frak_d: f64,
    pub frak_v: f64,
    pub script_v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergySample {
    pub t: f64,
    /// `𝓔_j`, `j ≤ j_max`.
    pub e_j: Vec<f64>,
    pub e_total: f64,
    pub frak_e: Vec<f64>,
    pub frak_d: Vec<f64>,
    pub frak_v: Vec<f64>,
    pub script_v: Vec<f64>,
    pub v_add: f64,
    /// `∫ σ^{ι+1} M₀`.
    pub m0_integral: f64,
    /// `‖σ^{(ι+1)/2} curl ω‖²`.
    pub curl_l2: f64,
    pub terms: Vec<TermBreakdown>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub truncation: Truncation,
    /// One line per dropped term; empty when nothing was truncated.
    pub truncation_notes: Vec<String>,
    pub samples: Vec<EnergySample>,
}

/// Evaluates every functional at time `t`, returning the sample and the
/// notes about truncated terms.
pub fn energy_functionals(
    traj: &dyn Trajectory,
    grid: &BallGrid,
    t: f64,
    gamma: f64,
    trunc: &Truncation,
) -> Result<(EnergySample, Vec<String>)> {
    let iota = grid.iota;
    if !(iota > 0.0) {
        return Err(Error::Precondition("energy functionals need a Barenblatt grid".into()));
    }
    let mut notes = Vec::new();
    let avail = traj.max_time_derivative().min(trunc.max_time + 1);
    let mut fields = Vec::new();
    for m in 0..=avail {
        fields.push(traj.time_derivative(grid, t, m)?);
    }
    let state = DeformationState::new(fields[0].clone())?;
    let mut caches: Vec<DerivativeCache> = fields.iter().map(DerivativeCache::new).collect();
    let mut curl_caches: Vec<DerivativeCache> = fields
        .iter()
        .map(|f| VectorField::from_values(grid, f.curl().values).map(|c| DerivativeCache::new(&c)))
        .collect::<Result<_>>()?;
    let mut flow_curl_caches: Vec<Option<DerivativeCache>> = (0..fields.len()).map(|_| None).collect();

    let tau = 1.0 + t;
    let j_max = trunc.j_max;
    let mut sample = EnergySample {
        t,
        e_j: vec![0.0; j_max + 1],
        e_total: 0.0,
        frak_e: vec![0.0; j_max + 1],
        frak_d: vec![0.0; j_max + 1],
        frak_v: vec![0.0; j_max + 1],
        script_v: vec![0.0; j_max + 1],
        v_add: 0.0,
        m0_integral: 0.0,
        curl_l2: 0.0,
        terms: Vec::new(),
    };

    for j in 0..=j_max {
        for m in 0..=j {
            for n in 0..=(j - m) {
                let l = j - m - n;
                if m > trunc.max_time || n + l > trunc.max_space {
                    notes.push(format!("(m,n,l)=({m},{n},{l}) dropped: beyond retained orders"));
                    continue;
                }
                if m >= fields.len() {
                    notes.push(format!("(m,n,l)=({m},{n},{l}) dropped: ∂_t^{m} unavailable"));
                    continue;
                }
                let kn = iota + n as f64;
                let mut term = TermBreakdown {
                    m,
                    n,
                    l,
                    script_e: 0.0,
                    frak_e_i: 0.0,
                    frak_e_ii: 0.0,
                    frak_d: 0.0,
                    frak_v: 0.0,
                    script_v: 0.0,
                };
                let has_rate = m + 1 < fields.len();
                if !has_rate {
                    notes.push(format!("(m,n,l)=({m},{n},{l}) rate term dropped: ∂_t^{} unavailable", m + 1));
                }
                for beta in multi_indices(l) {
                    for alpha in multi_indices(n) {
                        let rate_sq = if has_rate {
                            let v = caches[m + 1].get(&alpha, &beta).to_vec();
                            weighted(grid, kn, |i| v[i].norm_squared())
                        } else {
                            0.0
                        };
                        let x = caches[m].get(&alpha, &beta).to_vec();
                        let jac = caches[m].jacobian(&alpha, &beta);
                        let val_sq = weighted(grid, kn, |i| x[i].norm_squared());
                        let flow: Vec<Matrix3<f64>> = jac.iter().zip(&state.a_inv).map(|(d, a)| d * a).collect();
                        let fgrad_sq = weighted(grid, kn + 1.0, |i| flow[i].norm_squared());
                        let fdiv_sq = weighted(grid, kn + 1.0, |i| flow[i].trace().powi(2));
                        let fcurl_sq = weighted(grid, kn + 1.0, |i| curl_of(&flow[i]).norm_squared());
                        let flat_curl_sq = weighted(grid, kn + 1.0, |i| curl_of(&jac[i]).norm_squared());
                        let c = curl_caches[m].get(&alpha, &beta).to_vec();
                        let curl_after_sq = weighted(grid, kn + 1.0, |i| c[i].norm_squared());

                        let w_rate = tau.powi(2 * m as i32 + 1);
                        let w = tau.powi(2 * m as i32);
                        term.script_e += w_rate * rate_sq + w * val_sq;
                        term.frak_e_i += w_rate * rate_sq;
                        term.frak_e_ii += w * (val_sq + fgrad_sq + fdiv_sq / iota);
                        term.frak_v += w * fcurl_sq;
                        term.script_v += w * flat_curl_sq.min(curl_after_sq);
                    }
                }
                for beta in multi_indices(l) {
                    for alpha in multi_indices(n + 1) {
                        let x = caches[m].get(&alpha, &beta).to_vec();
                        term.script_e += tau.powi(2 * m as i32) * weighted(grid, kn + 1.0, |i| x[i].norm_squared());
                    }
                }
                term.frak_d = term.frak_e_i + term.frak_e_ii / tau;
                sample.e_j[j] += term.script_e;
                sample.frak_e[j] += term.frak_e_i + term.frak_e_ii;
                sample.frak_d[j] += term.frak_d;
                sample.frak_v[j] += term.frak_v;
                sample.script_v[j] += term.script_v;
                sample.terms.push(term);
            }
        }
    }
    sample.e_total = sample.e_j.iter().sum();

    // 𝔙_add: derivatives applied after curl_η ∂_t^m ω, m ≤ 1.
    for m in 0..=1usize.min(fields.len() - 1) {
        if flow_curl_caches[m].is_none() {
            let jac = caches[m].jacobian(&[], &[]);
            let curl: Vec<Vector3<f64>> = jac.iter().zip(&state.a_inv).map(|(d, a)| curl_of(&(d * a))).collect();
            flow_curl_caches[m] = Some(DerivativeCache::new(&VectorField::from_values(grid, curl)?));
        }
        let cache = flow_curl_caches[m].as_mut().expect("just filled");
        for s in 0..=trunc.max_space {
            for n in 0..=s {
                let l = s - n;
                for beta in multi_indices(l) {
                    for alpha in multi_indices(n) {
                        let v = cache.get(&alpha, &beta).to_vec();
                        sample.v_add +=
                            tau.powi(2 * m as i32) * weighted(grid, iota + n as f64 + 1.0, |i| v[i].norm_squared());
                    }
                }
            }
        }
    }
    if fields.len() < 2 {
        notes.push("V_add: m = 1 dropped, ∂_t ω unavailable".into());
    }

    let grads = &state.grad_omega.values;
    sample.m0_integral = weighted(grid, iota + 1.0, |i| m0_e0_point(&grads[i], gamma).m0);
    sample.curl_l2 = weighted(grid, iota + 1.0, |i| curl_of(&grads[i]).norm_squared());
    Ok((sample, notes))
}

/// `𝓔_j(t)` alone.
pub fn energy_ej(traj: &dyn Trajectory, grid: &BallGrid, t: f64, j: usize, gamma: f64, trunc: &Truncation) -> Result<(f64, Vec<String>)> {
    if j > trunc.j_max {
        return Err(Error::param("j", "order exceeds the retained maximum"));
    }
    let (s, notes) = energy_functionals(traj, grid, t, gamma, trunc)?;
    Ok((s.e_j[j], notes))
}

impl EnergyReport {
    pub fn new(truncation: Truncation) -> Self {
        EnergyReport {
            truncation,
            truncation_notes: Vec::new(),
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: EnergySample, notes: Vec<String>) {
        for n in notes {
            if !self.truncation_notes.contains(&n) {
                self.truncation_notes.push(n);
            }
        }
        self.samples.push(sample);
    }

    /// Evaluates the functionals at each time in `times`.
    pub fn collect(traj: &dyn Trajectory, grid: &BallGrid, times: &[f64], gamma: f64, trunc: Truncation) -> Result<Self> {
        let mut rep = EnergyReport::new(trunc);
        for &t in times {
            let (s, notes) = energy_functionals(traj, grid, t, gamma, &trunc)?;
            rep.push(s, notes);
        }
        Ok(rep)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        let jm = self.truncation.j_max;
        let mut header = vec!["t".to_string()];
        for name in ["E", "frakE", "frakD", "frakV", "scriptV"] {
            header.extend((0..=jm).map(|j| format!("{name}_{j}")));
        }
        header.extend(["E_total", "V_add", "M0_integral", "curl_l2", "truncated"].map(String::from));
        out.write_record(&header).map_err(io)?;
        let truncated = if self.truncation_notes.is_empty() { "no" } else { "yes" };
        for s in &self.samples {
            let mut row = vec![format!("{:.17e}", s.t)];
            for v in [&s.e_j, &s.frak_e, &s.frak_d, &s.frak_v, &s.script_v] {
                row.extend(v.iter().map(|x| format!("{x:.17e}")));
            }
            row.extend([s.e_total, s.v_add, s.m0_integral, s.curl_l2].map(|x| format!("{x:.17e}")));
            row.push(truncated.into());
            out.write_record(&row).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}
