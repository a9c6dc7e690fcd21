//! Pointwise and differential identities of the flow-map calculus, checked
//! on the discrete fields.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::deformation::{flow_ops, flow_ops_from_jacobian, DeformationState};
use super::field::{ScalarField, VectorField};
use super::grid::BallGrid;
use crate::error::{Error, Result};

/// A vector field given in closed form together with its time derivative.
pub trait AnalyticFamily {
    fn value(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64>;
    fn rate(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64>;
}

/// Family built from a pair of closures `(value, rate)`.
pub struct FnFamily<V, R>(pub V, pub R);

impl<V, R> AnalyticFamily for FnFamily<V, R>
where
    V: Fn(f64, &Vector3<f64>) -> Vector3<f64>,
    R: Fn(f64, &Vector3<f64>) -> Vector3<f64>,
{
    fn value(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64> {
        (self.0)(t, y)
    }
    fn rate(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64> {
        (self.1)(t, y)
    }
}

/// `max |tr(G²) - (|G|² - |curl_η F|²)|` with `G = ∇_η F`.
pub fn nab_defect(state: &DeformationState<'_>, f: &VectorField<'_>) -> f64 {
    let ops = flow_ops(state, f);
    ops.grad
        .iter()
        .zip(&ops.curl)
        .map(|(g, c)| ((g * g).trace() - (g.norm_squared() - c.norm_squared())).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NabDefects {
    pub nab: f64,
    pub nabt: f64,
}

fn sample<'g>(grid: &'g BallGrid, fam: &dyn AnalyticFamily, t: f64, rate: bool) -> VectorField<'g> {
    VectorField::from_fn(grid, |y| if rate { fam.rate(t, y) } else { fam.value(t, y) })
}

/// Both sides of the time-differentiated identity
/// `tr(G ∇_η ∂_tF) = ½ ∂_t(|G|² - |curl_η F|²) + tr(G ∇_η∂_tω G)`
/// and the undifferentiated one at time `t`. Time derivatives of the data are
/// exact; the `∂_t` on the right is a fourth-order centred difference with
/// step `dt`.
pub fn identity_nabt_nab(
    grid: &BallGrid,
    omega: &dyn AnalyticFamily,
    f: &dyn AnalyticFamily,
    t: f64,
    dt: f64,
) -> Result<NabDefects> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "time step must be positive"));
    }
    let quad = |tt: f64| -> Result<Vec<f64>> {
        let st = DeformationState::new(sample(grid, omega, tt, false))?;
        let ops = flow_ops(&st, &sample(grid, f, tt, false));
        Ok(ops
            .grad
            .iter()
            .zip(&ops.curl)
            .map(|(g, c)| g.norm_squared() - c.norm_squared())
            .collect())
    };
    let qp2 = quad(t + 2.0 * dt)?;
    let qp1 = quad(t + dt)?;
    let qm1 = quad(t - dt)?;
    let qm2 = quad(t - 2.0 * dt)?;

    let st = DeformationState::new(sample(grid, omega, t, false))?;
    let fv = sample(grid, f, t, false);
    let nab = nab_defect(&st, &fv);
    let g = flow_ops(&st, &fv).grad;
    let h = flow_ops(&st, &sample(grid, f, t, true)).grad;
    let w = flow_ops(&st, &sample(grid, omega, t, true)).grad;
    let mut nabt = 0.0f64;
    for n in 0..grid.len() {
        let lhs = (g[n] * h[n]).trace();
        let dq = (-qp2[n] + 8.0 * qp1[n] - 8.0 * qm1[n] + qm2[n]) / (12.0 * dt);
        let rhs = 0.5 * dq + (g[n] * w[n] * g[n]).trace();
        nabt = nabt.max((lhs - rhs).abs());
    }
    Ok(NabDefects { nab, nabt })
}

/// `max |curl_η η|` for `η = y + ω`.
pub fn curl_eta_eta(state: &DeformationState<'_>) -> f64 {
    let jac: Vec<Matrix3<f64>> = state.grad_omega.values.iter().map(|e| Matrix3::identity() + e).collect();
    flow_ops_from_jacobian(state, &jac)
        .curl
        .iter()
        .fold(0.0, |m, c| m.max(c.norm()))
}

/// `max |curl_η ∇_η g|`.
pub fn curl_eta_grad(state: &DeformationState<'_>, g: &ScalarField<'_>) -> f64 {
    let grad = super::deformation::flow_gradient(state, &g.clone());
    flow_ops(state, &grad).curl.iter().fold(0.0, |m, c| m.max(c.norm()))
}

/// Applies `∂^α` (directions in `alpha`, rightmost first) to `f`.
pub fn apply_partials<'g>(f: &ScalarField<'g>, alpha: &[usize]) -> ScalarField<'g> {
    alpha.iter().rev().fold(f.clone(), |acc, &k| acc.partial(k))
}

/// Applies `∂̄^β` (rightmost first) to `f`.
pub fn apply_angular<'g>(f: &ScalarField<'g>, beta: &[usize]) -> ScalarField<'g> {
    beta.iter().rev().fold(f.clone(), |acc, &i| acc.angular_derivative(i))
}

/// All non-decreasing direction sequences of length `n`, one per multi-index.
pub fn multi_indices(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for d in start..3 {
            cur.push(d);
            rec(n, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, 0, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub max_commutator: f64,
    /// Smallest `C` with `|[∂̄^β, ∂^α] f| ≤ C Σ_{j<|β|} |∂^{|α|} ∂̄^j f|` on the grid.
    pub c_fit: f64,
}

/// `[∂̄^β, ∂^α] f` composed from the discrete operators, with the fitted
/// constant of the lower-order bound.
pub fn commutator_defect(f: &ScalarField<'_>, alpha: &[usize], beta: &[usize]) -> Result<CommutatorReport> {
    if alpha.len() + beta.len() > 4 {
        return Err(Error::param("alpha, beta", "total order above 4 is not supported"));
    }
    if alpha.iter().chain(beta).any(|&d| d > 2) {
        return Err(Error::param("alpha, beta", "directions are 0, 1 or 2"));
    }
    let n = f.values.len();
    if beta.is_empty() || alpha.is_empty() {
        return Ok(CommutatorReport {
            alpha: alpha.to_vec(),
            beta: beta.to_vec(),
            max_commutator: 0.0,
            c_fit: 0.0,
        });
    }
    let left = apply_angular(&apply_partials(f, alpha), beta);
    let right = apply_partials(&apply_angular(f, beta), alpha);
    let comm: Vec<f64> = left.values.iter().zip(&right.values).map(|(a, b)| a - b).collect();

    let mut bound = vec![0.0f64; n];
    for j in 0..beta.len() {
        let mut sq = vec![0.0f64; n];
        for b in multi_indices(j) {
            let fb = apply_angular(f, &b);
            for a in multi_indices(alpha.len()) {
                for (s, v) in sq.iter_mut().zip(apply_partials(&fb, &a).values) {
                    *s += v * v;
                }
            }
        }
        for (b, s) in bound.iter_mut().zip(sq) {
            *b += s.sqrt();
        }
    }
    let floor = 1e-10 * bound.iter().fold(0.0f64, |m, &b| m.max(b));
    let c_fit = comm
        .iter()
        .zip(&bound)
        .filter(|(_, &b)| b > floor)
        .map(|(c, b)| c.abs() / b)
        .fold(0.0, f64::max);
    Ok(CommutatorReport {
        alpha: alpha.to_vec(),
        beta: beta.to_vec(),
        max_commutator: comm.iter().fold(0.0, |m, c| m.max(c.abs())),
        c_fit,
    })
}

/// `max |[∂̄_i, ∂_l] f + ε^{ilk} ∂_k f|`.
pub fn commutator_base_defect(f: &ScalarField<'_>, i: usize, l: usize) -> f64 {
    let left = f.partial(l).angular_derivative(i);
    let right = f.angular_derivative(i).partial(l);
    let grad = f.gradient();
    let mut worst = 0.0f64;
    for n in 0..f.values.len() {
        let mut expected = 0.0;
        for k in 0..3 {
            expected -= levi_civita(i, l, k) * grad.values[n][k];
        }
        worst = worst.max((left.values[n] - right.values[n] - expected).abs());
    }
    worst
}

pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(0), vec![Vec::<usize>::new()]);
        assert_eq!(multi_indices(1).len(), 3);
        assert_eq!(multi_indices(2).len(), 6);
        assert_eq!(multi_indices(3).len(), 10);
    }
}
