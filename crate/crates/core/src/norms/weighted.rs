use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{multi_indices, BallGrid, ScalarField};
use crate::quadrature::{gauss_jacobi, gauss_legendre};

/// Squared pointwise magnitude of a field value.
pub trait PointNorm {
    fn norm_sq(&self) -> f64;
}

impl PointNorm for f64 {
    fn norm_sq(&self) -> f64 {
        self * self
    }
}

impl PointNorm for Vector3<f64> {
    fn norm_sq(&self) -> f64 {
        self.norm_squared()
    }
}

impl PointNorm for Matrix3<f64> {
    fn norm_sq(&self) -> f64 {
        self.norm_squared()
    }
}

/// `∫ σ^k |f|² dy`.
pub fn weighted_l2<T: PointNorm>(grid: &BallGrid, values: &[T], k: f64) -> Result<f64> {
    if !(k > -1.0) {
        return Err(Error::param("k", "weight exponent must exceed -1"));
    }
    if values.len() != grid.len() {
        return Err(Error::Grid("field does not match the grid".into()));
    }
    Ok(values
        .iter()
        .zip(&grid.weights)
        .zip(&grid.sigma)
        .map(|((v, w), s)| w * s.powf(k) * v.norm_sq())
        .sum())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HardyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub k: f64,
    pub ceiling: f64,
    pub pass: bool,
}

impl HardyReport {
    fn new(lhs: f64, rhs: f64, k: f64, ceiling: f64) -> Result<Self> {
        if !(rhs > 0.0) {
            return Err(Error::Precondition("right-hand side vanishes; f must be nonzero".into()));
        }
        let ratio = lhs / rhs;
        Ok(HardyReport {
            lhs,
            rhs,
            ratio,
            k,
            ceiling,
            pass: ratio.is_finite() && ratio <= ceiling,
        })
    }
}

/// `∫_0^δ r^k f² dr` against `∫_0^δ r^{k+2}(f² + f'²) dr` for a profile
/// returning `(f, f')`. The first of `panels` equal panels carries the
/// singular weight through Gauss–Jacobi; the rest use Gauss–Legendre.
pub fn hardy_check(
    f: &dyn Fn(f64) -> (f64, f64),
    k: f64,
    delta: f64,
    panels: usize,
    order: usize,
    ceiling: f64,
) -> Result<HardyReport> {
    if !(k > -1.0) {
        return Err(Error::param("k", "weight exponent must exceed -1"));
    }
    if !(delta > 0.0) || panels == 0 {
        return Err(Error::param("delta", "interval and panel count must be positive"));
    }
    let h = delta / panels as f64;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (r, w) in gauss_jacobi(order, 0.0, k, 0.0, h)? {
        let (v, _) = f(r);
        lhs += w * v * v;
    }
    for (r, w) in gauss_jacobi(order, 0.0, k + 2.0, 0.0, h)? {
        let (v, d) = f(r);
        rhs += w * (v * v + d * d);
    }
    for p in 1..panels {
        for (r, w) in gauss_legendre(order, p as f64 * h, (p + 1) as f64 * h) {
            let (v, d) = f(r);
            lhs += w * r.powf(k) * v * v;
            rhs += w * r.powf(k + 2.0) * (v * v + d * d);
        }
    }
    HardyReport::new(lhs, rhs, k, ceiling)
}

/// Ball version: `∫ σ^k f²` against `∫ σ^{k+2}(f² + |∂f|²)`.
pub fn hardy_ball(f: &ScalarField<'_>, k: f64, ceiling: f64) -> Result<HardyReport> {
    let grid = f.grid();
    let lhs = weighted_l2(grid, &f.values, k)?;
    let grad = f.gradient();
    let rhs = weighted_l2(grid, &f.values, k + 2.0)? + weighted_l2(grid, &grad.values, k + 2.0)?;
    HardyReport::new(lhs, rhs, k, ceiling)
}

/// `tower[k][i]` is `∂^α f` for the `i`-th multi-index of order `k`, in the
/// order of [`multi_indices`].
pub fn partial_tower<'g>(f: &ScalarField<'g>, max_order: usize) -> Vec<Vec<ScalarField<'g>>> {
    let mut tower = vec![vec![f.clone()]];
    for k in 1..=max_order {
        let prev_idx = multi_indices(k - 1);
        let idx = multi_indices(k);
        let grads: Vec<_> = tower[k - 1].iter().map(|g| g.gradient()).collect();
        let level = idx
            .iter()
            .map(|a| {
                let parent = prev_idx.iter().position(|p| p[..] == a[1..]).expect("prefix exists");
                grads[parent].component(a[0])
            })
            .collect();
        tower.push(level);
    }
    tower
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmbeddingReport {
    pub a: f64,
    pub b: usize,
    /// Sobolev index `b - a/2`.
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Ratio of `‖f‖_{H^{b-a/2}}` to `‖f‖_{H^{a,b}}` with distance weight
/// `d = r0 - |y|`. Fractional orders interpolate geometrically between the
/// neighbouring integer norms.
pub fn embedding_check(f: &ScalarField<'_>, a: f64, b: usize) -> Result<EmbeddingReport> {
    if !(a > 0.0) {
        return Err(Error::param("a", "weight exponent must be positive"));
    }
    if (b as f64) < a / 2.0 {
        return Err(Error::param("b", "need b ≥ a/2"));
    }
    if b > 4 {
        return Err(Error::param("b", "derivative order above 4 is not supported"));
    }
    let grid = f.grid();
    let dist: Vec<f64> = grid.positions().iter().map(|y| (grid.r0 - y.norm()).max(0.0)).collect();
    let tower = partial_tower(f, b);
    let level = |k: usize, weighted: bool| -> f64 {
        tower[k]
            .iter()
            .map(|g| {
                g.values
                    .iter()
                    .zip(&grid.weights)
                    .zip(&dist)
                    .map(|((v, w), d)| w * v * v * if weighted { d.powf(a) } else { 1.0 })
                    .sum::<f64>()
            })
            .sum()
    };
    let rhs = (0..=b).map(|k| level(k, true)).sum::<f64>().sqrt();
    let s = b as f64 - a / 2.0;
    let sob = |m: usize| (0..=m).map(|k| level(k, false)).sum::<f64>().sqrt();
    let lo = s.floor() as usize;
    let frac = s - lo as f64;
    let lhs = if frac == 0.0 {
        sob(lo)
    } else {
        sob(lo).powf(1.0 - frac) * sob(lo + 1).powf(frac)
    };
    Ok(EmbeddingReport {
        a,
        b,
        s,
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}
