//! Quadrature rules and finite-difference weights shared by every module.
//!
//! Gauss rules come from `gauss-quad`; the remaining rules (Fejér, corrected
//! midpoint, Fornberg stencils) are small enough to live here.

use gauss_quad::{GaussJacobi, GaussLegendre};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(order.max(1).try_into().expect("nonzero order"));
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Gauss–Jacobi rule for `∫_a^b (b-x)^alpha (x-a)^beta g(x) dx`.
///
/// Returned weights already contain the Jacobi weight, so the integral is
/// `Σ w_i g(x_i)`.
pub fn gauss_jacobi(order: usize, alpha: f64, beta: f64, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    let al = alpha
        .try_into()
        .map_err(|_| Error::param("alpha", format!("Jacobi exponent {alpha} must exceed -1")))?;
    let be = beta
        .try_into()
        .map_err(|_| Error::param("beta", format!("Jacobi exponent {beta} must exceed -1")))?;
    let rule = GaussJacobi::new(order.max(1).try_into().expect("nonzero order"), al, be);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    // (1-t)^alpha (1+t)^beta dt on [-1,1] maps to half^{-alpha-beta-1} (b-x)^alpha (x-a)^beta dx.
    let scale = half.powf(alpha + beta + 1.0);
    Ok(rule
        .iter()
        .map(|(t, w)| (mid + half * t, scale * w))
        .collect())
}

/// Outcome of an adaptive quadrature: value plus the last successive-order gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptive {
    pub value: f64,
    pub achieved: f64,
    pub order: usize,
}

/// `∫_0^1 y^2 (1-y^2)^iota dy` by Gauss–Jacobi with the `(1-y)^iota`
/// endpoint weight, doubling the order until two successive rules agree to
/// `rel_tol`.
pub fn barenblatt_moment(iota: f64, rel_tol: f64) -> Result<Adaptive> {
    if !(iota > 0.0) || !iota.is_finite() {
        return Err(Error::param("iota", "exponent must be positive and finite"));
    }
    // (1-y^2)^iota = (1-y)^iota (1+y)^iota; the first factor is the Jacobi weight.
    let eval = |order: usize| -> Result<f64> {
        let rule = gauss_jacobi(order, iota, 0.0, 0.0, 1.0)?;
        Ok(rule
            .iter()
            .map(|&(y, w)| w * y * y * (1.0 + y).powf(iota))
            .sum())
    };
    let mut order = 4;
    let mut prev = eval(order)?;
    let mut gap = f64::INFINITY;
    while order < 512 {
        order *= 2;
        let next = eval(order)?;
        gap = (next - prev).abs() / next.abs().max(f64::MIN_POSITIVE);
        if gap <= rel_tol {
            return Ok(Adaptive {
                value: next,
                achieved: gap,
                order,
            });
        }
        prev = next;
    }
    Err(Error::Quadrature {
        achieved: gap,
        requested: rel_tol,
    })
}

/// Fejér's first rule on `μ ∈ [-1, 1]` with nodes `μ_j = cos((j+½)π/n)`.
///
/// Returns `(phi_j, w_j)` where `phi_j = (j+½)π/n` is increasing, so the
/// nodes run from the north pole to the south pole. Exact for polynomials in
/// `μ` of degree `< n`.
pub fn fejer_first(n: usize) -> Vec<(f64, f64)> {
    let nf = n as f64;
    (0..n)
        .map(|j| {
            let phi = (j as f64 + 0.5) * PI / nf;
            let mut acc = 0.0;
            for k in 1..=n / 2 {
                let kf = k as f64;
                acc += (2.0 * kf * phi).cos() / (4.0 * kf * kf - 1.0);
            }
            (phi, 2.0 / nf * (1.0 - 2.0 * acc))
        })
        .collect()
}

/// Largest number of end nodes that carry a correction in
/// [`corrected_midpoint_weights`].
pub const MIDPOINT_CORRECTION_NODES: usize = 12;

/// Smallest grid accepted by [`corrected_midpoint_weights`].
pub const MIDPOINT_MIN_NODES: usize = 16;

fn correction_layout(n: usize) -> (usize, usize) {
    let p = MIDPOINT_CORRECTION_NODES.min(n / 2);
    // Eight nodes cannot reach degree seven with positive weights.
    let degree = if p >= 9 { 7 } else { 5 };
    (p, degree)
}

/// Polynomial degree integrated exactly by the `n`-node corrected rule.
pub fn midpoint_exactness(n: usize) -> usize {
    correction_layout(n).1
}

/// Endpoint corrections `c_j` (in units of the spacing) for the midpoint
/// rule on nodes `j + ½`, cancelling the Euler–Maclaurin end terms through
/// `degree`. The system is underdetermined; the minimum-norm solution keeps
/// every corrected weight positive.
fn midpoint_end_corrections(p: usize, degree: usize) -> Vec<f64> {
    let rows = degree + 1;
    // Left-end defect of the midpoint rule on u^m: B_{m+1}(1/2)/(m+1) for odd m.
    let b_half = [0.0, -1.0 / 12.0, 0.0, 7.0 / 240.0, 0.0, -31.0 / 1344.0, 0.0, 127.0 / 3840.0];
    // Rows scaled by p^-m for conditioning.
    let scale = p as f64;
    let mat = DMatrix::from_fn(rows, p, |m, j| ((j as f64 + 0.5) / scale).powi(m as i32));
    let rhs = DVector::from_fn(rows, |m, _| {
        if m % 2 == 1 {
            b_half[m] / (m as f64 + 1.0) / scale.powi(m as i32)
        } else {
            0.0
        }
    });
    // Minimum-norm solution through a QR factorisation of the transpose.
    let qr = mat.transpose().qr();
    let y = qr
        .r()
        .transpose()
        .solve_lower_triangular(&rhs)
        .expect("moment matrix has full row rank");
    (qr.q() * y).iter().copied().collect()
}

/// Positive weights for the nodes `(i+½)h`, `i < n`, on `[0, n h]`. Exact
/// for polynomials of degree [`midpoint_exactness`]`(n)`: seven from 18
/// nodes on, five below.
pub fn corrected_midpoint_weights(n: usize, h: f64) -> Result<Vec<f64>> {
    if n < MIDPOINT_MIN_NODES {
        return Err(Error::Grid(format!(
            "corrected midpoint rule needs at least {MIDPOINT_MIN_NODES} nodes, got {n}"
        )));
    }
    let (p, degree) = correction_layout(n);
    let c = midpoint_end_corrections(p, degree);
    let mut w = vec![h; n];
    for j in 0..p {
        w[j] += h * c[j];
        w[n - 1 - j] += h * c[j];
    }
    Ok(w)
}

/// Fornberg's algorithm: weights of the `deriv`-th derivative at `x0` from
/// values at `xs`.
pub fn fd_weights(x0: f64, xs: &[f64], deriv: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; deriv + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[deriv]).collect()
}

/// Dense Fourier differentiation matrix on `m` (even) equispaced points of a
/// `2π`-periodic grid.
pub fn fourier_diff_matrix(m: usize) -> DMatrix<f64> {
    assert!(m >= 2 && m % 2 == 0, "Fourier grid size must be even");
    let h = 2.0 * PI / m as f64;
    DMatrix::from_fn(m, m, |j, l| {
        if j == l {
            0.0
        } else {
            let d = j as f64 - l as f64;
            let sign = if (j + l) % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (0.5 * d * h).tan()
        }
    })
}
