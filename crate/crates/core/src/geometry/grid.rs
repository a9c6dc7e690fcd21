//! Spherical tensor-product grid on the reference ball `|y| < r0`.
//!
//! Radial nodes sit at half offsets `s_i = (i+½)Δs`, so neither the centre
//! nor the vacuum boundary is ever sampled. Radial derivatives are fourth
//! order differences along lines through the origin (the antipodal column
//! supplies the values at negative radius); angular derivatives are Fourier
//! differentiation on great circles and latitude circles. Differentiation is
//! exact for polynomials of degree four when the angular resolution allows.

use nalgebra::{DMatrix, Matrix3, Vector3};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::BarenblattConstants;
use crate::quadrature::{corrected_midpoint_weights, fd_weights, fejer_first, MIDPOINT_MIN_NODES};

const STENCIL: usize = 5;

/// Orthonormal frame `(n, e_φ, e_ψ)` at one angular node.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub n: Vector3<f64>,
    pub e_phi: Vector3<f64>,
    pub e_psi: Vector3<f64>,
    pub sin_phi: f64,
}

#[derive(Debug, Clone)]
struct RadialStencil {
    /// Line positions `p`; `p < 0` refers to node `-1-p` of the antipodal column.
    pos: [isize; STENCIL],
    w: [f64; STENCIL],
}

#[derive(Debug, Clone)]
pub struct BallGrid {
    pub r0: f64,
    pub n_r: usize,
    pub n_phi: usize,
    pub n_psi: usize,
    pub ds: f64,
    pub s: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// Radial quadrature weights (without the `s²` factor).
    pub w_r: Vec<f64>,
    /// Weights in `cos φ`.
    pub w_phi: Vec<f64>,
    /// Volume weight of every node.
    pub weights: Vec<f64>,
    /// `σ(y) = A̲ - B̲|y|²` at every node.
    pub sigma: Vec<f64>,
    pub iota: f64,
    positions: Vec<Vector3<f64>>,
    frames: Vec<Frame>,
    radial: Vec<RadialStencil>,
    d_phi: DMatrix<f64>,
    d_psi: DMatrix<f64>,
}

impl BallGrid {
    /// Grid on the Barenblatt reference ball of `c`.
    pub fn new(c: &BarenblattConstants, n_r: usize, n_phi: usize, n_psi: usize) -> Result<Self> {
        let mut g = Self::with_radius(c.r0, n_r, n_phi, n_psi)?;
        g.iota = c.iota;
        g.sigma = g.positions.iter().map(|y| c.a_bar - c.b_bar * y.norm_squared()).collect();
        Ok(g)
    }

    /// Bare grid on a ball of radius `r0` with `σ ≡ 1` and `ι = 0`.
    pub fn with_radius(r0: f64, n_r: usize, n_phi: usize, n_psi: usize) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::Grid("radius must be positive".into()));
        }
        if n_r < MIDPOINT_MIN_NODES {
            return Err(Error::Grid(format!("need at least {MIDPOINT_MIN_NODES} radial nodes")));
        }
        if n_phi < 2 {
            return Err(Error::Grid("need at least 2 polar nodes".into()));
        }
        if n_psi < 4 || n_psi % 2 != 0 {
            return Err(Error::Grid("azimuthal node count must be even and at least 4".into()));
        }
        let ds = r0 / n_r as f64;
        let s: Vec<f64> = (0..n_r).map(|i| (i as f64 + 0.5) * ds).collect();
        let w_r = corrected_midpoint_weights(n_r, ds)?;
        let (phi, w_phi): (Vec<f64>, Vec<f64>) = fejer_first(n_phi).into_iter().unzip();
        let psi: Vec<f64> = (0..n_psi).map(|k| 2.0 * PI * k as f64 / n_psi as f64).collect();
        let w_psi = 2.0 * PI / n_psi as f64;

        let mut frames = Vec::with_capacity(n_phi * n_psi);
        for &p in &phi {
            let (sp, cp) = p.sin_cos();
            for &q in &psi {
                let (sq, cq) = q.sin_cos();
                frames.push(Frame {
                    n: Vector3::new(sp * cq, sp * sq, cp),
                    e_phi: Vector3::new(cp * cq, cp * sq, -sp),
                    e_psi: Vector3::new(-sq, cq, 0.0),
                    sin_phi: sp,
                });
            }
        }
        let total = n_r * n_phi * n_psi;
        let mut positions = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for i in 0..n_r {
            for j in 0..n_phi {
                for k in 0..n_psi {
                    positions.push(s[i] * frames[j * n_psi + k].n);
                    weights.push(w_r[i] * s[i] * s[i] * w_phi[j] * w_psi);
                }
            }
        }

        let radial = (0..n_r as isize)
            .map(|i| {
                let start = if i + 2 < n_r as isize { i - 2 } else { n_r as isize - STENCIL as isize };
                let pos: [isize; STENCIL] = std::array::from_fn(|m| start + m as isize);
                let xs: Vec<f64> = pos.iter().map(|&p| p as f64 + 0.5).collect();
                let w = fd_weights(i as f64 + 0.5, &xs, 1);
                RadialStencil {
                    pos,
                    w: std::array::from_fn(|m| w[m] / ds),
                }
            })
            .collect();

        Ok(BallGrid {
            r0,
            n_r,
            n_phi,
            n_psi,
            ds,
            s,
            phi,
            psi,
            w_r,
            w_phi,
            weights,
            sigma: vec![1.0; total],
            iota: 0.0,
            positions,
            frames,
            radial,
            d_phi: crate::quadrature::fourier_diff_matrix(2 * n_phi),
            d_psi: crate::quadrature::fourier_diff_matrix(n_psi),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_phi + j) * self.n_psi + k
    }

    /// `(i, j, k)` of a flat node index.
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.n_psi;
        let rest = idx / self.n_psi;
        (rest / self.n_phi, rest % self.n_phi, k)
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn frame(&self, idx: usize) -> &Frame {
        let (_, j, k) = self.unindex(idx);
        &self.frames[j * self.n_psi + k]
    }

    #[inline]
    fn antipode(&self, j: usize, k: usize) -> (usize, usize) {
        (self.n_phi - 1 - j, (k + self.n_psi / 2) % self.n_psi)
    }

    /// `Σ w f`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Derivative along the outward radial direction.
    pub fn d_s(&self, v: &[f64]) -> Vec<f64> {
        self.check_len(v.len());
        let mut out = vec![0.0; v.len()];
        for j in 0..self.n_phi {
            for k in 0..self.n_psi {
                let (ja, ka) = self.antipode(j, k);
                for i in 0..self.n_r {
                    let st = &self.radial[i];
                    // Differences against the centre value make constants exact.
                    let centre = v[self.index(i, j, k)];
                    let mut acc = 0.0;
                    for m in 0..STENCIL {
                        let p = st.pos[m];
                        let val = if p >= 0 {
                            v[self.index(p as usize, j, k)]
                        } else {
                            v[self.index((-1 - p) as usize, ja, ka)]
                        };
                        acc += st.w[m] * (val - centre);
                    }
                    out[self.index(i, j, k)] = acc;
                }
            }
        }
        out
    }

    /// Radial derivative of a single line of `n_r` samples, extended to
    /// negative radius as an even or odd function. Uses the same stencils
    /// as [`BallGrid::d_s`].
    pub fn d_s_line(&self, v: &[f64], odd: bool) -> Vec<f64> {
        assert_eq!(v.len(), self.n_r, "line length must equal n_r");
        let sign = if odd { -1.0 } else { 1.0 };
        (0..self.n_r)
            .map(|i| {
                let st = &self.radial[i];
                let centre = v[i];
                let mut acc = 0.0;
                for m in 0..STENCIL {
                    let p = st.pos[m];
                    let val = if p >= 0 { v[p as usize] } else { sign * v[(-1 - p) as usize] };
                    acc += st.w[m] * (val - centre);
                }
                acc
            })
            .collect()
    }

    /// `∂/∂φ` through Fourier differentiation on meridian great circles.
    pub fn d_phi(&self, v: &[f64]) -> Vec<f64> {
        self.check_len(v.len());
        let np = self.n_phi;
        let half = self.n_psi / 2;
        let mut out = vec![0.0; v.len()];
        let mut line = vec![0.0; 2 * np];
        for i in 0..self.n_r {
            for k in 0..half {
                let ka = k + half;
                for jt in 0..2 * np {
                    line[jt] = if jt < np {
                        v[self.index(i, jt, k)]
                    } else {
                        v[self.index(i, 2 * np - 1 - jt, ka)]
                    };
                }
                for jt in 0..2 * np {
                    let mut acc = 0.0;
                    for (l, val) in line.iter().enumerate() {
                        acc += self.d_phi[(jt, l)] * (val - line[jt]);
                    }
                    if jt < np {
                        out[self.index(i, jt, k)] = acc;
                    } else {
                        // The far half of the circle runs against increasing φ.
                        out[self.index(i, 2 * np - 1 - jt, ka)] = -acc;
                    }
                }
            }
        }
        out
    }

    /// `∂/∂ψ` through Fourier differentiation on latitude circles.
    pub fn d_psi(&self, v: &[f64]) -> Vec<f64> {
        self.check_len(v.len());
        let nq = self.n_psi;
        let mut out = vec![0.0; v.len()];
        for row in 0..self.n_r * self.n_phi {
            let base = row * nq;
            let line = &v[base..base + nq];
            for k in 0..nq {
                let mut acc = 0.0;
                for (l, val) in line.iter().enumerate() {
                    acc += self.d_psi[(k, l)] * (val - line[k]);
                }
                out[base + k] = acc;
            }
        }
        out
    }

    /// Cartesian gradient of a scalar sampled on the grid.
    pub fn gradient(&self, v: &[f64]) -> Vec<Vector3<f64>> {
        let ds = self.d_s(v);
        let dp = self.d_phi(v);
        let dq = self.d_psi(v);
        (0..v.len())
            .map(|idx| {
                let (i, j, k) = self.unindex(idx);
                let f = &self.frames[j * self.n_psi + k];
                let s = self.s[i];
                f.n * ds[idx] + f.e_phi * (dp[idx] / s) + f.e_psi * (dq[idx] / (s * f.sin_phi))
            })
            .collect()
    }

    /// `y × ∇f`, which involves angular derivatives only.
    pub fn angular(&self, v: &[f64]) -> Vec<Vector3<f64>> {
        let dp = self.d_phi(v);
        let dq = self.d_psi(v);
        (0..v.len())
            .map(|idx| {
                let (_, j, k) = self.unindex(idx);
                let f = &self.frames[j * self.n_psi + k];
                f.e_psi * dp[idx] - f.e_phi * (dq[idx] / f.sin_phi)
            })
            .collect()
    }

    /// Jacobian `[∂_k F^i]` of a vector field.
    pub fn jacobian(&self, v: &[Vector3<f64>]) -> Vec<Matrix3<f64>> {
        let mut out = vec![Matrix3::zeros(); v.len()];
        for c in 0..3 {
            let comp: Vec<f64> = v.iter().map(|x| x[c]).collect();
            for (m, g) in out.iter_mut().zip(self.gradient(&comp)) {
                m.set_row(c, &g.transpose());
            }
        }
        out
    }

    pub(crate) fn check_len(&self, n: usize) {
        assert_eq!(n, self.len(), "field does not match the grid");
    }
}
