//! Gas parameters, Barenblatt constants and closed-form Barenblatt profiles.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{barenblatt_moment, gauss_legendre};

/// Polytropic gas `p = ρ^γ` with total mass `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasParams {
    pub gamma: f64,
    pub mass: f64,
}

impl GasParams {
    pub fn new(gamma: f64, mass: f64) -> Result<Self> {
        let p = GasParams { gamma, mass };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return Err(Error::param("gamma", "gamma must exceed 1"));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::param("mass", "mass must be positive"));
        }
        Ok(())
    }

    /// `ι = 1/(γ-1)`.
    pub fn iota(&self) -> f64 {
        1.0 / (self.gamma - 1.0)
    }

    /// Boundary growth exponent `1/(3γ-1)`.
    pub fn growth_exponent(&self) -> f64 {
        1.0 / (3.0 * self.gamma - 1.0)
    }
}

/// Constants of the Barenblatt profile for a given `(γ, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattConstants {
    pub gamma: f64,
    pub a_bar: f64,
    pub b_bar: f64,
    pub iota: f64,
    pub r0: f64,
    /// `∫_0^1 y²(1-y²)^ι dy` as used for `a_bar`.
    pub moment: f64,
    /// Relative gap of the last adaptive quadrature refinement.
    pub moment_tol: f64,
}

/// `B̲ = (γ-1) / (2γ(3γ-1))`.
pub fn b_bar(gamma: f64) -> f64 {
    (gamma - 1.0) / (2.0 * gamma * (3.0 * gamma - 1.0))
}

/// Solves `u^p = rhs` for `u > 0` by bracketed bisection followed by Newton polish.
fn solve_power_relation(p: f64, rhs: f64) -> Result<f64> {
    if !(rhs > 0.0) || !rhs.is_finite() {
        return Err(Error::RootFinding(format!("right-hand side {rhs} is not positive")));
    }
    let g = |u: f64| p * u.ln() - rhs.ln();
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    while g(lo) > 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::RootFinding("lower bracket underflow".into()));
        }
    }
    while g(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::RootFinding("upper bracket overflow".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-6 * hi {
            break;
        }
    }
    // Newton on F(u) = u^p - rhs, started inside the bracket.
    let mut u = 0.5 * (lo + hi);
    for _ in 0..50 {
        let f = u.powf(p) - rhs;
        let df = p * u.powf(p - 1.0);
        let step = f / df;
        u -= step;
        if step.abs() <= 1e-16 * u.abs() {
            break;
        }
    }
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::RootFinding("Newton polish left the positive axis".into()));
    }
    Ok(u)
}

/// Derives `(A̲, B̲, ι, R̄(0))` from `(γ, M)`; the moment integral is
/// evaluated adaptively to `quad_tol`.
pub fn derive_constants(params: &GasParams, quad_tol: f64) -> Result<BarenblattConstants> {
    params.validate()?;
    let gamma = params.gamma;
    let iota = params.iota();
    let b = b_bar(gamma);
    let moment = barenblatt_moment(iota, quad_tol)?;
    let p = (3.0 * gamma - 1.0) / (2.0 * (gamma - 1.0));
    let rhs = params.mass / (4.0 * PI) * gamma.powf(iota) * (gamma * b).powf(1.5) / moment.value;
    let u = solve_power_relation(p, rhs)?;
    let a = u / gamma;
    Ok(BarenblattConstants {
        gamma,
        a_bar: a,
        b_bar: b,
        iota,
        r0: (a / b).sqrt(),
        moment: moment.value,
        moment_tol: moment.achieved,
    })
}

/// Evaluation of the Barenblatt solution at one space-time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarenblattEval {
    pub density: f64,
    pub velocity: Vector3<f64>,
    pub sound_speed_sq: f64,
    pub inside: bool,
}

/// Weight `σ(y) = A̲ - B̲|y|²` on the reference ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Inside(f64),
    Outside,
}

impl Weight {
    pub fn inside(self) -> Option<f64> {
        match self {
            Weight::Inside(v) => Some(v),
            Weight::Outside => None,
        }
    }
}

impl BarenblattConstants {
    /// `1/(3γ-1)`.
    pub fn growth_exponent(&self) -> f64 {
        1.0 / (3.0 * self.gamma - 1.0)
    }

    /// Support radius `R̄(t) = r0 (1+t)^{1/(3γ-1)}`.
    pub fn radius(&self, t: f64) -> f64 {
        self.r0 * (1.0 + t).powf(self.growth_exponent())
    }

    /// `σ(y)`; points with `|y| > r0` are reported as `Weight::Outside`.
    pub fn sigma(&self, y: &Vector3<f64>) -> Weight {
        self.sigma_radial(y.norm())
    }

    pub fn sigma_radial(&self, s: f64) -> Weight {
        if s > self.r0 {
            Weight::Outside
        } else {
            Weight::Inside((self.a_bar - self.b_bar * s * s).max(0.0))
        }
    }

    /// `ρ̄₀(y) = σ(y)^ι`, zero outside the ball.
    pub fn rho0_bar(&self, y: &Vector3<f64>) -> f64 {
        match self.sigma(y) {
            Weight::Inside(s) => s.powf(self.iota),
            Weight::Outside => 0.0,
        }
    }

    /// Barenblatt density, velocity and sound speed. Total for `t > -1`.
    pub fn eval(&self, t: f64, x: &Vector3<f64>) -> BarenblattEval {
        let k = 3.0 * self.gamma - 1.0;
        let tau = 1.0 + t;
        let r2 = x.norm_squared();
        let inner = self.a_bar - self.b_bar * tau.powf(-2.0 / k) * r2;
        let inside = r2.sqrt() < self.radius(t) && inner > 0.0;
        if !inside {
            return BarenblattEval {
                density: 0.0,
                velocity: Vector3::zeros(),
                sound_speed_sq: 0.0,
                inside: false,
            };
        }
        let density = tau.powf(-3.0 / k) * inner.powf(self.iota);
        BarenblattEval {
            density,
            velocity: x / (k * tau),
            sound_speed_sq: self.gamma * density.powf(self.gamma - 1.0),
            inside: true,
        }
    }

    pub fn density(&self, t: f64, x: &Vector3<f64>) -> f64 {
        self.eval(t, x).density
    }

    /// Exact radial derivative of `c² = γρ̄^{γ-1}` just inside the support:
    /// `-2γB̲ (1+t)^{-1} R̄(t)`.
    pub fn boundary_sound_speed_slope(&self, t: f64) -> f64 {
        -2.0 * self.gamma * self.b_bar / (1.0 + t) * self.radius(t)
    }
}

/// Finite-difference residuals of the porous media equation and Darcy's law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmeDarcyResidual {
    pub pme: f64,
    pub darcy: f64,
    /// Darcy residual vector, useful for symmetry checks.
    pub darcy_vec: Vector3<f64>,
}

/// Evaluates `|∂ₜρ̄ - Δ(ρ̄^γ)|` and `|∇(ρ̄^γ) + ρ̄ū|` with centered
/// differences of step `h`. The point must sit at least `3h` inside the support.
pub fn pme_darcy_residual(c: &BarenblattConstants, t: f64, x: &Vector3<f64>, h: f64) -> Result<PmeDarcyResidual> {
    if !(h > 0.0) {
        return Err(Error::param("h", "step must be positive"));
    }
    if !(t >= 0.0) {
        return Err(Error::param("t", "time must be non-negative"));
    }
    let gap = c.radius(t) - x.norm();
    if gap <= 3.0 * h {
        return Err(Error::Precondition(format!(
            "point lies {gap:.3e} from the vacuum boundary, need more than {:.3e}",
            3.0 * h
        )));
    }
    let gamma = c.gamma;
    let pressure = |tt: f64, y: &Vector3<f64>| c.density(tt, y).powf(gamma);
    let rho_t = (c.density(t + h, x) - c.density(t - h, x)) / (2.0 * h);
    let p0 = pressure(t, x);
    let mut lap = 0.0;
    let mut grad = Vector3::zeros();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = h;
        let pp = pressure(t, &(x + e));
        let pm = pressure(t, &(x - e));
        lap += (pp - 2.0 * p0 + pm) / (h * h);
        grad[k] = (pp - pm) / (2.0 * h);
    }
    let ev = c.eval(t, x);
    let darcy_vec = grad + ev.velocity * ev.density;
    Ok(PmeDarcyResidual {
        pme: (rho_t - lap).abs(),
        darcy: darcy_vec.norm(),
        darcy_vec,
    })
}

/// `∫_{B_{R̄(t)}} ρ̄ dx` by Gauss–Legendre quadrature in the radial angle
/// `r = R̄(t) sin ϑ`, which turns the `(1-y²)^ι` endpoint into a smooth factor.
pub fn mass_check(c: &BarenblattConstants, t: f64, quad_order: usize) -> Result<f64> {
    if quad_order < 4 {
        return Err(Error::param("quad_order", "need at least 4 nodes"));
    }
    let radius = c.radius(t);
    let tau = 1.0 + t;
    let k = 3.0 * c.gamma - 1.0;
    let peak = tau.powf(-3.0 / k) * c.a_bar.powf(c.iota);
    // ρ̄ = peak (1 - (r/R̄)²)^ι; with r = R̄ sin ϑ: r² dr = R̄³ sin²ϑ cos ϑ dϑ.
    let integral: f64 = gauss_legendre(quad_order, 0.0, 0.5 * PI)
        .into_iter()
        .map(|(th, w)| {
            let (s, co) = th.sin_cos();
            w * s * s * co.powf(2.0 * c.iota + 1.0)
        })
        .sum();
    Ok(4.0 * PI * radius.powi(3) * peak * integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn consts(gamma: f64, mass: f64) -> BarenblattConstants {
        derive_constants(&GasParams::new(gamma, mass).unwrap(), 1e-14).unwrap()
    }

    #[test]
    fn gamma_two_constants() {
        let c = consts(2.0, 1.0);
        assert_eq!(c.b_bar, 0.05);
        assert_eq!(c.iota, 1.0);
        assert!((c.a_bar - 0.13482).abs() < 1e-4, "a_bar = {}", c.a_bar);
        assert!((c.r0 - 1.6421).abs() < 1e-4, "r0 = {}", c.r0);
        assert!((c.r0 * c.r0 * c.b_bar - c.a_bar).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(GasParams::new(1.0, 1.0), Err(Error::Parameter { name: "gamma", .. })));
        assert!(GasParams::new(0.9, 1.0).is_err());
        assert!(GasParams::new(2.0, 0.0).is_err());
        let bogus = GasParams { gamma: 0.5, mass: 1.0 };
        assert!(derive_constants(&bogus, 1e-12).is_err());
    }

    #[test]
    fn density_at_center_and_edge() {
        let c = consts(2.0, 1.0);
        let e = c.eval(0.0, &Vector3::zeros());
        assert_relative_eq!(e.density, c.a_bar, max_relative = 1e-14);
        assert!(e.inside);
        let edge = c.eval(0.0, &Vector3::new(c.r0, 0.0, 0.0));
        assert_eq!(edge.density, 0.0);
        assert!(!edge.inside);
        assert_relative_eq!(c.radius(31.0), 2.0 * c.r0, max_relative = 1e-14);
    }

    #[test]
    fn velocity_inside_is_linear() {
        let c = consts(5.0 / 3.0, 1.0);
        let x = Vector3::new(0.3, -0.2, 0.1);
        let e = c.eval(2.0, &x);
        let expected = x / ((3.0 * c.gamma - 1.0) * 3.0);
        assert!((e.velocity - expected).norm() < 1e-15);
    }

    #[test]
    fn sigma_marks_outside_points() {
        let c = consts(2.0, 1.0);
        assert_eq!(c.sigma(&Vector3::zeros()), Weight::Inside(c.a_bar));
        assert!(c.sigma_radial(c.r0).inside().unwrap().abs() < 1e-15);
        assert_eq!(c.sigma_radial(1.01 * c.r0), Weight::Outside);
        let y = Vector3::new(0.4, 0.5, -0.3);
        assert_relative_eq!(c.rho0_bar(&y), c.sigma(&y).inside().unwrap(), max_relative = 1e-15);
    }

    #[test]
    fn pme_residual_small_at_center() {
        let c = consts(2.0, 1.0);
        let r = pme_darcy_residual(&c, 1.0, &Vector3::zeros(), 1e-3).unwrap();
        assert!(r.pme < 1e-5, "pme residual {}", r.pme);
        assert!(r.darcy_vec.norm() < 1e-12);
    }

    #[test]
    fn residual_rejects_boundary_points() {
        let c = consts(2.0, 1.0);
        let x = Vector3::new(c.r0 - 0.01, 0.0, 0.0);
        assert!(matches!(pme_darcy_residual(&c, 0.0, &x, 0.01), Err(Error::Precondition(_))));
    }

    #[test]
    fn mass_is_recovered() {
        let c = consts(2.0, 1.0);
        for t in [0.0, 10.0] {
            assert!((mass_check(&c, t, 64).unwrap() - 1.0).abs() < 1e-8);
        }
        let c3 = consts(3.0, 2.0);
        assert!((mass_check(&c3, 0.0, 64).unwrap() - 2.0).abs() < 1e-7);
        assert!(mass_check(&c3, 0.0, 3).is_err());
    }
}
