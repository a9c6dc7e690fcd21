//! Independent check of the Liu system: the ansatz `c² = e - b r²`,
//! `u = a r` is substituted into the damped radial Euler equations with
//! forward-mode derivatives in `r`. When `(a, b, e)` move by `liu_rhs`, the
//! residuals must vanish to rounding.

use std::ops::{Add, Mul, Sub};
use vacuum_core::theta::{liu_rhs, LiuState};

#[derive(Clone, Copy, Debug)]
struct Dual(f64, f64);

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual(self.0 + o.0, self.1 + o.1)
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual(self.0 - o.0, self.1 - o.1)
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual(self.0 * o.0, self.0 * o.1 + self.1 * o.0)
    }
}
fn k(v: f64) -> Dual {
    Dual(v, 0.0)
}
fn pow(x: Dual, p: f64) -> Dual {
    Dual(x.0.powf(p), p * x.0.powf(p - 1.0) * x.1)
}

/// Residuals of mass and momentum for `ρ = (c²/γ)^{1/(γ-1)}`.
fn residuals(gamma: f64, s: LiuState, ds: LiuState, r: f64) -> (f64, f64) {
    let iota = 1.0 / (gamma - 1.0);
    let rr = Dual(r, 1.0);
    let c2 = k(s.e) - k(s.b) * rr * rr;
    let c2_t = k(ds.e) - k(ds.b) * rr * rr;
    let rho = pow(c2 * k(1.0 / gamma), iota);
    let rho_t = iota * rho.0 / c2.0 * c2_t.0;
    let u = k(s.a) * rr;
    let u_t = ds.a * r;
    // ρ_t + r^{-2}(r² ρ u)_r
    let flux = rr * rr * rho * u;
    let mass = rho_t + flux.1 / (r * r);
    // u_t + u u_r + p_r/ρ + u with p = ρ^γ
    let p = pow(rho, gamma);
    let mom = u_t + u.0 * u.1 + p.1 / rho.0 + u.0;
    (mass / rho.0, mom)
}

#[test]
fn ansatz_residual_vanishes_under_derived_system() {
    for gamma in [1.4, 5.0 / 3.0, 2.0, 3.0] {
        for s in [
            LiuState { a: 0.12, b: 0.05, e: 0.27 },
            LiuState { a: -0.3, b: 0.4, e: 1.9 },
            LiuState { a: 0.0, b: 0.01, e: 0.5 },
        ] {
            let ds = liu_rhs(gamma, &s);
            let support = (s.e / s.b).sqrt();
            for frac in [0.05, 0.3, 0.6, 0.95] {
                let (m, u) = residuals(gamma, s, ds, frac * support);
                assert!(m.abs() < 1e-12 && u.abs() < 1e-12, "γ={gamma} {s:?} r/R={frac}: {m:e} {u:e}");
            }
        }
    }
}

#[test]
fn perturbed_system_is_detected() {
    let s = LiuState { a: 0.12, b: 0.05, e: 0.27 };
    let mut ds = liu_rhs(2.0, &s);
    ds.b *= 1.01;
    let (m, _) = residuals(2.0, s, ds, 0.5);
    assert!(m.abs() > 1e-6);
}
