use nalgebra::{DMatrix, Matrix3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use vacuum_core::geometry::*;
use vacuum_core::norms::*;
use vacuum_core::{derive_constants, BarenblattConstants, GasParams};

fn consts(gamma: f64) -> BarenblattConstants {
    derive_constants(&GasParams::new(gamma, 1.0).unwrap(), 1e-12).unwrap()
}

#[test]
fn weighted_l2_closed_forms() {
    let c = consts(2.0);
    let g = BallGrid::new(&c, 32, 4, 8).unwrap();
    let ones = vec![1.0; g.len()];
    let vol = weighted_l2(&g, &ones, 0.0).unwrap();
    assert!((vol - 4.0 / 3.0 * PI * c.r0.powi(3)).abs() < 1e-12);
    let k1 = weighted_l2(&g, &ones, 1.0).unwrap();
    let exact = 4.0 * PI * (c.a_bar * c.r0.powi(3) / 3.0 - c.b_bar * c.r0.powi(5) / 5.0);
    assert!((k1 - exact).abs() < 1e-12, "{k1} {exact}");
    assert_eq!(weighted_l2(&g, &vec![0.0; g.len()], 1.0).unwrap(), 0.0);
    assert!(weighted_l2(&g, &ones, -1.0).is_err());
}

#[test]
fn weighted_l2_is_quadratic() {
    let c = consts(2.0);
    let g = BallGrid::new(&c, 24, 4, 8).unwrap();
    let v: Vec<Vector3<f64>> = g.positions().iter().map(|y| Vector3::new(y.y, y.z.sin(), 1.0)).collect();
    let v2: Vec<Vector3<f64>> = v.iter().map(|x| -2.0 * x).collect();
    let a = weighted_l2(&g, &v, 1.5).unwrap();
    let b = weighted_l2(&g, &v2, 1.5).unwrap();
    assert!((b - 4.0 * a).abs() < 1e-12 * b);
}

#[test]
fn hardy_exact_ratios() {
    let one = hardy_check(&|_| (1.0, 0.0), 0.0, 1.0, 4, 20, 4.0).unwrap();
    assert!((one.lhs - 1.0).abs() < 1e-13 && (one.ratio - 3.0).abs() < 1e-12);
    let lin = hardy_check(&|r| (1.0 - r, -1.0), 0.0, 1.0, 4, 20, 4.0).unwrap();
    assert!((lin.lhs - 1.0 / 3.0).abs() < 1e-13);
    assert!((lin.rhs - 11.0 / 30.0).abs() < 1e-13);
    assert!((lin.ratio - 10.0 / 11.0).abs() < 1e-12);
}

#[test]
fn hardy_spike_stays_finite() {
    let f = |r: f64| {
        let x = (r - 0.95) / 0.01;
        if r < 0.5 {
            (0.0, 0.0)
        } else {
            ((-x * x).exp(), -2.0 * x / 0.01 * (-x * x).exp())
        }
    };
    let rep = hardy_check(&f, 0.0, 1.0, 200, 12, 10.0).unwrap();
    assert!(rep.ratio.is_finite() && rep.pass, "{rep:?}");
}

/// Largest `∫r^k p²/∫r^{k+2}(p² + p'²)` over polynomials of degree ≤ 4 on (0,1).
fn polynomial_hardy_constant(k: f64) -> f64 {
    let n = 5;
    let l = DMatrix::from_fn(n, n, |i, j| 1.0 / (k + (i + j) as f64 + 1.0));
    let r = DMatrix::from_fn(n, n, |i, j| {
        let mut v = 1.0 / (k + (i + j) as f64 + 3.0);
        if i > 0 && j > 0 {
            v += (i * j) as f64 / (k + (i + j) as f64 + 1.0);
        }
        v
    });
    let ch = r.cholesky().unwrap();
    let linv = ch.l().try_inverse().unwrap();
    let m = &linv * l * linv.transpose();
    m.symmetric_eigenvalues().max()
}

#[test]
fn hardy_random_profiles_below_gram_constant() {
    let iota = 1.0 / (5.0 / 3.0 - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in [0.0, iota, iota + 1.0] {
        let ceiling = polynomial_hardy_constant(k) * (1.0 + 1e-10);
        for _ in 0..20 {
            let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = |r: f64| {
                let v = c.iter().rev().fold(0.0, |a, ci| a * r + ci);
                let d = (1..5).rev().fold(0.0, |a, i| a * r + i as f64 * c[i]);
                (v, d)
            };
            let rep = hardy_check(&f, k, 1.0, 3, 16, ceiling).unwrap();
            assert!(rep.pass, "k={k} {rep:?}");
        }
    }
}

#[test]
fn hardy_ball_constant_profile() {
    let g = BallGrid::with_radius(1.0, 32, 4, 8).unwrap();
    let f = ScalarField::from_fn(&g, |_| 1.0);
    let rep = hardy_ball(&f, 0.0, 10.0).unwrap();
    assert!((rep.ratio - 1.0).abs() < 1e-12);
}

#[test]
fn embedding_bounded_on_oscillations() {
    let c = consts(2.0);
    let g = BallGrid::new(&c, 64, 4, 8).unwrap();
    let ratios: Vec<f64> = (1..=6)
        .map(|n| {
            let f = ScalarField::from_fn(&g, |y| (n as f64 * y.norm()).cos());
            embedding_check(&f, 2.0, 1).unwrap().ratio
        })
        .collect();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(max < 2.0 * ratios[0], "{ratios:?}");

    let sigma = ScalarField::from_values(&g, g.sigma.clone()).unwrap();
    let rep = embedding_check(&sigma, 2.0, 1).unwrap();
    assert!(rep.ratio.is_finite() && rep.ratio > 0.0);
    let frac = embedding_check(&sigma, 1.0, 1).unwrap();
    assert!((frac.s - 0.5).abs() < 1e-15 && frac.ratio.is_finite());
}

fn random_small_gradient(rng: &mut ChaCha8Rng, size: f64) -> Matrix3<f64> {
    let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    m * (size / m.norm())
}

#[test]
fn m0_sandwich_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for gamma in [5.0 / 3.0, 2.0, 3.0] {
        for _ in 0..100 {
            let e = random_small_gradient(&mut rng, 0.05);
            let p = m0_e0_point(&e, gamma);
            assert!(p.decomposition_defect < 1e-12);
            assert!(p.lower_margin >= 0.0 && p.upper_margin >= 0.0, "{p:?}");
        }
    }
}

#[test]
fn m0_dilation_matches_taylor_to_third_order() {
    for gamma in [5.0 / 3.0, 2.0, 3.0] {
        let mut prev = None;
        for d in [0.04, 0.02, 0.01] {
            let p = m0_e0_point(&(Matrix3::identity() * d), gamma);
            // Second-order Taylor expansion of (J^{1-γ} - 1)/(γ-1) + 3δ in δ.
            let quad = 4.5 * gamma * d * d - 3.0 * d * d;
            let err = (p.m0 - quad).abs();
            if let Some(e) = prev {
                let ratio: f64 = e / err;
                assert!((ratio.log2() - 3.0).abs() < 0.15, "γ={gamma} ratio {ratio}");
            }
            prev = Some(err);
        }
    }
}

#[test]
fn large_deformation_is_flagged_not_failed() {
    let g = BallGrid::with_radius(1.0, 16, 4, 8).unwrap();
    let st = DeformationState::new(VectorField::from_fn(&g, |y| Vector3::new(0.9 * y.y, 0.0, 0.0))).unwrap();
    let rep = m0_e0(&st, 2.0);
    assert_eq!(rep.out_of_regime, g.len());
    assert!(rep.max_decomposition_defect < 1e-12);
}

fn analytic_dilation(eps: f64) -> FnTrajectory<impl Fn(f64, &Vector3<f64>, usize) -> Vector3<f64>> {
    FnTrajectory {
        f: move |t: f64, y: &Vector3<f64>, m: usize| eps * (-1.0f64).powi(m as i32) * (-t).exp() * y,
        max_m: 4,
    }
}

#[test]
fn zeroth_energy_closed_form() {
    let c = consts(2.0);
    let g = BallGrid::new(&c, 32, 4, 8).unwrap();
    let (eps, t): (f64, f64) = (1e-2, 0.7);
    let (a, b, r0) = (c.a_bar, c.b_bar, c.r0);
    // ∫σ|y|² and ∫σ² over the ball for ι = 1.
    let m1 = 4.0 * PI * (a * r0.powi(5) / 5.0 - b * r0.powi(7) / 7.0);
    let m2 = 4.0 * PI * (a * a * r0.powi(3) / 3.0 - 2.0 * a * b * r0.powi(5) / 5.0 + b * b * r0.powi(7) / 7.0);
    let exact = eps * eps * (-2.0 * t).exp() * ((2.0 + t) * m1 + 3.0 * m2);
    let (e0, notes) = energy_ej(&analytic_dilation(eps), &g, t, 0, 2.0, &Truncation::default()).unwrap();
    assert!((e0 - exact).abs() < 1e-10 * exact, "{e0} {exact}");
    assert!(notes.is_empty(), "{notes:?}");
}

#[test]
fn zero_trajectory_has_zero_functionals() {
    let c = consts(2.0);
    let g = BallGrid::new(&c, 16, 4, 8).unwrap();
    let (s, _) = energy_functionals(&analytic_dilation(0.0), &g, 0.0, 2.0, &Truncation::default()).unwrap();
    let all = [&s.e_j, &s.frak_e, &s.frak_d, &s.frak_v, &s.script_v];
    assert!(all.iter().all(|v| v.iter().all(|&x| x == 0.0)));
    assert_eq!(s.v_add, 0.0);
    assert_eq!(s.m0_integral, 0.0);
}

fn nonradial(eps: f64) -> FnTrajectory<impl Fn(f64, &Vector3<f64>, usize) -> Vector3<f64>> {
    FnTrajectory {
        f: move |t: f64, y: &Vector3<f64>, m: usize| {
            let p = Vector3::new(y.x * y.y + 0.3 * y.z, (0.8 * y.y).sin() - 0.2 * y.x, y.y * y.z - 0.5 * y.x * y.x);
            eps * (-0.5f64).powi(m as i32) * (-0.5 * t).exp() * p
        },
        max_m: 4,
    }
}

#[test]
fn energy_scales_quadratically() {
    let c = consts(2.0);
    let g = BallGrid::new(&c, 16, 4, 8).unwrap();
    let tr = Truncation::default();
    let (a, _) = energy_functionals(&nonradial(1e-2), &g, 0.3, 2.0, &tr).unwrap();
    let (b, _) = energy_functionals(&nonradial(2e-2), &g, 0.3, 2.0, &tr).unwrap();
    for j in 0..=2 {
        assert!((b.e_j[j] - 4.0 * a.e_j[j]).abs() < 1e-12 * b.e_j[j]);
    }
    assert!(a.e_total >= a.e_j.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn script_e_and_frak_e_are_equivalent_for_small_deformations() {
    let c = consts(2.0);
    let g = BallGrid::new(&c, 20, 6, 12).unwrap();
    let tr = Truncation::default();
    let mut worst: f64 = 1.0;
    for (eps, t) in [(0.02, 0.0), (0.04, 1.0), (0.05, 3.0)] {
        let (s, _) = energy_functionals(&nonradial(eps), &g, t, 2.0, &tr).unwrap();
        for j in 0..=2 {
            let r = s.e_j[j] / s.frak_e[j];
            worst = worst.max(r).max(1.0 / r);
        }
    }
    assert!(worst <= 4.0, "fitted constant {worst}");
}

fn radial(eps: f64, r0: f64) -> FnTrajectory<impl Fn(f64, &Vector3<f64>, usize) -> Vector3<f64>> {
    FnTrajectory {
        f: move |t: f64, y: &Vector3<f64>, m: usize| {
            let s2 = y.norm_squared() / (r0 * r0);
            eps * (-1.0f64).powi(m as i32) * (-t).exp() * (1.0 - s2).powi(2) * y
        },
        max_m: 4,
    }
}

#[test]
fn radial_fields_have_negligible_curl_terms() {
    let c = consts(2.0);
    let g = BallGrid::new(&c, 32, 6, 12).unwrap();
    let (s, notes) = energy_functionals(&radial(1e-2, c.r0), &g, 0.5, 2.0, &Truncation::default()).unwrap();
    let scale = s.e_total;
    assert!(scale > 0.0 && notes.is_empty());
    assert!(s.v_add < 1e-20 * scale.max(1.0) + 1e-18, "{}", s.v_add);
    assert!(s.curl_l2 < 1e-20);
    for j in 0..=2 {
        assert!(s.script_v[j] < 1e-16 * scale, "𝒱_{j} = {}", s.script_v[j]);
    }
    for term in s.terms.iter().filter(|t| t.l == 0 && t.n == 0) {
        assert!(term.frak_v < 1e-16 * scale, "{term:?}");
    }
    // With n ≥ 1 the flat curl still vanishes but the flow-map curl picks up
    // a quartic cross term, so halving ε divides it by sixteen.
    let (h, _) = energy_functionals(&radial(5e-3, c.r0), &g, 0.5, 2.0, &Truncation::default()).unwrap();
    for (a, b) in s.terms.iter().zip(&h.terms).filter(|(t, _)| t.l == 0 && t.n >= 1) {
        let ratio = a.frak_v / b.frak_v;
        assert!((ratio - 16.0).abs() < 0.5, "{a:?} ratio {ratio}");
        assert!(a.frak_v < 1e-4 * a.script_e);
    }
}

#[test]
fn truncation_is_reported() {
    let c = consts(2.0);
    let g = BallGrid::new(&c, 16, 4, 8).unwrap();
    let tr = Truncation {
        j_max: 3,
        max_time: 2,
        max_space: 2,
    };
    let short = FnTrajectory {
        f: |t: f64, y: &Vector3<f64>, _m: usize| 1e-2 * (-t).exp() * y,
        max_m: 2,
    };
    let rep = EnergyReport::collect(&short, &g, &[0.0, 0.5], 2.0, tr).unwrap();
    assert!(!rep.truncation_notes.is_empty());
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().ends_with("yes"));
    assert!(rep.to_json().unwrap().contains("truncation_notes"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sandwich_holds_below_threshold(
        entries in proptest::collection::vec(-1.0f64..1.0, 9),
        size in 0.001f64..0.1,
        gamma in 1.2f64..3.0,
    ) {
        let m = Matrix3::from_iterator(entries);
        prop_assume!(m.norm() > 1e-3);
        let e = m * (size / m.norm());
        let p = m0_e0_point(&e, gamma);
        prop_assert!(p.decomposition_defect < 1e-12);
        prop_assert!(p.lower_margin >= 0.0 && p.upper_margin >= 0.0);
    }
}
