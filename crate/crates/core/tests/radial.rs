use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vacuum_core::geometry::*;
use vacuum_core::norms::*;
use vacuum_core::radial::*;
use vacuum_core::theta::{integrate_h, verify_decay, ThetaOptions};
use vacuum_core::{derive_constants, BarenblattConstants, Error, GasParams};

fn consts(gamma: f64) -> BarenblattConstants {
    derive_constants(&GasParams::new(gamma, 1.0).unwrap(), 1e-12).unwrap()
}

fn state_with(model: &RadialModel, f: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> RadialState {
    RadialState {
        t: 0.0,
        h: 0.0,
        h_t: 0.0,
        f: model.s.iter().map(|&s| f(s)).collect(),
        f_t: model.s.iter().map(|&s| v(s)).collect(),
    }
}

/// Divergence of `σ^{ι+1}(A J^{1-γ} - Id)` for `ω = f(s) y` evaluated on the 3D grid.
fn oracle_divergence(c: &BarenblattConstants, f: &[f64], n_phi: usize, n_psi: usize) -> (BallGrid, Vec<nalgebra::Vector3<f64>>) {
    let g = BallGrid::new(c, f.len(), n_phi, n_psi).unwrap();
    let om = VectorField::from_values(&g, (0..g.len()).map(|k| f[g.unindex(k).0] * g.positions()[k]).collect()).unwrap();
    let st = DeformationState::new(om).unwrap();
    let mut out = vec![nalgebra::Vector3::zeros(); g.len()];
    for i in 0..3 {
        let col = (0..g.len())
            .map(|k| {
                let t: Matrix3<f64> =
                    (st.a_inv[k] * st.jacobian[k].powf(1.0 - c.gamma) - Matrix3::identity()) * g.sigma[k].powf(c.iota + 1.0);
                t.column(i).into_owned()
            })
            .collect();
        let d = VectorField::from_values(&g, col).unwrap().divergence().values;
        for k in 0..g.len() {
            out[k][i] = d[k];
        }
    }
    (g, out)
}

#[test]
fn reduction_matches_three_dimensional_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for gamma in [5.0 / 3.0, 2.0, 3.0] {
        let c = consts(gamma);
        let m = RadialModel::new(&c, 128).unwrap();
        let coef: Vec<f64> = (0..4).map(|_| rng.random_range(-1e-2..1e-2)).collect();
        let st = state_with(
            &m,
            |s| coef.iter().enumerate().map(|(k, a)| a * (k as f64 * s).cos()).sum(),
            |_| 0.0,
        );
        let res = m.reduce_equation(&st, &vec![0.0; m.n]).unwrap();
        let (g, div) = oracle_divergence(&c, &st.f, 4, 8);
        let mut worst = 0.0f64;
        for k in 0..g.len() {
            let i = g.unindex(k).0;
            worst = worst.max((div[k] - res.spatial[i] * g.positions()[k]).norm());
        }
        assert!(worst <= 1e-8, "γ={gamma}: {worst:e}");
    }
}

#[test]
fn zero_perturbation_has_zero_residual() {
    let c = consts(2.0);
    let m = RadialModel::new(&c, 64).unwrap();
    let st = state_with(&m, |_| 0.0, |_| 0.0);
    let res = m.reduce_equation(&st, &vec![0.0; m.n]).unwrap();
    assert!(res.total.iter().all(|&r| r == 0.0));
    let rates = m.rates(&st).unwrap();
    assert!(rates.f_tt.iter().all(|&a| a == 0.0));
}

#[test]
fn static_residual_is_the_spatial_and_mass_terms() {
    let c = consts(2.0);
    let m = RadialModel::new(&c, 64).unwrap();
    let st = RadialState {
        t: 0.3,
        ..state_with(&m, |s| 1e-3 * (1.0 - s * s / (c.r0 * c.r0)).powi(2), |_| 0.0)
    };
    let res = m.reduce_equation(&st, &vec![0.0; m.n]).unwrap();
    let (theta, _) = st.theta(2.0);
    let stiff = theta.powf(-5.0);
    for i in 0..m.n {
        let expect = stiff * (0.2 * m.sigma[i] * st.f[i] + res.spatial[i]);
        assert!((res.total[i] - expect).abs() <= 1e-15 * expect.abs().max(1e-12));
    }
}

#[test]
fn solver_acceleration_is_second_order_consistent() {
    let c = consts(2.0);
    let prof = |s: f64| 1e-2 * (1.0 - s * s / (c.r0 * c.r0)).powi(2) + 3e-3 * (2.0 * s).cos();
    let mut errs = Vec::new();
    for n in [64usize, 128, 256] {
        let m = RadialModel::new(&c, n).unwrap();
        let st = state_with(&m, prof, |s| 1e-3 * s.cos());
        let rates = m.rates(&st).unwrap();
        let res = m.reduce_equation(&st, &rates.f_tt).unwrap();
        // Fixed physical window away from the centre and the vacuum edge.
        let e = (0..n)
            .filter(|&i| m.s[i] > 0.25 * c.r0 && m.s[i] < 0.75 * c.r0)
            .map(|i| res.total[i].abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "{errs:?}");
    }
}

#[test]
fn force_is_the_gradient_of_the_potential() {
    let c = consts(2.0);
    let m = RadialModel::new(&c, 32).unwrap();
    let st = state_with(&m, |s| 2e-2 * (1.5 * s).cos(), |_| 0.0);
    let force = m.force(&st.f).unwrap();
    let h = 1e-6;
    for i in [0, 1, 7, 20, 31] {
        let mut fp = st.f.clone();
        let mut fm = st.f.clone();
        fp[i] += h;
        fm[i] -= h;
        let fd = (m.potential(&fp) - m.potential(&fm)) / (2.0 * h);
        assert!((fd - force[i]).abs() < 1e-7 * force[i].abs().max(1e-6), "node {i}: {fd} vs {}", force[i]);
    }
}

#[test]
fn unperturbed_run_stays_on_the_ansatz() {
    let out = run(&RunConfig {
        eps: 0.0,
        t_end: 100.0,
        energy_samples: 5,
        ..Default::default()
    })
    .unwrap();
    assert_eq!(out.stop, StopReason::Completed);
    assert!(out.max_f <= 1e-10);
    let c = consts(2.0);
    let path = integrate_h(2.0, 100.0, &ThetaOptions::default()).unwrap();
    let k_fit = verify_decay(&path, 2, 1e-9).unwrap().k_fit;
    for &(t, r) in out.boundary.iter().step_by(17) {
        let ratio = r / (c.r0 * (1.0 + t).powf(0.2));
        assert!(ratio >= 1.0 - 1e-12 && ratio <= k_fit + 1e-9, "t={t} ratio={ratio}");
        let (theta, _, _) = path.eval(t).unwrap();
        assert!((r / c.r0 - theta).abs() < 1e-8, "θ mismatch at t={t}");
    }
}

#[test]
fn time_stepping_is_fourth_order() {
    let c = consts(2.0);
    let m = RadialModel::new(&c, 48).unwrap();
    let start = state_with(&m, |s| 1e-2 * (1.0 - s * s / (c.r0 * c.r0)).powi(2), |s| 5e-3 * s.cos());
    let base = (0.4 / m.cfl_step(&start, 0.2)).ceil() as usize;
    let evolve = |steps: usize| {
        let dt = 0.4 / steps as f64;
        let mut st = start.clone();
        for _ in 0..steps {
            st = m.step(&st, dt).unwrap();
        }
        st
    };
    let (a, b, d) = (evolve(base), evolve(2 * base), evolve(4 * base));
    let diff = |x: &RadialState, y: &RadialState| x.f.iter().zip(&y.f).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let ratio = diff(&a, &b) / diff(&b, &d);
    assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
}

#[test]
fn single_step_energy_change_is_bounded_by_the_flux() {
    let c = consts(2.0);
    let m = RadialModel::new(&c, 64).unwrap();
    let st = state_with(&m, |s| 1e-3 * (1.0 - s * s / (c.r0 * c.r0)).powi(2), |s| 1e-3 * s.cos());
    let dt = m.cfl_step(&st, 0.2);
    let a = m.balance_sample(&st);
    let b = m.balance_sample(&m.step(&st, dt).unwrap());
    let flux = a.dissipation.abs() + a.rhs.abs();
    assert!((b.bracket - a.bracket).abs() <= 2.0 * dt * flux);
}

#[test]
fn energy_identity_defect_is_fourth_order() {
    let mut defects = Vec::new();
    for dt in [0.02, 0.01, 0.005] {
        let out = run(&RunConfig {
            eps: 1e-3,
            t_end: 2.0,
            dt: Some(dt),
            record_balance: true,
            energy_samples: 2,
            ..Default::default()
        })
        .unwrap();
        defects.push(zeroth_energy_balance(&out.balance).unwrap().max_abs_defect);
    }
    assert!(defects[0] <= 1e-6);
    for w in defects.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 3.7 && order < 4.3, "{defects:?}");
    }
}

#[test]
fn physical_mass_is_conserved_and_converges() {
    let mut errs = Vec::new();
    for n in [64usize, 128] {
        let out = run(&RunConfig {
            eps: 1e-3,
            t_end: 20.0,
            resolution: n,
            energy_samples: 6,
            ..Default::default()
        })
        .unwrap();
        errs.push(out.rows.iter().map(|r| (r.physical_mass - 1.0).abs()).fold(0.0, f64::max));
    }
    assert!(errs[1] < 1e-3 && errs[0] / errs[1] > 3.5, "{errs:?}");
}

#[test]
fn curl_functionals_vanish_along_runs() {
    let out = run(&RunConfig {
        eps: 1e-3,
        t_end: 5.0,
        energy_samples: 6,
        ..Default::default()
    })
    .unwrap();
    for s in &out.energy.samples {
        assert!(s.v_add <= 1e-20 && s.curl_l2 <= 1e-20);
        assert!(s.script_v.iter().all(|&v| v <= 1e-12 * s.e_total));
    }
    assert!(out.energy.truncation_notes.iter().any(|n| n.contains("∂_t^3")));
}

#[test]
fn stop_reasons_are_distinct() {
    let monitor = run(&RunConfig {
        t_end: 1.0,
        eps0: 1e-6,
        ..Default::default()
    })
    .unwrap();
    assert_eq!(monitor.stop, StopReason::MonitorViolation);
    let limit = run(&RunConfig {
        t_end: 1.0,
        max_steps: 3,
        ..Default::default()
    })
    .unwrap();
    assert_eq!((limit.stop, limit.steps), (StopReason::StepLimit, 3));
    let collapse = run(&RunConfig {
        t_end: 5.0,
        eps: 0.3,
        velocity_ratio: -20.0,
        eps0: 1e3,
        ..Default::default()
    })
    .unwrap();
    assert!(matches!(collapse.stop, StopReason::Degenerate | StopReason::NonFinite), "{:?}", collapse.stop);
    assert!(collapse.stop_detail.is_some());
}

#[test]
fn invalid_configs_are_rejected() {
    let base = RunConfig::default();
    for cfg in [
        RunConfig { eps: -1.0, ..base.clone() },
        RunConfig { resolution: 8, ..base.clone() },
        RunConfig { t_end: 0.0, ..base.clone() },
        RunConfig {
            family: Family::Polynomial { power: 1 },
            ..base.clone()
        },
    ] {
        assert!(matches!(run(&cfg), Err(Error::Parameter { .. })));
    }
}

#[test]
fn trajectory_csv_layout() {
    let out = run(&RunConfig {
        t_end: 1.0,
        energy_samples: 3,
        family: Family::Bump { width: 0.6 },
        ..Default::default()
    })
    .unwrap();
    let mut buf = Vec::new();
    out.write_trajectory_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,R,E0,E1,E2,V_add,stop_reason");
    assert_eq!(lines.len(), out.rows.len() + 1);
    assert!(lines.last().unwrap().ends_with("completed"));
}

#[test]
fn growth_fit_recovers_power_laws() {
    let series: Vec<(f64, f64)> = (0..400).map(|k| {
        let t = 10f64.powf(k as f64 / 100.0) - 1.0;
        (t, 1.7 * (1.0 + t).powf(0.23))
    }).collect();
    let fit = fit_growth(&series).unwrap();
    assert!((fit.exponent - 0.23).abs() < 1e-10);
    assert!(fit_growth(&series[..50]).is_err());
}

#[test]
fn boundary_grows_at_the_self_similar_rate() {
    for (gamma, expect, tol) in [(2.0, 0.2, 0.01), (5.0 / 3.0, 0.25, 0.0125)] {
        let out = run(&RunConfig {
            gamma,
            eps: 1e-3,
            t_end: 1000.0,
            energy_samples: 20,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(out.stop, StopReason::Completed);
        let fit = fit_growth(&out.boundary).unwrap();
        assert!((fit.exponent - expect).abs() <= tol, "γ={gamma}: {fit:?}");
        assert!(out.boundary.windows(2).all(|w| w[1].1 >= w[0].1));
        // Symmetric runs: the energy never exceeds its initial value.
        assert!(out.sup_energy <= 1.0 * out.rows[0].e_total * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn oracle_agrees_on_random_profiles(a in -2e-2f64..2e-2, b in -2e-2f64..2e-2, k in 0.5f64..3.0) {
        let c = consts(2.0);
        let m = RadialModel::new(&c, 32).unwrap();
        let st = state_with(&m, |s| a + b * (k * s).cos(), |_| 0.0);
        let res = m.reduce_equation(&st, &vec![0.0; m.n]).unwrap();
        let (g, div) = oracle_divergence(&c, &st.f, 4, 8);
        for kk in 0..g.len() {
            let i = g.unindex(kk).0;
            prop_assert!((div[kk] - res.spatial[i] * g.positions()[kk]).norm() < 1e-12);
        }
    }

    #[test]
    fn uniform_dilation_feels_no_spurious_centre_force(a in -5e-2f64..5e-2) {
        // With σ ≡ const only the last cell sees a net force.
        let c = BarenblattConstants { b_bar: 0.0, ..consts(2.0) };
        let m = RadialModel::new(&c, 24).unwrap();
        let f = m.force(&vec![a; m.n]).unwrap();
        let scale = f[m.n - 1].abs().max(1e-300);
        prop_assert!(f[..m.n - 1].iter().all(|x| x.abs() <= 1e-12 * scale));
    }
}
