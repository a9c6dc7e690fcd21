//! The verification suites behind each subcommand.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};

use vacuum_core::geometry::*;
use vacuum_core::norms::*;
use vacuum_core::params::{mass_check, pme_darcy_residual};
use vacuum_core::radial::*;
use vacuum_core::theta::*;
use vacuum_core::{derive_constants, BarenblattConstants, GasParams};

use crate::config::{Config, Format};
use crate::report::{Check, SuiteReport};

pub type SuiteResult = Result<SuiteReport, Box<dyn std::error::Error>>;

pub const SUITES: [&str; 7] = ["constants", "barenblatt-check", "theta", "liu", "identities", "hardy", "radial"];

/// Largest accepted `sup 𝓔 / 𝓔(0)` for symmetric runs.
pub const ENERGY_GROWTH_CEILING: f64 = 1.0 + 1e-9;

pub fn run_suite(name: &str, cfg: &Config, dir: &Path) -> SuiteResult {
    match name {
        "constants" => constants(cfg),
        "barenblatt-check" => barenblatt_check(cfg),
        "theta" => theta(cfg, dir),
        "liu" => liu(cfg, dir),
        "identities" => identities(cfg),
        "hardy" => hardy(cfg),
        "radial" => radial(cfg, dir),
        "report" => report(cfg, dir),
        other => Err(format!("unknown suite `{other}`").into()),
    }
}

fn barenblatt(cfg: &Config) -> Result<BarenblattConstants, vacuum_core::Error> {
    derive_constants(&GasParams::new(cfg.gamma, cfg.mass)?, 1e-12)
}

fn write_series(
    dir: &Path,
    stem: &str,
    format: Format,
    csv: impl FnOnce(&mut Vec<u8>) -> Result<(), vacuum_core::Error>,
    json: &impl Serialize,
) -> Result<PathBuf, Box<dyn std::error::Error>> {
    std::fs::create_dir_all(dir)?;
    let (path, bytes) = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            csv(&mut buf)?;
            (dir.join(format!("{stem}.csv")), buf)
        }
        Format::Json => (dir.join(format!("{stem}.json")), (serde_json::to_string_pretty(json)? + "\n").into_bytes()),
    };
    std::fs::write(&path, bytes)?;
    Ok(path)
}

pub fn constants(cfg: &Config) -> SuiteResult {
    let c = barenblatt(cfg)?;
    let mut rep = SuiteReport::new("constants", cfg);
    rep.fit("a_bar", c.a_bar);
    rep.fit("b_bar", c.b_bar);
    rep.fit("r0", c.r0);
    rep.fit("iota", c.iota);
    rep.fit("moment", c.moment);
    rep.fit("growth_exponent", 1.0 / (3.0 * c.gamma - 1.0));
    rep.check(Check::at_most("moment_quadrature_gap", c.moment_tol, 1e-12));
    let m = mass_check(&c, 0.0, 64)?;
    rep.check(Check::at_most("initial_mass_relative_error", (m / cfg.mass - 1.0).abs(), 1e-7));
    rep.check(Check::at_most("edge_density_vanishes", c.rho0_bar(&Vector3::new(c.r0, 0.0, 0.0)), 0.0));
    Ok(rep)
}

/// Points drawn uniformly from the ball of radius `0.8 R̄(t)`.
fn interior_points(c: &BarenblattConstants, t: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let r = 0.8 * c.radius(t);
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let u = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if u.norm() <= 1.0 {
            pts.push(u * r);
        }
    }
    pts
}

pub fn barenblatt_check(cfg: &Config) -> SuiteResult {
    let c = barenblatt(cfg)?;
    let mut rep = SuiteReport::new("barenblatt-check", cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t = 1.0;
    let pts = interior_points(&c, t, 20, &mut rng);
    let h = 2e-3;
    let worst = |h: f64| -> Result<(f64, f64), vacuum_core::Error> {
        let mut w = (0.0f64, 0.0f64);
        for x in &pts {
            let r = pme_darcy_residual(&c, t, x, h)?;
            w = (w.0.max(r.pme), w.1.max(r.darcy));
        }
        Ok(w)
    };
    let (p1, d1) = worst(h)?;
    let (p2, d2) = worst(h / 2.0)?;
    let pme_order = (p1 / p2).log2();
    let darcy_order = (d1 / d2).log2();
    rep.fit("pme_residual_h", p1);
    rep.fit("pme_residual_h2", p2);
    rep.fit("darcy_residual_h", d1);
    rep.fit("darcy_residual_h2", d2);
    rep.check(Check::near("pme_convergence_order", pme_order, 2.0, 0.2));
    rep.check(Check::near("darcy_convergence_order", darcy_order, 2.0, 0.2));
    for t in [0.0, 1.0, 10.0, 100.0] {
        let m = mass_check(&c, t, 64)?;
        rep.check(Check::at_most(format!("mass_relative_error_t{t}"), (m / cfg.mass - 1.0).abs(), 1e-7));
    }
    Ok(rep)
}

fn theta_options(cfg: &Config, scale: f64) -> ThetaOptions {
    ThetaOptions {
        rtol: cfg.ode.rtol * scale,
        atol: cfg.ode.atol * scale,
        samples: cfg.ode.samples,
        ..Default::default()
    }
}

pub fn theta(cfg: &Config, dir: &Path) -> SuiteResult {
    let t_end = cfg.t_end_or(1e4);
    let path = integrate_h(cfg.gamma, t_end, &theta_options(cfg, 1.0))?;
    let decay = verify_decay(&path, 2, 1e-10)?;
    let fine = verify_decay(&integrate_h(cfg.gamma, t_end, &theta_options(cfg, 0.5))?, 2, 1e-10)?;
    let mut rep = SuiteReport::new("theta", cfg);
    rep.fit("K", decay.k_fit);
    for (k, c) in decay.c_fit.iter().enumerate() {
        rep.fit(&format!("C{k}"), *c);
    }
    rep.fit("error_estimate", path.error_estimate);
    rep.check(Check::at_most("lower_bound_violation", decay.lower_violation, 1e-10));
    rep.check(Check::at_most("monotonicity_violation", decay.monotone_violation, 1e-10));
    rep.check(Check::holds("constants_finite", decay.c_fit.iter().all(|c| c.is_finite())));
    rep.check(Check::at_most("K_change_under_halved_tolerance", (decay.k_fit / fine.k_fit - 1.0).abs(), 0.01));
    rep.check(Check::at_most("C2_change_under_halved_tolerance", (decay.c_fit[2] / fine.c_fit[2] - 1.0).abs(), 0.01));
    let out = write_series(dir, "theta_path", cfg.output.format, |b| path.write_csv(b), &path)?;
    rep.artifacts.push(out);
    Ok(rep)
}

#[derive(Serialize)]
struct LiuSeries<'a> {
    kick: f64,
    deviation: &'a LiuDeviation,
}

/// Kicks the Barenblatt velocity coefficient by `solver.eps` and follows the
/// Liu system against the self-similar coefficients.
pub fn liu(cfg: &Config, dir: &Path) -> SuiteResult {
    let c = barenblatt(cfg)?;
    let t_end = cfg.t_end_or(1e5);
    let mut init = liu_barenblatt(&c, 0.0);
    init.a += cfg.solver.eps;
    let opts = LiuOptions {
        rtol: cfg.ode.rtol,
        atol: 1e-20,
        samples: cfg.ode.samples.max(100),
    };
    let dev = liu_vs_barenblatt(&c, init, t_end, &opts)?;
    let mut rep = SuiteReport::new("liu", cfg);
    rep.fit("kick", cfg.solver.eps);
    rep.fit("bound_constant", dev.bound_constant);
    rep.fit("last_decade_slope", dev.last_decade_slope);
    rep.check(Check::at_most("scaled_deviation_trend", dev.last_decade_slope.abs(), 0.05));
    rep.check(Check::at_most("mass_drift", dev.max_mass_drift, 1e-8));
    let csv = |b: &mut Vec<u8>| {
        use std::io::Write;
        let mut text = String::from("t,scaled_deviation,mass\n");
        for ((t, d), m) in dev.times.iter().zip(&dev.scaled_deviation).zip(&dev.mass) {
            text += &format!("{t:.17e},{d:.17e},{m:.17e}\n");
        }
        b.write_all(text.as_bytes()).map_err(vacuum_core::Error::from)
    };
    let out = write_series(dir, "liu_deviation", cfg.output.format, csv, &LiuSeries { kick: cfg.solver.eps, deviation: &dev })?;
    rep.artifacts.push(out);
    Ok(rep)
}

fn quadratic_omega(y: &Vector3<f64>) -> Vector3<f64> {
    0.05 * Vector3::new(
        y.x * y.y - 0.3 * y.z * y.z + 0.2 * y.x,
        0.4 * y.x * y.z + y.y * y.y - 0.1 * y.z,
        -0.2 * y.x * y.x + 0.5 * y.y * y.z + 0.3 * y.y,
    )
}

fn smooth_omega(y: &Vector3<f64>) -> Vector3<f64> {
    0.05 * Vector3::new((1.3 * y.y).sin() * y.z.cos(), (0.7 * y.x + 0.4 * y.z).sin(), (y.x * y.y).cos() - 1.0)
}

fn random_gradient(rng: &mut ChaCha8Rng, size: f64) -> Matrix3<f64> {
    let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    m * (size / m.norm())
}

pub fn identities(cfg: &Config) -> SuiteResult {
    let (n, np, ns) = (cfg.grid.radial, cfg.grid.n_phi, cfg.grid.n_psi);
    let mut rep = SuiteReport::new("identities", cfg);
    let g = BallGrid::with_radius(1.2, n, np, ns)?;

    let st = DeformationState::new(VectorField::from_fn(&g, smooth_omega))?;
    rep.check(Check::at_most("determinant_expansion", st.expansion_defect, 1e-12));
    rep.check(Check::at_most("cofactor_inverse", st.inverse_defect, 1e-12));
    let adj = st
        .grad_omega
        .values
        .iter()
        .zip(&st.adjugate)
        .map(|(e, b)| (e * b - Matrix3::identity() * e.determinant()).abs().max())
        .fold(0.0, f64::max);
    rep.check(Check::at_most("adjugate_rows", adj, 1e-12));

    let quad = DeformationState::new(VectorField::from_fn(&g, quadratic_omega))?;
    rep.check(Check::at_most("piola_quadratic", piola_residual(&quad).max_abs(), 1e-10));

    let omega = FnFamily(|t: f64, y: &Vector3<f64>| t * quadratic_omega(y), |_t: f64, y: &Vector3<f64>| quadratic_omega(y));
    let f = FnFamily(
        |t: f64, y: &Vector3<f64>| Vector3::new(y.y * y.z + t * y.x, (1.0 + t * t) * y.x * y.x, y.z - t * y.y * y.x),
        |t: f64, y: &Vector3<f64>| Vector3::new(y.x, 2.0 * t * y.x * y.x, -y.y * y.x),
    );
    let d = identity_nabt_nab(&g, &omega, &f, 0.5, 1e-3)?;
    rep.check(Check::at_most("nab_defect", d.nab, 1e-8));
    rep.check(Check::at_most("nabt_defect", d.nabt, 1e-8));

    let poly = ScalarField::from_fn(&g, |y| y.x * y.x * y.y - 2.0 * y.y * y.z + y.z * y.z * y.z);
    let comm = (0..9).map(|k| commutator_base_defect(&poly, k / 3, k % 3)).fold(0.0, f64::max);
    rep.check(Check::at_most("commutator_base_case", comm, 1e-10));

    rep.check(Check::at_most("curl_eta_eta", curl_eta_eta(&st), 1e-12));
    let curl_grad = |n: usize| -> Result<f64, vacuum_core::Error> {
        let g = BallGrid::with_radius(1.2, n, 16, 32)?;
        let st = DeformationState::new(VectorField::from_fn(&g, smooth_omega))?;
        let f = ScalarField::from_fn(&g, |y| (0.8 * y.x).sin() * (0.5 * y.y + y.z).cos());
        Ok(curl_eta_grad(&st, &f))
    };
    let (a, b) = (curl_grad(24)?, curl_grad(48)?);
    rep.fit("curl_eta_grad_24", a);
    rep.fit("curl_eta_grad_48", b);
    rep.check(Check::at_most("curl_eta_grad", a, 1e-3));
    // Composed derivatives lose one order at the boundary stencils.
    rep.check(Check::at_least("curl_eta_grad_refinement_ratio", a / b, 7.0));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut lo, mut hi, mut dec) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    for _ in 0..100 {
        let size = rng.random_range(1e-3..=DEFAULT_SMALLNESS);
        let p = m0_e0_point(&random_gradient(&mut rng, size), cfg.gamma);
        lo = lo.min(p.lower_margin);
        hi = hi.min(p.upper_margin);
        dec = dec.max(p.decomposition_defect);
    }
    rep.check(Check::at_least("m0_sandwich_lower_margin", lo, 0.0));
    rep.check(Check::at_least("m0_sandwich_upper_margin", hi, 0.0));
    rep.check(Check::at_most("m0_decomposition", dec, 1e-12));
    let coarse = BallGrid::with_radius(1.0, 16, 4, 8)?;
    let large = DeformationState::new(VectorField::from_fn(&coarse, |y| Vector3::new(0.9 * y.y, 0.0, 0.0)))?;
    let flagged = m0_e0(&large, cfg.gamma);
    rep.check(Check::holds("large_deformation_flagged", flagged.out_of_regime == coarse.len()));
    Ok(rep)
}

/// Largest `∫r^k p²/∫r^{k+2}(p² + p'²)` over polynomials of degree below `n` on (0,1).
pub fn polynomial_hardy_constant(k: f64, n: usize) -> f64 {
    let l = DMatrix::from_fn(n, n, |i, j| 1.0 / (k + (i + j) as f64 + 1.0));
    let r = DMatrix::from_fn(n, n, |i, j| {
        let mut v = 1.0 / (k + (i + j) as f64 + 3.0);
        if i > 0 && j > 0 {
            v += (i * j) as f64 / (k + (i + j) as f64 + 1.0);
        }
        v
    });
    let linv = r.cholesky().expect("Gram matrix is positive definite").l().try_inverse().expect("triangular");
    (&linv * l * linv.transpose()).symmetric_eigenvalues().max()
}

pub fn hardy(cfg: &Config) -> SuiteResult {
    let c = barenblatt(cfg)?;
    let mut rep = SuiteReport::new("hardy", cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for (label, k) in [("0", 0.0), ("iota", c.iota), ("iota+1", c.iota + 1.0)] {
        let ceiling = polynomial_hardy_constant(k, 5) * (1.0 + 1e-10);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let a: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = |r: f64| {
                let v = a.iter().rev().fold(0.0, |acc, ai| acc * r + ai);
                let d = (1..5).rev().fold(0.0, |acc, i| acc * r + i as f64 * a[i]);
                (v, d)
            };
            worst = worst.max(hardy_check(&f, k, 1.0, 3, 16, ceiling)?.ratio);
        }
        rep.fit(&format!("hardy_ceiling_k={label}"), ceiling);
        rep.check(Check::at_most(format!("hardy_ratio_k={label}"), worst, ceiling));
    }

    let g = BallGrid::new(&c, cfg.grid.radial, 4, 8)?;
    let mut ratios = Vec::new();
    for n in 1..=10 {
        let f = ScalarField::from_fn(&g, |y| (n as f64 * y.norm()).cos());
        ratios.push(embedding_check(&f, 2.0, 1)?.ratio);
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    rep.fit("embedding_ratio_first", ratios[0]);
    rep.fit("embedding_ratio_max", max);
    rep.check(Check::at_most("embedding_ratio_growth", max / ratios[0], 2.0));
    Ok(rep)
}

#[derive(Serialize)]
struct RadialSeries<'a> {
    stop: StopReason,
    rows: &'a [TrajectoryRow],
    energy: &'a EnergyReport,
}

/// Solver run plus the symmetric-case invariants, the energy-identity
/// refinement study and the reduction oracle.
pub fn radial(cfg: &Config, dir: &Path) -> SuiteResult {
    let t_end = cfg.t_end_or(1e3);
    let rc = cfg.run_config(t_end);
    let out = run(&rc)?;
    let mut rep = SuiteReport::new("radial", cfg);
    rep.fit("steps", out.steps as f64);
    rep.fit("max_f", out.max_f);
    rep.fit("sup_energy", out.sup_energy);
    if let Some(d) = &out.stop_detail {
        rep.notes.push(format!("stop detail: {d}"));
    }
    rep.notes.extend(out.energy.truncation_notes.iter().cloned());
    rep.check(Check::holds(format!("run_completed ({})", out.stop.label()), out.stop == StopReason::Completed));

    let q = 1.0 / (3.0 * cfg.gamma - 1.0);
    if 1.0 + t_end >= 100.0 {
        let fit = fit_growth(&out.boundary)?;
        rep.fit("growth_exponent", fit.exponent);
        rep.fit("growth_ci_low", fit.ci_low);
        rep.fit("growth_ci_high", fit.ci_high);
        rep.check(Check::near("growth_exponent", fit.exponent, q, 0.05 * q));
    } else {
        rep.notes.push("growth exponent not fitted: the run spans less than two decades of 1+t".into());
    }
    if !out.boundary.windows(2).all(|w| w[1].1 >= w[0].1) {
        rep.notes.push("boundary radius decreased at some sample".into());
    }

    let e0 = out.rows.first().map_or(0.0, |r| r.e_total);
    let v_add = out.energy.samples.iter().map(|s| s.v_add).fold(0.0, f64::max);
    rep.check(Check::at_most("curl_v_add", v_add, 1e-12 * e0 + 1e-20));
    let script_v = out
        .energy
        .samples
        .iter()
        .flat_map(|s| s.script_v.iter().map(move |v| v / s.e_total.max(1e-300)))
        .fold(0.0, f64::max);
    rep.check(Check::at_most("curl_script_v_relative", script_v, 1e-12));
    if e0 > 0.0 {
        rep.fit("energy_growth", out.sup_energy / e0);
        rep.check(Check::at_most("energy_growth", out.sup_energy / e0, ENERGY_GROWTH_CEILING));
    } else {
        rep.check(Check::at_most("unperturbed_f", out.max_f, 1e-10));
    }
    if e0 > 0.0 && out.stop == StopReason::Completed {
        let half = run(&crate::config::Config {
            solver: crate::config::SolverConfig {
                eps: 0.5 * cfg.solver.eps,
                ..cfg.solver.clone()
            },
            ..cfg.clone()
        }
        .run_config(t_end))?;
        rep.fit("amplitude_scaling", out.sup_energy / half.sup_energy);
        rep.check(Check::near("amplitude_scaling", out.sup_energy / half.sup_energy, 4.0, 0.8));
    }

    let mass_err = out.rows.iter().map(|r| (r.physical_mass / cfg.mass - 1.0).abs()).fold(0.0, f64::max);
    let n = cfg.grid.radial as f64;
    rep.fit("physical_mass_error", mass_err);
    // Second-order budget, about 1.2e-3 at 64 nodes.
    rep.check(Check::at_most("physical_mass", mass_err, 5.0 / (n * n)));

    let mut defects = Vec::new();
    for dt in [0.02, 0.01, 0.005] {
        let b = run(&RunConfig {
            t_end: 2.0,
            dt: Some(dt),
            record_balance: true,
            energy_samples: 2,
            eps: cfg.solver.eps.max(1e-3),
            // The identity holds whatever the monitor says.
            eps0: 1.0,
            ..rc.clone()
        })?;
        defects.push(zeroth_energy_balance(&b.balance)?.max_abs_defect);
    }
    for (k, w) in defects.windows(2).enumerate() {
        rep.fit(&format!("balance_defect_{k}"), w[0]);
        rep.check(Check::near(format!("energy_balance_order_{k}"), (w[0] / w[1]).log2(), 4.0, 0.3));
    }

    let worst = reduction_oracle(&barenblatt(cfg)?, 128, 10, cfg.seed)?;
    rep.fit("reduction_oracle_max", worst);
    rep.check(Check::at_most("reduction_oracle", worst, 1e-8));

    let csv = |b: &mut Vec<u8>| out.write_trajectory_csv(b);
    let series = RadialSeries {
        stop: out.stop,
        rows: &out.rows,
        energy: &out.energy,
    };
    rep.artifacts.push(write_series(dir, "radial_trajectory", cfg.output.format, csv, &series)?);
    if cfg.output.format == Format::Csv {
        let mut buf = Vec::new();
        out.energy.write_csv(&mut buf)?;
        let p = dir.join("radial_energy.csv");
        std::fs::write(&p, buf)?;
        rep.artifacts.push(p);
    }
    Ok(rep)
}

/// Largest gap between the reduced spatial operator and the divergence of
/// `σ^{ι+1}(A J^{1-γ} - Id)` computed on the 3D grid, over random profiles.
pub fn reduction_oracle(c: &BarenblattConstants, n: usize, profiles: usize, seed: u64) -> Result<f64, vacuum_core::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = RadialModel::new(c, n)?;
    let g = BallGrid::new(c, n, 4, 8)?;
    let mut worst = 0.0f64;
    for _ in 0..profiles {
        let coef: Vec<f64> = (0..4).map(|_| rng.random_range(-1e-2..1e-2)).collect();
        let f: Vec<f64> = m.s.iter().map(|&s| coef.iter().enumerate().map(|(k, a)| a * (k as f64 * s).cos()).sum()).collect();
        let st = RadialState {
            t: 0.0,
            h: 0.0,
            h_t: 0.0,
            f_t: vec![0.0; n],
            f,
        };
        let res = m.reduce_equation(&st, &vec![0.0; n])?;
        let om = VectorField::from_values(&g, (0..g.len()).map(|k| st.f[g.unindex(k).0] * g.positions()[k]).collect())?;
        let ds = DeformationState::new(om)?;
        let mut div = vec![Vector3::zeros(); g.len()];
        for i in 0..3 {
            let col = (0..g.len())
                .map(|k| {
                    let t: Matrix3<f64> = (ds.a_inv[k] * ds.jacobian[k].powf(1.0 - c.gamma) - Matrix3::identity())
                        * g.sigma[k].powf(c.iota + 1.0);
                    t.column(i).into_owned()
                })
                .collect();
            for (k, d) in VectorField::from_values(&g, col)?.divergence().values.into_iter().enumerate() {
                div[k][i] = d;
            }
        }
        for (k, d) in div.iter().enumerate() {
            let i = g.unindex(k).0;
            worst = worst.max((d - res.spatial[i] * g.positions()[k]).norm());
        }
    }
    Ok(worst)
}

/// Every suite in turn; each also writes its own report.
pub fn report(cfg: &Config, dir: &Path) -> SuiteResult {
    let mut rep = SuiteReport::new("report", cfg);
    for name in SUITES {
        let sub = run_suite(name, cfg, dir)?;
        rep.artifacts.push(sub.write(dir)?);
        rep.artifacts.extend(sub.artifacts.iter().cloned());
        for (k, v) in &sub.fitted {
            rep.fitted.insert(format!("{name}/{k}"), *v);
        }
        for c in &sub.checks {
            rep.check(Check {
                name: format!("{name}/{}", c.name),
                ..c.clone()
            });
        }
    }
    Ok(rep)
}
