use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use vacuum_core::geometry::*;
use vacuum_core::{derive_constants, GasParams};

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

#[test]
fn gradient_of_r_squared() {
    let g = BallGrid::with_radius(1.5, 32, 4, 8).unwrap();
    let f = ScalarField::from_fn(&g, |y| y.norm_squared());
    for (y, d) in g.positions().iter().zip(f.gradient().values) {
        assert!((d - 2.0 * y).norm() < 1e-11);
    }
}

#[test]
fn sigma_is_annihilated_by_angular_derivatives() {
    let c = derive_constants(&GasParams::new(2.0, 1.0).unwrap(), 1e-12).unwrap();
    let g = BallGrid::new(&c, 24, 5, 10).unwrap();
    let sigma = ScalarField::from_values(&g, g.sigma.clone()).unwrap();
    assert!(sigma.angular().max_norm() < 1e-14);
}

#[test]
fn piola_vanishes_for_quadratic_deformations() {
    let g = BallGrid::with_radius(1.2, 32, 6, 12).unwrap();
    let st = DeformationState::new(VectorField::from_fn(&g, quadratic_omega)).unwrap();
    let r = piola_residual(&st).max_abs();
    assert!(r < 1e-10, "{r}");
    assert!(st.expansion_defect < 1e-12);
    assert!(st.inverse_defect < 1e-12);
}

// Differentiating a fourth-order Jacobian once more costs one order near the
// one-sided boundary stencils, so composed operators converge at third order.
#[test]
fn piola_residual_converges_under_refinement() {
    let res = |n: usize| {
        let g = BallGrid::with_radius(1.2, n, 16, 32).unwrap();
        let st = DeformationState::new(VectorField::from_fn(&g, smooth_omega)).unwrap();
        piola_residual(&st).max_abs()
    };
    let (a, b, c) = (res(24), res(48), res(96));
    assert!(a / b > 7.0 && b / c > 7.0, "{a} {b} {c}");
}

#[test]
fn flow_ops_are_flat_without_deformation() {
    let g = BallGrid::with_radius(1.0, 16, 4, 8).unwrap();
    let st = DeformationState::new(VectorField::zeros(&g)).unwrap();
    let f = VectorField::from_fn(&g, quadratic_omega);
    let ops = flow_ops(&st, &f);
    let jac = f.jacobian();
    for n in 0..g.len() {
        assert!((ops.grad[n] - jac.values[n]).norm() == 0.0);
        assert!((ops.div[n] - jac.values[n].trace()).abs() == 0.0);
    }
}

#[test]
fn curl_of_eta_and_of_gradients() {
    let g = BallGrid::with_radius(1.2, 32, 8, 16).unwrap();
    let st = DeformationState::new(VectorField::from_fn(&g, smooth_omega)).unwrap();
    assert!(curl_eta_eta(&st) < 1e-13);

    let defect = |n: usize| {
        let g = BallGrid::with_radius(1.2, n, 16, 32).unwrap();
        let st = DeformationState::new(VectorField::from_fn(&g, smooth_omega)).unwrap();
        let f = ScalarField::from_fn(&g, |y| (0.8 * y.x).sin() * (0.5 * y.y + y.z).cos());
        curl_eta_grad(&st, &f)
    };
    let (a, b) = (defect(24), defect(48));
    assert!(a < 1e-3 && a / b > 7.0, "{a} {b}");
}

#[test]
fn nab_with_eta_gives_three() {
    let g = BallGrid::with_radius(1.2, 24, 6, 12).unwrap();
    let st = DeformationState::new(VectorField::from_fn(&g, smooth_omega)).unwrap();
    let eta = VectorField::from_fn(&g, |y| y + smooth_omega(y));
    // Discrete η has Jacobian Id + ∂ω, so ∇_η η = Id up to rounding.
    let ops = flow_ops(&st, &eta);
    for m in &ops.grad {
        assert!((m - Matrix3::identity()).norm() < 1e-9);
        assert!(((m * m).trace() - 3.0).abs() < 1e-8);
    }
    assert!(nab_defect(&st, &eta) < 1e-12);
}

#[test]
fn nab_identities_on_analytic_families() {
    let g = BallGrid::with_radius(1.2, 64, 6, 12).unwrap();
    let omega = FnFamily(|t: f64, y: &Vector3<f64>| t * quadratic_omega(y), |_t: f64, y: &Vector3<f64>| quadratic_omega(y));
    let f = FnFamily(
        |t: f64, y: &Vector3<f64>| Vector3::new(y.y * y.z + t * y.x, (1.0 + t * t) * y.x * y.x, y.z - t * y.y * y.x),
        |t: f64, y: &Vector3<f64>| Vector3::new(y.x, 2.0 * t * y.x * y.x, -y.y * y.x),
    );
    let d = identity_nabt_nab(&g, &omega, &f, 0.5, 1e-3).unwrap();
    assert!(d.nab < 1e-10, "{d:?}");
    assert!(d.nabt < 1e-8, "{d:?}");
    let still = FnFamily(|_t: f64, _y: &Vector3<f64>| Vector3::zeros(), |_t: f64, _y: &Vector3<f64>| Vector3::zeros());
    let d0 = identity_nabt_nab(&g, &still, &f, 0.5, 1e-3).unwrap();
    assert!(d0.nab < 1e-10 && d0.nabt < 1e-8, "{d0:?}");
}

#[test]
fn commutator_base_case_is_exact_for_polynomials() {
    let g = BallGrid::with_radius(1.0, 24, 6, 12).unwrap();
    let f = ScalarField::from_fn(&g, |y| y.x * y.x * y.y - 2.0 * y.y * y.z + y.z * y.z * y.z);
    for i in 0..3 {
        for l in 0..3 {
            assert!(commutator_base_defect(&f, i, l) < 1e-10);
        }
    }
    for m in 0..3 {
        let lin = ScalarField::from_fn(&g, move |y| y[m]);
        for i in 0..3 {
            for l in 0..3 {
                let comm = lin.partial(l).angular_derivative(i).values.iter().zip(lin.angular_derivative(i).partial(l).values)
                    .map(|(a, b)| a - b).collect::<Vec<_>>();
                let expected = -levi_civita(i, l, m);
                assert!(comm.iter().all(|c| (c - expected).abs() < 1e-12));
            }
        }
    }
}

#[test]
fn commutator_trivial_and_radial_cases() {
    let c = derive_constants(&GasParams::new(2.0, 1.0).unwrap(), 1e-12).unwrap();
    let g = BallGrid::new(&c, 24, 6, 12).unwrap();
    let f = ScalarField::from_fn(&g, |y| (y.x + 0.3 * y.y).sin());
    assert_eq!(commutator_defect(&f, &[0, 1], &[]).unwrap().max_commutator, 0.0);
    // For radial f the inner ∂̄ kills f, so the commutator is ∂̄^β ∂^α f alone,
    // which does not vanish: [∂̄₃, ∂₁]σ = -∂₂σ.
    let radial = ScalarField::from_values(&g, g.sigma.clone()).unwrap();
    assert!(apply_partials(&apply_angular(&radial, &[2]), &[0]).max_abs() < 1e-13);
    let rep = commutator_defect(&radial, &[0], &[2]).unwrap();
    let d2 = radial.partial(1).max_abs();
    assert!((rep.max_commutator - d2).abs() < 1e-10, "{rep:?} {d2}");
    assert!(rep.c_fit > 0.9 && rep.c_fit <= 1.0 + 1e-12);
    let general = commutator_defect(&f, &[0, 2], &[1, 2]).unwrap();
    assert!(general.c_fit.is_finite() && general.c_fit < 50.0, "{general:?}");
    assert!(commutator_defect(&f, &[0, 1, 2], &[0, 1]).is_err());
}

#[test]
fn bounds_near_identity() {
    let g = BallGrid::with_radius(1.0, 24, 6, 12).unwrap();
    let st = DeformationState::new(VectorField::from_fn(&g, |y| 0.5 * smooth_omega(y))).unwrap();
    let (cj, ca) = st.fitted_constants();
    assert!(cj <= 10.0 && ca <= 10.0, "{cj} {ca}");
    assert!(st.in_regime());
}

fn small_matrix() -> impl Strategy<Value = Matrix3<f64>> {
    proptest::collection::vec(-1.0f64..1.0, 9).prop_map(|v| Matrix3::from_iterator(v))
}

proptest! {
    #[test]
    fn adjugate_inverts(m in small_matrix(), scale in 0.0f64..0.3) {
        let e = m * scale;
        let b = adjugate(&e);
        prop_assert!((e * b - Matrix3::identity() * e.determinant()).abs().max() < 1e-12);
        prop_assert!(((Matrix3::identity() + e).determinant() - determinant_expansion(&e)).abs() < 1e-12);
    }

    #[test]
    fn flow_gradient_equivalence(m in small_matrix(), df in proptest::collection::vec(-1.0f64..1.0, 3)) {
        // |∂ω| ≤ 0.1 keeps |∇_η f| within a factor two of |∂f|.
        let e = m * (0.1 / m.norm().max(1e-12));
        let a = (Matrix3::identity() + e).try_inverse().unwrap();
        let d = Vector3::new(df[0], df[1], df[2]);
        let flow = a.transpose() * d;
        prop_assert!(flow.norm() <= 2.0 * d.norm() + 1e-15);
        prop_assert!(flow.norm() >= 0.5 * d.norm() - 1e-15);
    }
}
