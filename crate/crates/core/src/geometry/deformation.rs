use nalgebra::{Matrix3, Vector3};

use super::field::{curl_of, ScalarField, TensorField, VectorField};
use crate::error::{Error, Result};

/// Default bound on `|∂ω|` inside which the small-deformation estimates are
/// expected to hold.
pub const DEFAULT_SMALLNESS: f64 = 0.1;

/// Adjugate with `m · adj(m) = adj(m) · m = det(m) Id`. Its rows are the
/// cross products of consecutive columns of `m`.
pub fn adjugate(m: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = m.column(0).into_owned();
    let c1 = m.column(1).into_owned();
    let c2 = m.column(2).into_owned();
    Matrix3::from_rows(&[
        c1.cross(&c2).transpose(),
        c2.cross(&c0).transpose(),
        c0.cross(&c1).transpose(),
    ])
}

/// `det(Id + E) = 1 + div ω + ½(|div ω|² + |curl ω|² - |E|²) + det E`
/// with `E = ∂ω`.
pub fn determinant_expansion(e: &Matrix3<f64>) -> f64 {
    let div = e.trace();
    let curl = curl_of(e);
    1.0 + div + 0.5 * (div * div + curl.norm_squared() - e.norm_squared()) + e.determinant()
}

/// The full contraction `b^s_r ∂_s ω^r` with `b = adj(∂ω)`. It equals three
/// times the cubic invariant `det ∂ω`, so it cannot stand in for it in the
/// determinant expansion.
pub fn adjugate_contraction(e: &Matrix3<f64>) -> f64 {
    (adjugate(e) * e).trace()
}

/// `∂ω`, its adjugate, `J`, `JA` and `A = (Id + ∂ω)^{-1}` at every node.
#[derive(Debug, Clone)]
pub struct DeformationState<'g> {
    pub omega: VectorField<'g>,
    pub grad_omega: TensorField<'g>,
    /// `b = adj(∂ω)`.
    pub adjugate: Vec<Matrix3<f64>>,
    pub jacobian: Vec<f64>,
    /// `JA = adj(Id + ∂ω) = (1 + div ω) Id - ∂ω + b`.
    pub ja: Vec<Matrix3<f64>>,
    /// `A`, indexed `a[(k, i)] = A^k_i`.
    pub a_inv: Vec<Matrix3<f64>>,
    /// Largest gap between `J` and its invariant expansion.
    pub expansion_defect: f64,
    /// Largest `|(Id + ∂ω) A - Id|` over nodes with `J ≥ ½`.
    pub inverse_defect: f64,
    pub max_grad: f64,
    pub smallness: f64,
}

impl<'g> DeformationState<'g> {
    pub fn new(omega: VectorField<'g>) -> Result<Self> {
        Self::with_smallness(omega, DEFAULT_SMALLNESS)
    }

    pub fn with_smallness(omega: VectorField<'g>, smallness: f64) -> Result<Self> {
        let grad = omega.jacobian();
        Self::from_gradient(omega, grad, smallness)
    }

    /// Builds the state from a known `∂ω` (for instance an exact one).
    pub fn from_gradient(omega: VectorField<'g>, grad_omega: TensorField<'g>, smallness: f64) -> Result<Self> {
        let n = grad_omega.values.len();
        let mut adj = Vec::with_capacity(n);
        let mut jac = Vec::with_capacity(n);
        let mut ja = Vec::with_capacity(n);
        let mut a_inv = Vec::with_capacity(n);
        let mut expansion_defect = 0.0f64;
        let mut inverse_defect = 0.0f64;
        let mut max_grad = 0.0f64;
        for (node, e) in grad_omega.values.iter().enumerate() {
            let b = adjugate(e);
            let eta = Matrix3::identity() + e;
            let j = eta.determinant();
            if !(j > 0.0) {
                return Err(Error::Degenerate { node, jacobian: j });
            }
            let ja_n = Matrix3::identity() * (1.0 + e.trace()) - e + b;
            let a = ja_n / j;
            expansion_defect = expansion_defect.max((j - determinant_expansion(e)).abs());
            if j >= 0.5 {
                inverse_defect = inverse_defect.max((eta * a - Matrix3::identity()).abs().max());
            }
            max_grad = max_grad.max(e.norm());
            adj.push(b);
            jac.push(j);
            ja.push(ja_n);
            a_inv.push(a);
        }
        Ok(DeformationState {
            omega,
            grad_omega,
            adjugate: adj,
            jacobian: jac,
            ja,
            a_inv,
            expansion_defect,
            inverse_defect,
            max_grad,
            smallness,
        })
    }

    /// Whether `|∂ω|` stays within the configured smallness threshold.
    pub fn in_regime(&self) -> bool {
        self.max_grad <= self.smallness
    }

    /// Smallest `C` with `|J - 1| ≤ C|∂ω|` and `‖A - Id‖ ≤ C|∂ω|` on the grid.
    pub fn fitted_constants(&self) -> (f64, f64) {
        let mut cj = 0.0f64;
        let mut ca = 0.0f64;
        for ((e, j), a) in self.grad_omega.values.iter().zip(&self.jacobian).zip(&self.a_inv) {
            let g = e.norm();
            if g > 0.0 {
                cj = cj.max((j - 1.0).abs() / g);
                ca = ca.max((a - Matrix3::identity()).norm() / g);
            }
        }
        (cj, ca)
    }

    pub fn grid(&self) -> &'g super::BallGrid {
        self.omega.grid()
    }
}

/// `∇_η F`, `div_η F` and `curl_η F` per node.
#[derive(Debug, Clone)]
pub struct FlowOps {
    /// `g[(r, i)] = A^k_i ∂_k F^r`.
    pub grad: Vec<Matrix3<f64>>,
    pub div: Vec<f64>,
    pub curl: Vec<Vector3<f64>>,
}

/// Flow-map operators from a precomputed Jacobian `∂F`.
pub fn flow_ops_from_jacobian(state: &DeformationState<'_>, jac: &[Matrix3<f64>]) -> FlowOps {
    let grad: Vec<Matrix3<f64>> = jac.iter().zip(&state.a_inv).map(|(d, a)| d * a).collect();
    FlowOps {
        div: grad.iter().map(|g| g.trace()).collect(),
        curl: grad.iter().map(curl_of).collect(),
        grad,
    }
}

pub fn flow_ops(state: &DeformationState<'_>, f: &VectorField<'_>) -> FlowOps {
    flow_ops_from_jacobian(state, &f.jacobian().values)
}

/// `[∇_η g]_i = A^k_i ∂_k g`.
pub fn flow_gradient<'g>(state: &DeformationState<'g>, g: &ScalarField<'g>) -> VectorField<'g> {
    let values = g
        .gradient()
        .values
        .iter()
        .zip(&state.a_inv)
        .map(|(d, a)| a.transpose() * d)
        .collect();
    VectorField::from_values(state.grid(), values).expect("gradient of a finite field is finite")
}

/// `max_i |∂_k(J A^k_i)|` per node.
pub fn piola_residual<'g>(state: &DeformationState<'g>) -> ScalarField<'g> {
    let grid = state.grid();
    let mut out = vec![0.0f64; grid.len()];
    for i in 0..3 {
        let col: Vec<Vector3<f64>> = state.ja.iter().map(|m| m.column(i).into_owned()).collect();
        let field = VectorField::from_values(grid, col).expect("finite");
        for (o, d) in out.iter_mut().zip(field.divergence().values) {
            *o = o.max(d.abs());
        }
    }
    ScalarField::from_values(grid, out).expect("finite")
}
