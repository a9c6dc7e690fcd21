use nalgebra::{Matrix3, Vector3};

use super::grid::BallGrid;
use crate::error::{Error, Result};

/// Per-node scalar values on a [`BallGrid`].
#[derive(Debug, Clone)]
pub struct ScalarField<'g> {
    grid: &'g BallGrid,
    pub values: Vec<f64>,
}

/// Per-node vectors on a [`BallGrid`].
#[derive(Debug, Clone)]
pub struct VectorField<'g> {
    grid: &'g BallGrid,
    pub values: Vec<Vector3<f64>>,
}

/// Per-node 3×3 matrices on a [`BallGrid`]; `m[(i, k)]` is `∂_k F^i` for
/// Jacobians.
#[derive(Debug, Clone)]
pub struct TensorField<'g> {
    grid: &'g BallGrid,
    pub values: Vec<Matrix3<f64>>,
}

fn check<T>(grid: &BallGrid, values: &[T], finite: impl Fn(&T) -> bool) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::Grid(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
    }
    if let Some(idx) = values.iter().position(|v| !finite(v)) {
        return Err(Error::Grid(format!("non-finite value at node {idx}")));
    }
    Ok(())
}

impl<'g> ScalarField<'g> {
    pub fn from_fn(grid: &'g BallGrid, f: impl Fn(&Vector3<f64>) -> f64) -> Self {
        ScalarField {
            grid,
            values: grid.positions().iter().map(f).collect(),
        }
    }

    pub fn from_values(grid: &'g BallGrid, values: Vec<f64>) -> Result<Self> {
        check(grid, &values, |v| v.is_finite())?;
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &'g BallGrid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &'g BallGrid {
        self.grid
    }

    pub fn gradient(&self) -> VectorField<'g> {
        VectorField {
            grid: self.grid,
            values: self.grid.gradient(&self.values),
        }
    }

    /// `∂_k f`.
    pub fn partial(&self, k: usize) -> ScalarField<'g> {
        ScalarField {
            grid: self.grid,
            values: self.grid.gradient(&self.values).iter().map(|g| g[k]).collect(),
        }
    }

    /// All three angular derivatives `∂̄_i f = ε^{ijk} y_j ∂_k f`.
    pub fn angular(&self) -> VectorField<'g> {
        VectorField {
            grid: self.grid,
            values: self.grid.angular(&self.values),
        }
    }

    /// `∂̄_i f`.
    pub fn angular_derivative(&self, i: usize) -> ScalarField<'g> {
        ScalarField {
            grid: self.grid,
            values: self.grid.angular(&self.values).iter().map(|g| g[i]).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl<'g> VectorField<'g> {
    pub fn from_fn(grid: &'g BallGrid, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Self {
        VectorField {
            grid,
            values: grid.positions().iter().map(f).collect(),
        }
    }

    pub fn from_values(grid: &'g BallGrid, values: Vec<Vector3<f64>>) -> Result<Self> {
        check(grid, &values, |v| v.iter().all(|x| x.is_finite()))?;
        Ok(VectorField { grid, values })
    }

    pub fn zeros(grid: &'g BallGrid) -> Self {
        VectorField {
            grid,
            values: vec![Vector3::zeros(); grid.len()],
        }
    }

    pub fn grid(&self) -> &'g BallGrid {
        self.grid
    }

    pub fn component(&self, c: usize) -> ScalarField<'g> {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v[c]).collect(),
        }
    }

    pub fn jacobian(&self) -> TensorField<'g> {
        TensorField {
            grid: self.grid,
            values: self.grid.jacobian(&self.values),
        }
    }

    /// Componentwise `∂_k F`.
    pub fn partial(&self, k: usize) -> VectorField<'g> {
        self.map_components(|c| c.partial(k))
    }

    /// Componentwise `∂̄_i F`.
    pub fn angular_derivative(&self, i: usize) -> VectorField<'g> {
        self.map_components(|c| c.angular_derivative(i))
    }

    fn map_components(&self, op: impl Fn(&ScalarField<'g>) -> ScalarField<'g>) -> VectorField<'g> {
        let parts: Vec<ScalarField<'g>> = (0..3).map(|c| op(&self.component(c))).collect();
        VectorField {
            grid: self.grid,
            values: (0..self.values.len())
                .map(|n| Vector3::new(parts[0].values[n], parts[1].values[n], parts[2].values[n]))
                .collect(),
        }
    }

    pub fn divergence(&self) -> ScalarField<'g> {
        ScalarField {
            grid: self.grid,
            values: self.jacobian().values.iter().map(|m| m.trace()).collect(),
        }
    }

    pub fn curl(&self) -> VectorField<'g> {
        VectorField {
            grid: self.grid,
            values: self.jacobian().values.iter().map(curl_of).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> VectorField<'g> {
        VectorField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

impl<'g> TensorField<'g> {
    pub fn from_values(grid: &'g BallGrid, values: Vec<Matrix3<f64>>) -> Result<Self> {
        check(grid, &values, |m| m.iter().all(|x| x.is_finite()))?;
        Ok(TensorField { grid, values })
    }

    pub fn grid(&self) -> &'g BallGrid {
        self.grid
    }

    /// Row `i` as a vector field.
    pub fn row(&self, i: usize) -> VectorField<'g> {
        VectorField {
            grid: self.grid,
            values: self.values.iter().map(|m| m.row(i).transpose()).collect(),
        }
    }

    /// Column `k` as a vector field.
    pub fn column(&self, k: usize) -> VectorField<'g> {
        VectorField {
            grid: self.grid,
            values: self.values.iter().map(|m| m.column(k).into_owned()).collect(),
        }
    }
}

/// `curl_i = ε^{ijk} m[(k, j)]` for a Jacobian-like matrix `m[(k, j)] = ∂_j F^k`.
pub fn curl_of(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}
