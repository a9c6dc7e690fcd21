use nalgebra::Matrix3;
use serde::Serialize;

use crate::geometry::{curl_of, DeformationState};

/// `M₀`, its cubic remainder `e₀` and the two sandwich margins at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct M0Point {
    pub m0: f64,
    pub e0: f64,
    /// `|M₀ - (½(|∂ω|² + (γ-1)|div ω|² - |curl ω|²) + e₀)|`.
    pub decomposition_defect: f64,
    /// `M₀ + ½|curl|² - ¼|∂ω|² - ((γ-1)/2)|div|²`.
    pub lower_margin: f64,
    /// `|∂ω|² + ((γ-1)/2)|div|² - M₀ - ½|curl|²`.
    pub upper_margin: f64,
}

/// `(J^{1-γ} - 1)/(γ - 1)` without cancellation for `J` near one.
fn power_term(j_minus_one: f64, gamma: f64) -> f64 {
    ((1.0 - gamma) * j_minus_one.ln_1p()).exp_m1() / (gamma - 1.0)
}

pub fn m0_e0_point(e: &Matrix3<f64>, gamma: f64) -> M0Point {
    let div = e.trace();
    let curl2 = curl_of(e).norm_squared();
    let grad2 = e.norm_squared();
    let det = e.determinant();
    let jm1 = div + 0.5 * (div * div + curl2 - grad2) + det;
    let m0 = power_term(jm1, gamma) + div;
    // J^{1-γ} - 1 - (1-γ)(J-1) + ½(1-γ)γ(J-1)², divided by γ-1.
    let taylor = power_term(jm1, gamma) + jm1 - 0.5 * gamma * jm1 * jm1;
    let e0 = taylor + 0.5 * gamma * (jm1 * jm1 - div * div) - det;
    let quad = 0.5 * (grad2 + (gamma - 1.0) * div * div - curl2);
    let mid = m0 + 0.5 * curl2;
    M0Point {
        m0,
        e0,
        decomposition_defect: (m0 - quad - e0).abs(),
        lower_margin: mid - 0.25 * grad2 - 0.5 * (gamma - 1.0) * div * div,
        upper_margin: grad2 + 0.5 * (gamma - 1.0) * div * div - mid,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct M0Report {
    pub points: Vec<M0Point>,
    pub max_decomposition_defect: f64,
    /// Smallest margins over nodes inside the smallness regime.
    pub min_lower_margin: f64,
    pub min_upper_margin: f64,
    /// Nodes where `|∂ω|` exceeds the threshold; their margins are not judged.
    pub out_of_regime: usize,
}

impl M0Report {
    pub fn sandwich_holds(&self) -> bool {
        self.min_lower_margin >= 0.0 && self.min_upper_margin >= 0.0
    }
}

pub fn m0_e0(state: &DeformationState<'_>, gamma: f64) -> M0Report {
    let mut rep = M0Report {
        points: Vec::with_capacity(state.jacobian.len()),
        max_decomposition_defect: 0.0,
        min_lower_margin: f64::INFINITY,
        min_upper_margin: f64::INFINITY,
        out_of_regime: 0,
    };
    for e in &state.grad_omega.values {
        let p = m0_e0_point(e, gamma);
        rep.max_decomposition_defect = rep.max_decomposition_defect.max(p.decomposition_defect);
        if e.norm() <= state.smallness {
            rep.min_lower_margin = rep.min_lower_margin.min(p.lower_margin);
            rep.min_upper_margin = rep.min_upper_margin.min(p.upper_margin);
        } else {
            rep.out_of_regime += 1;
        }
        rep.points.push(p);
    }
    rep
}
