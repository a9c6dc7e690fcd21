//! Discrete check of the zeroth order energy identity along a trajectory.

use serde::Serialize;

use crate::error::{Error, Result};

/// Integrals entering the zeroth order identity at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceSample {
    pub t: f64,
    /// `½∫σ^ι|ω_t|² + θ^{1-3γ}(½(3γ-1)^{-1}∫σ^ι|ω|² + ∫σ^{ι+1}M₀)`.
    pub bracket: f64,
    /// `(1 + 2θ_t/θ)∫σ^ι|ω_t|²`.
    pub dissipation: f64,
    /// `(θ^{1-3γ})_t (½(3γ-1)^{-1}∫σ^ι|ω|² + ∫σ^{ι+1}M₀)`.
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    /// Times at which the defect is defined (the two end samples on each side are dropped).
    pub times: Vec<f64>,
    pub defect: Vec<f64>,
    pub max_abs_defect: f64,
}

/// `d/dt bracket + dissipation - rhs` with a five-point centred difference.
/// Samples must be equally spaced in time.
pub fn zeroth_energy_balance(samples: &[BalanceSample]) -> Result<BalanceReport> {
    if samples.len() < 5 {
        return Err(Error::param("samples", "need at least five samples"));
    }
    let h = samples[1].t - samples[0].t;
    if !(h > 0.0) {
        return Err(Error::param("samples", "times must increase"));
    }
    for w in samples.windows(2) {
        if ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.max(w[1].t.abs()) {
            return Err(Error::param("samples", "times must be equally spaced"));
        }
    }
    let b: Vec<f64> = samples.iter().map(|s| s.bracket).collect();
    let mut times = Vec::new();
    let mut defect = Vec::new();
    for i in 2..samples.len() - 2 {
        let db = (b[i - 2] - 8.0 * b[i - 1] + 8.0 * b[i + 1] - b[i + 2]) / (12.0 * h);
        times.push(samples[i].t);
        defect.push(db + samples[i].dissipation - samples[i].rhs);
    }
    let max_abs_defect = defect.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(BalanceReport {
        times,
        defect,
        max_abs_defect,
    })
}
