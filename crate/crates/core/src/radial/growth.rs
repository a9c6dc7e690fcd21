use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Power-law exponent of `R` against `1+t` with a 95% confidence interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub intercept: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

/// Ordinary least squares of `ln R` on `ln(1+t)` over the final decade of `1+t`.
pub fn fit_growth(series: &[(f64, f64)]) -> Result<GrowthFit> {
    let last = series.last().ok_or_else(|| Error::param("series", "empty"))?.0;
    let first = series[0].0;
    if (1.0 + last) < 10.0 * (1.0 + first) {
        return Err(Error::param("series", "needs to span at least one decade in 1+t"));
    }
    let cut = (1.0 + last) / 10.0;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, r)| 1.0 + t >= cut * (1.0 - 1e-12) && *r > 0.0)
        .map(|(t, r)| ((1.0 + t).ln(), r.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::param("series", "too few samples in the final decade"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0)
        .map_err(|e| Error::Precondition(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(GrowthFit {
        exponent: slope,
        intercept,
        std_error: se,
        ci_low: slope - t * se,
        ci_high: slope + t * se,
        points: pts.len(),
    })
}
