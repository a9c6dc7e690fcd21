use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use vacuum_core::norms::Truncation;

use crate::config::Config;

/// One verified invariant. `margin` is positive when the check passes.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub margin: f64,
    /// Centre of a two-sided check; `threshold` is then the half-width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        let margin = threshold - value;
        Check {
            name: name.into(),
            pass: value <= threshold,
            value,
            threshold,
            margin,
            target: None,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        let margin = value - threshold;
        Check {
            name: name.into(),
            pass: value >= threshold,
            value,
            threshold,
            margin,
            target: None,
        }
    }

    /// `|value - target| ≤ tol`; the reported threshold is the tolerance.
    pub fn near(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let gap = (value - target).abs();
        Check {
            name: name.into(),
            pass: gap <= tol,
            value,
            threshold: tol,
            margin: tol - gap,
            target: Some(target),
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            pass: ok,
            value: ok as u8 as f64,
            threshold: 1.0,
            margin: if ok { 0.0 } else { -1.0 },
            target: None,
        }
    }

    pub fn line(&self) -> String {
        let bound = match self.target {
            Some(t) => format!("{t:.6e} ± {:.3e}", self.threshold),
            None => format!("{:.6e}", self.threshold),
        };
        if self.pass {
            format!("PASS {} value={:.6e} threshold={bound} margin={:.3e}", self.name, self.value, self.margin)
        } else {
            format!("FAIL {}: value={:.6e} violates threshold={bound} by margin={:.3e}", self.name, self.value, self.margin)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub gamma: f64,
    pub mass: f64,
    pub seed: u64,
    pub truncation: Truncation,
    pub config: Config,
    pub fitted: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<PathBuf>,
}

impl SuiteReport {
    pub fn new(suite: &str, cfg: &Config) -> Self {
        SuiteReport {
            suite: suite.into(),
            gamma: cfg.gamma,
            mass: cfg.mass,
            seed: cfg.seed,
            truncation: cfg.norms,
            config: cfg.clone(),
            fitted: BTreeMap::new(),
            notes: Vec::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn fit(&mut self, key: &str, v: f64) {
        self.fitted.insert(key.into(), v);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.json", self.suite));
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
