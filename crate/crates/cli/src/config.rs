//! Experiment configuration files.

use blowuplab_core::geometry::{Domain, DomainSpec, Vec4};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::Failure;

fn default_grid() -> Vec<f64> {
    vec![1e2, 10f64.powf(2.5), 1e3, 10f64.powf(3.5), 1e4]
}

fn one() -> f64 {
    1.0
}

fn default_d() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_eta() -> f64 {
    0.5
}

fn default_seeds() -> usize {
    200
}

fn default_scan() -> usize {
    2000
}

fn yes() -> bool {
    true
}

/// Inline domain description or a path to a JSON file holding one
/// (relative paths resolve against the config file's directory).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainRef {
    Inline(DomainSpec),
    File(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    /// Relative tolerance for every quadrature (same as `--tol-rel`).
    pub rel: Option<f64>,
    /// Relative tolerance of the radial single-energy integrals only.
    pub radial_rel: Option<f64>,
    /// Evaluation budget per integral.
    pub max_evals: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainRef,
    #[serde(default = "default_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "default_d")]
    pub d_defaults: [f64; 2],
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Boundary directions on S^3 (normalized on use).
    #[serde(default)]
    pub points: Vec<[f64; 4]>,
    #[serde(default)]
    pub tolerance: ToleranceOverrides,
    #[serde(default)]
    pub output: OutputPaths,
    /// Seed for synthetic-noise checks.
    #[serde(default)]
    pub seed: u64,
    /// `lambda` for `predict` (defaults to the largest grid value).
    pub lambda: Option<f64>,
    /// Known expansion constants for `predict`; fitted from `points` otherwise.
    pub constants: Option<Constants>,
    /// Split point of the stability refit in `fit-constants`.
    pub split_lambda: Option<f64>,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_scan")]
    pub scan_points: usize,
    /// Cross-check `d*` by direct minimization in `predict`.
    #[serde(default = "yes")]
    pub cross_check: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            Failure::usage(format!(
                "malformed config {} at line {}, column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.lambda_grid.is_empty() {
            return Err(Failure::usage("lambda_grid is empty"));
        }
        if let Some(l) = self.lambda_grid.iter().find(|&&l| !(l > std::f64::consts::E) || !l.is_finite()) {
            return Err(Failure::usage(format!("lambda = {l} must be finite and exceed e")));
        }
        let t = &self.tolerance;
        for v in [t.rel, t.radial_rel].into_iter().flatten() {
            if !(v > 0.0) {
                return Err(Failure::usage(format!("tolerance {v} must be positive")));
            }
        }
        if t.max_evals == Some(0) {
            return Err(Failure::usage("max_evals must be positive"));
        }
        if !(self.eta > 0.0) || self.d_defaults.iter().any(|d| !(*d > 0.0)) {
            return Err(Failure::usage("eta and d_defaults must be positive"));
        }
        if self.points.iter().any(|p| p.iter().map(|v| v * v).sum::<f64>() == 0.0) {
            return Err(Failure::usage("zero vector in points"));
        }
        if let Some(l) = self.lambda {
            if !(l > std::f64::consts::E) {
                return Err(Failure::usage(format!("lambda = {l} must exceed e")));
            }
        }
        Ok(())
    }

    pub fn domain(&self, base: &Path) -> Result<Domain, Failure> {
        let spec = match &self.domain {
            DomainRef::Inline(s) => s.clone(),
            DomainRef::File(f) => {
                let p = base.join(f);
                let text = std::fs::read_to_string(&p).map_err(|e| Failure::usage(format!("cannot read domain file {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| {
                    Failure::usage(format!(
                        "malformed domain file {} at line {}, column {}: {e}",
                        p.display(),
                        e.line(),
                        e.column()
                    ))
                })?
            }
        };
        Domain::new(spec).map_err(|e| Failure::usage(e.to_string()))
    }

    pub fn directions(&self) -> Vec<Vec4> {
        self.points.iter().map(|p| Vec4::new(p[0], p[1], p[2], p[3]).normalize()).collect()
    }
}
