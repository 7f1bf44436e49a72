use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate/centre counts for the two-stage region search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionSearchConfig {
    /// Stage-1 FPS seeds.
    pub n: usize,
    /// Points per region (seed included); also the curvature neighbourhood.
    pub k: usize,
    /// Deformation centres kept after stage 2.
    pub n_tilde: usize,
    pub seed: u64,
}

impl Default for RegionSearchConfig {
    fn default() -> Self {
        Self {
            n: 100,
            k: 10,
            n_tilde: 50,
            seed: 0,
        }
    }
}

impl RegionSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n == 0 {
            errs.push("region.n must be >= 1".to_string());
        }
        if self.k < 4 {
            // Normals need three neighbours besides the point itself.
            errs.push(format!("region.k must be >= 4, got {}", self.k));
        }
        if self.n_tilde == 0 || self.n_tilde > self.n {
            errs.push(format!("region.n_tilde must be in [1, n = {}], got {}", self.n, self.n_tilde));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// `n·k` should be close to the point count.
    pub fn coverage_ratio(&self, m: usize) -> f64 {
        (self.n * self.k) as f64 / m as f64
    }
}

/// Hyperparameters of the deformation attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// Margin κ of the classification loss.
    pub kappa: f64,
    /// Bandwidth cap `a`.
    pub a: f64,
    /// Weight of the imperceptibility channel in the SI score.
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda_init: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub binary_search_steps: usize,
    pub inner_iters: usize,
    pub lr: f64,
    pub sigma_min: f64,
    /// Half-width of the uniform δ initialisation, relative to the cloud radius.
    pub init_scale: f64,
    /// Stop an inner loop once the objective stalls (checked every tenth of
    /// `inner_iters`).
    pub abort_early: bool,
    /// When nothing has succeeded yet, spend the last binary-search step at
    /// `lambda_min`.
    pub final_probe_at_min: bool,
    pub target: Option<usize>,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kappa: 30.0,
            a: 1.5,
            alpha: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.1,
            lambda_init: 10.0,
            lambda_max: 80.0,
            lambda_min: 0.0,
            binary_search_steps: 10,
            inner_iters: 200,
            lr: 0.01,
            sigma_min: 0.05,
            init_scale: 0.05,
            abort_early: true,
            final_probe_at_min: true,
            target: None,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let finite = [
            ("kappa", self.kappa),
            ("a", self.a),
            ("alpha", self.alpha),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda_init", self.lambda_init),
            ("lambda_max", self.lambda_max),
            ("lambda_min", self.lambda_min),
            ("lr", self.lr),
            ("sigma_min", self.sigma_min),
            ("init_scale", self.init_scale),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                errs.push(format!("attack.{name} must be finite"));
            }
        }
        if self.kappa < 0.0 {
            errs.push(format!("attack.kappa must be >= 0, got {}", self.kappa));
        }
        if self.a <= 0.0 {
            errs.push(format!("attack.a must be > 0, got {}", self.a));
        }
        if self.sigma_min <= 0.0 || self.sigma_min > self.a {
            errs.push(format!("attack.sigma_min must be in (0, a], got {}", self.sigma_min));
        }
        if !(self.lambda_min <= self.lambda_init && self.lambda_init <= self.lambda_max) || self.lambda_min < 0.0 {
            errs.push("attack lambda bounds must satisfy 0 <= lambda_min <= lambda_init <= lambda_max".to_string());
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 || self.lambda3 < 0.0 || self.alpha < 0.0 {
            errs.push("attack.lambda1..3 and alpha must be >= 0".to_string());
        }
        if self.binary_search_steps == 0 || self.inner_iters == 0 {
            errs.push("attack.binary_search_steps and inner_iters must be >= 1".to_string());
        }
        if self.lr <= 0.0 {
            errs.push("attack.lr must be > 0".to_string());
        }
        if self.init_scale < 0.0 {
            errs.push("attack.init_scale must be >= 0".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// l2 iterative fast gradient baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IfgmConfig {
    pub budget: f64,
    pub steps: usize,
    /// Defaults to `2.5 * budget / steps`.
    pub step_size: Option<f64>,
}

impl Default for IfgmConfig {
    fn default() -> Self {
        Self {
            budget: 1.0,
            steps: 20,
            step_size: None,
        }
    }
}

impl IfgmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget >= 0.0 && self.budget.is_finite()) || self.steps == 0 {
            return Err(Error::Config(vec![format!(
                "ifgm.budget must be >= 0 and steps >= 1 (got {}, {})",
                self.budget, self.steps
            )]));
        }
        Ok(())
    }

    pub fn effective_step(&self) -> f64 {
        self.step_size.unwrap_or(2.5 * self.budget / self.steps as f64)
    }
}
