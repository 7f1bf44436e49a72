use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transform bounds and resampling settings for the hardened attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardeningConfig {
    /// Ascent steps of the worst-case transform search.
    pub maxot_steps: usize,
    /// Step length as a fraction of each bound.
    pub maxot_lr: f64,
    /// Halvings tried when a step does not improve the objective.
    pub maxot_backtracks: usize,
    pub scale_lo: f64,
    pub scale_hi: f64,
    /// Largest rotation angle in radians; `π` allows any rotation.
    pub rotation_max_angle: f64,
    /// Translation bound relative to the cloud radius.
    pub translation_max: f64,
    pub upsample_factor: usize,
    /// Upsampling factor of the simulated rescan.
    pub rescan_factor: usize,
    /// Rescan jitter relative to the cloud radius.
    pub rescan_noise: f64,
    pub seed: u64,
}

impl Default for HardeningConfig {
    fn default() -> Self {
        Self {
            maxot_steps: 3,
            maxot_lr: 0.5,
            maxot_backtracks: 2,
            scale_lo: 0.8,
            scale_hi: 1.2,
            rotation_max_angle: 0.3,
            translation_max: 0.2,
            upsample_factor: 2,
            rescan_factor: 2,
            rescan_noise: 0.01,
            seed: 0,
        }
    }
}

impl HardeningConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.scale_lo > 0.0 && self.scale_lo <= 1.0 && self.scale_hi >= 1.0 && self.scale_hi.is_finite()) {
            errs.push(format!(
                "hardening scale bounds must satisfy 0 < scale_lo <= 1 <= scale_hi, got [{}, {}]",
                self.scale_lo, self.scale_hi
            ));
        }
        if !(self.rotation_max_angle >= 0.0 && self.rotation_max_angle <= PI) {
            errs.push(format!("hardening.rotation_max_angle must be in [0, pi], got {}", self.rotation_max_angle));
        }
        if !(self.translation_max >= 0.0 && self.translation_max.is_finite()) {
            errs.push(format!("hardening.translation_max must be >= 0, got {}", self.translation_max));
        }
        if !(self.maxot_lr > 0.0 && self.maxot_lr.is_finite()) {
            errs.push(format!("hardening.maxot_lr must be > 0, got {}", self.maxot_lr));
        }
        if self.upsample_factor == 0 || self.rescan_factor == 0 {
            errs.push("hardening.upsample_factor and rescan_factor must be >= 1".to_string());
        }
        if !(self.rescan_noise >= 0.0 && self.rescan_noise.is_finite()) {
            errs.push(format!("hardening.rescan_noise must be >= 0, got {}", self.rescan_noise));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}
