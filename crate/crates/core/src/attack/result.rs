use serde::{Deserialize, Serialize};

use super::hitadv::{AttackSetup, SearchOutcome};
use super::kernel::DeformationField;
use crate::classifier::{l2_norm, ClassifierModel};
use crate::cloud::{Point, PointCloud};
use crate::defense::{chamfer, csd_metric, knn_dist_metric};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMethod {
    HitAdv,
    HitAdvHardened,
    Ifgm,
}

impl AttackMethod {
    pub fn name(self) -> &'static str {
        match self {
            AttackMethod::HitAdv => "hit_adv",
            AttackMethod::HitAdvHardened => "hit_adv_hardened",
            AttackMethod::Ifgm => "ifgm",
        }
    }
}

impl std::fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One binary-search step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub lambda: f64,
    pub success: bool,
    pub iterations: usize,
    pub aborted_early: bool,
    pub diverged: bool,
    pub final_total: Option<f64>,
    pub final_cls: Option<f64>,
    pub final_dis: Option<f64>,
}

/// Distortion of an adversarial cloud relative to its clean source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    pub csd: f64,
    pub chamfer: f64,
    pub knn_dist: f64,
    /// Largest per-point displacement.
    pub max_displacement: f64,
    /// Whole-cloud l2 norm of the displacement.
    pub l2: f64,
}

impl AttackMetrics {
    pub fn compute(clean: &PointCloud, adv: &PointCloud, k: usize) -> Result<Self> {
        let disp: Vec<Point> = adv.points().iter().zip(clean.points()).map(|(a, c)| a - c).collect();
        Ok(Self {
            csd: csd_metric(clean, adv, k)?,
            chamfer: chamfer(clean, adv),
            knn_dist: knn_dist_metric(adv, k)?,
            max_displacement: disp.iter().map(|d| d.norm()).fold(0.0, f64::max),
            l2: l2_norm(&disp),
        })
    }
}

#[derive(Debug, Clone)]
pub struct AttackResult {
    pub method: AttackMethod,
    pub adversarial: PointCloud,
    pub success: bool,
    /// The clean input was already misclassified; nothing was optimised.
    pub trivial: bool,
    pub true_label: usize,
    pub predicted: usize,
    pub target: Option<usize>,
    pub final_lambda: Option<f64>,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub metrics: AttackMetrics,
    pub field: Option<DeformationField>,
    pub centers: Vec<usize>,
}

/// JSON view of an [`AttackResult`] without point data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub method: AttackMethod,
    pub success: bool,
    pub trivial: bool,
    pub true_label: usize,
    pub predicted: usize,
    pub target: Option<usize>,
    pub final_lambda: Option<f64>,
    pub iterations: usize,
    pub metrics: AttackMetrics,
    pub max_delta_norm: Option<f64>,
    pub centers: Vec<usize>,
    pub trace: Vec<TraceEntry>,
    pub adversarial_ply: Option<String>,
}

impl AttackResult {
    pub(crate) fn trivial_if_misclassified(model: &ClassifierModel, cloud: &PointCloud, label: usize, target: Option<usize>, method: AttackMethod, k: usize) -> Result<Option<Self>> {
        let predicted = model.predict(cloud.points());
        let already = match target {
            Some(t) => predicted == t,
            None => predicted != label,
        };
        if !already {
            return Ok(None);
        }
        Ok(Some(Self {
            method,
            adversarial: cloud.clone(),
            success: true,
            trivial: true,
            true_label: label,
            predicted,
            target,
            final_lambda: None,
            iterations: 0,
            trace: Vec::new(),
            metrics: AttackMetrics::compute(cloud, cloud, k)?,
            field: None,
            centers: Vec::new(),
        }))
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_search(method: AttackMethod, cloud: &PointCloud, label: usize, target: Option<usize>, setup: &AttackSetup, outcome: SearchOutcome, model: &ClassifierModel, k: usize) -> Result<Self> {
        let success = outcome.best.is_some();
        let chosen = outcome.best.unwrap_or(outcome.last);
        let (adversarial, predicted) = if chosen.adv.is_empty() {
            (cloud.clone(), model.predict(cloud.points()))
        } else {
            let adv = cloud.with_points(chosen.adv)?;
            let p = model.predict(adv.points());
            (adv, p)
        };
        let mut adversarial = adversarial;
        adversarial.set_label(Some(label));
        Ok(Self {
            method,
            metrics: AttackMetrics::compute(cloud, &adversarial, k)?,
            adversarial,
            success,
            trivial: false,
            true_label: label,
            predicted: if success { chosen.predicted } else { predicted },
            target,
            final_lambda: success.then_some(chosen.lambda),
            iterations: outcome.iterations,
            trace: outcome.trace,
            field: Some(chosen.field),
            centers: setup.selection.centers.clone(),
        })
    }

    pub fn report(&self, adversarial_ply: Option<String>) -> AttackReport {
        AttackReport {
            method: self.method,
            success: self.success,
            trivial: self.trivial,
            true_label: self.true_label,
            predicted: self.predicted,
            target: self.target,
            final_lambda: self.final_lambda,
            iterations: self.iterations,
            metrics: self.metrics,
            max_delta_norm: self.field.as_ref().map(|f| f.max_delta_norm()),
            centers: self.centers.clone(),
            trace: self.trace.clone(),
            adversarial_ply,
        }
    }
}
