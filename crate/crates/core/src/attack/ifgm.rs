use super::config::IfgmConfig;
use super::result::{AttackMethod, AttackMetrics, AttackResult};
use crate::classifier::{pgd_l2, ClassifierModel, LossSpec};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Iterative l2 fast gradient method on raw coordinates (cross-entropy
/// ascent, normalised steps, projection onto the budget ball). Metrics use
/// a `k`-neighbourhood.
pub fn ifgm_baseline(model: &ClassifierModel, cloud: &PointCloud, cfg: &IfgmConfig, k: usize) -> Result<AttackResult> {
    cfg.validate()?;
    let label = cloud.label().ok_or_else(|| Error::Invalid("cloud has no label".into()))?;
    if let Some(r) = AttackResult::trivial_if_misclassified(model, cloud, label, None, AttackMethod::Ifgm, k)? {
        return Ok(r);
    }
    let adv_pts = pgd_l2(model, cloud.points(), label, &LossSpec::CrossEntropy, cfg.budget, cfg.steps, cfg.effective_step())?;
    let mut adversarial = cloud.with_points(adv_pts)?;
    adversarial.set_label(Some(label));
    let predicted = model.predict(adversarial.points());
    Ok(AttackResult {
        method: AttackMethod::Ifgm,
        metrics: AttackMetrics::compute(cloud, &adversarial, k)?,
        adversarial,
        success: predicted != label,
        trivial: false,
        true_label: label,
        predicted,
        target: None,
        final_lambda: None,
        iterations: cfg.steps,
        trace: Vec::new(),
        field: None,
        centers: Vec::new(),
    })
}
