//! Deformation attack optimised against worst-case poses of a resampled cloud.

use rand_distr::{Distribution, Normal};

use super::config::HardeningConfig;
use super::maxot::maxot_search;
use super::resample::resample_map;
use super::transform::RigidTransform;
use crate::attack::hitadv::binary_search;
use crate::attack::{prepare_attack, AttackConfig, AttackMethod, AttackProblem, AttackResult, Probe, RegionSearchConfig, View};
use crate::classifier::ClassifierModel;
use crate::cloud::{fps, Point, PointCloud};
use crate::error::{Error, Result};
use crate::rng;

/// What one hardened iteration did, for instrumentation.
#[derive(Debug)]
pub struct HardenedStep<'a> {
    pub iteration: usize,
    pub transform: &'a RigidTransform,
    pub probe: &'a Probe<'a>,
}

pub fn hardened_attack(model: &ClassifierModel, cloud: &PointCloud, acfg: &AttackConfig, rcfg: &RegionSearchConfig, hcfg: &HardeningConfig) -> Result<AttackResult> {
    hardened_attack_with_hook(model, cloud, acfg, rcfg, hcfg, &mut |_| {})
}

/// As [`hardened_attack`], calling `hook` with the point sets every
/// objective evaluation used.
pub fn hardened_attack_with_hook(
    model: &ClassifierModel,
    cloud: &PointCloud,
    acfg: &AttackConfig,
    rcfg: &RegionSearchConfig,
    hcfg: &HardeningConfig,
    hook: &mut dyn FnMut(&HardenedStep),
) -> Result<AttackResult> {
    acfg.validate()?;
    hcfg.validate()?;
    let label = cloud.label().ok_or_else(|| Error::Invalid("cloud has no label".into()))?;
    if let Some(r) = AttackResult::trivial_if_misclassified(model, cloud, label, acfg.target, AttackMethod::HitAdvHardened, rcfg.k)? {
        return Ok(r);
    }
    let setup = prepare_attack(model, cloud, acfg, rcfg)?;
    let problem = AttackProblem::new(model, cloud.points(), label, acfg, &setup.initial, setup.center_cstd.clone())?;
    let outcome = binary_search(acfg, &setup.initial, |field, lambda, iteration| {
        let adv = problem.deform(field);
        let map = resample_map(&adv, hcfg.upsample_factor, rng::derive(hcfg.seed, iteration as u64))?;
        let seen = map.apply(&adv);
        let worst = maxot_search(model, &seen, hcfg, label, acfg.kappa, acfg.target)?;
        let view = View {
            resample: Some(map),
            transform: worst.transform,
        };
        let mut report = |p: &Probe| {
            hook(&HardenedStep {
                iteration,
                transform: &worst.transform,
                probe: p,
            })
        };
        let mut ev = problem.evaluate(field, lambda, 1.0, Some(&view), Some(&mut report))?;
        // Keep only iterates that also fool the classifier on the plain cloud.
        let plain = model.predict(&ev.adv);
        ev.success = ev.success && problem.is_success(plain);
        ev.predicted = plain;
        Ok(ev)
    })?;
    AttackResult::from_search(AttackMethod::HitAdvHardened, cloud, label, acfg.target, &setup, outcome, model, rcfg.k)
}

/// Stand-in for fabricating and re-scanning an object: upsample by
/// `rescan_factor`, add isotropic Gaussian noise of `rescan_noise·radius`,
/// then FPS back to the original count.
pub fn simulate_rescan(cloud: &PointCloud, hcfg: &HardeningConfig, seed: u64) -> Result<PointCloud> {
    let m = cloud.len();
    if m < 4 {
        return Err(Error::Invalid(format!("rescan needs at least 4 points, got {m}")));
    }
    if hcfg.rescan_factor == 0 || !(hcfg.rescan_noise >= 0.0) {
        return Err(Error::Invalid("rescan_factor must be >= 1 and rescan_noise >= 0".into()));
    }
    let mut r = rng::seeded(seed);
    let up = super::resample::upsample(cloud, hcfg.rescan_factor, rng::derive(seed, 1))?;
    let sd = hcfg.rescan_noise * cloud.radius();
    let noisy: Vec<Point> = if sd > 0.0 {
        let n = Normal::new(0.0, sd).map_err(|e| Error::Invalid(e.to_string()))?;
        up.points().iter().map(|p| p + Point::from_fn(|_, _| n.sample(&mut r))).collect()
    } else {
        up.points().to_vec()
    };
    let noisy = PointCloud::new(noisy)?;
    let keep = fps(&noisy, m, rng::derive(seed, 2))?;
    let mut out = noisy.select(&keep)?;
    out.set_label(cloud.label());
    Ok(out)
}
