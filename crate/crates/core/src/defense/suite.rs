//! Attack a test set once, then score it under each defence.

use serde::{Deserialize, Serialize};

use super::filters::{DefenseKind, DefenseSpec};
use super::report::{ConfigEcho, ExampleRecord, MetricReport, Summary, REPORT_SCHEMA_VERSION};
use crate::attack::{ifgm_baseline, run_attack, AttackConfig, AttackMethod, AttackResult, IfgmConfig, RegionSearchConfig};
use crate::classifier::{ClassifierModel, Dataset};
use crate::error::{Error, Result};
use crate::hardening::{hardened_attack, HardeningConfig};
use crate::{par, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    HitAdv {
        #[serde(default)]
        attack: AttackConfig,
        #[serde(default)]
        region: RegionSearchConfig,
    },
    Ifgm {
        #[serde(default)]
        ifgm: IfgmConfig,
    },
    HitAdvHardened {
        #[serde(default)]
        attack: AttackConfig,
        #[serde(default)]
        region: RegionSearchConfig,
        #[serde(default)]
        hardening: HardeningConfig,
    },
}

impl AttackSpec {
    pub fn method(&self) -> AttackMethod {
        match self {
            AttackSpec::HitAdv { .. } => AttackMethod::HitAdv,
            AttackSpec::Ifgm { .. } => AttackMethod::Ifgm,
            AttackSpec::HitAdvHardened { .. } => AttackMethod::HitAdvHardened,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AttackSpec::HitAdv { attack, region } => {
                attack.validate()?;
                region.validate()
            }
            AttackSpec::Ifgm { ifgm } => ifgm.validate(),
            AttackSpec::HitAdvHardened { attack, region, hardening } => {
                attack.validate()?;
                region.validate()?;
                hardening.validate()
            }
        }
    }

    /// Runs the attack on one cloud; `seed` is mixed into the attack seed.
    pub fn run(&self, model: &ClassifierModel, cloud: &crate::PointCloud, seed: u64, metric_k: usize) -> Result<AttackResult> {
        match self {
            AttackSpec::HitAdv { attack, region } => {
                let attack = AttackConfig {
                    seed: rng::derive(attack.seed, seed),
                    ..attack.clone()
                };
                run_attack(model, cloud, &attack, region)
            }
            AttackSpec::Ifgm { ifgm } => ifgm_baseline(model, cloud, ifgm, metric_k),
            AttackSpec::HitAdvHardened { attack, region, hardening } => {
                let attack = AttackConfig {
                    seed: rng::derive(attack.seed, seed),
                    ..attack.clone()
                };
                let hardening = HardeningConfig {
                    seed: rng::derive(hardening.seed, seed),
                    ..hardening.clone()
                };
                hardened_attack(model, cloud, &attack, region, &hardening)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    /// Attack at most this many test clouds (in order).
    pub max_examples: Option<usize>,
    pub seed: u64,
    /// Neighbourhood size for CSD and kNN distance.
    pub metric_k: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            max_examples: None,
            seed: 0,
            metric_k: 10,
        }
    }
}

/// Attack outcome for one test cloud.
#[derive(Debug, Clone)]
pub struct ExampleOutcome {
    pub id: usize,
    pub label: usize,
    /// `None` when the clean cloud was already misclassified.
    pub result: Option<std::result::Result<AttackResult, String>>,
}

/// Attacks every correctly classified cloud of `testset` on `victim`.
/// Per-example errors are recorded, never propagated.
pub fn attack_dataset(victim: &ClassifierModel, testset: &Dataset, attack: &AttackSpec, opts: &SuiteOptions) -> Result<Vec<ExampleOutcome>> {
    attack.validate()?;
    if testset.is_empty() {
        return Err(Error::Invalid("empty test set".into()));
    }
    let n = opts.max_examples.map_or(testset.len(), |n| n.min(testset.len()));
    Ok(par::map_range(n, |id| {
        let cloud = &testset.examples()[id];
        let label = testset.label(id);
        let result = if victim.predict(cloud.points()) != label {
            None
        } else {
            Some(attack.run(victim, cloud, rng::derive(opts.seed, id as u64), opts.metric_k).map_err(|e| e.to_string()))
        };
        ExampleOutcome { id, label, result }
    }))
}

/// Scores attacked clouds under one defence, judged by `judge`.
pub fn score_defense(judge: &ClassifierModel, outcomes: &[ExampleOutcome], attack: &AttackSpec, defense: &DefenseSpec, opts: &SuiteOptions, robust_victim: bool) -> Result<MetricReport> {
    defense.validate()?;
    let examples = par::map_slice(outcomes, |o| record(judge, o, defense, opts));
    let summary = Summary::from_records(attack.method().name(), defense.name(), &examples);
    Ok(MetricReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config_echo: ConfigEcho {
            attack: attack.clone(),
            defense: defense.clone(),
            options: opts.clone(),
            robust_victim,
            defense_params_assumed: defense.kind != DefenseKind::None,
        },
        summary,
        examples,
    })
}

fn record(judge: &ClassifierModel, o: &ExampleOutcome, defense: &DefenseSpec, opts: &SuiteOptions) -> ExampleRecord {
    let mut rec = ExampleRecord {
        id: o.id,
        label: o.label,
        attempted: o.result.is_some(),
        success: false,
        undefended_success: false,
        predicted: None,
        defense: defense.name().to_string(),
        csd: None,
        chamfer: None,
        knn_dist: None,
        max_displacement: None,
        error: None,
    };
    let r = match &o.result {
        None => return rec,
        Some(Err(e)) => {
            rec.error = Some(e.clone());
            return rec;
        }
        Some(Ok(r)) => r,
    };
    rec.undefended_success = r.success && !r.trivial;
    rec.csd = Some(r.metrics.csd);
    rec.chamfer = Some(r.metrics.chamfer);
    rec.knn_dist = Some(r.metrics.knn_dist);
    rec.max_displacement = Some(r.metrics.max_displacement);
    match defense.apply(&r.adversarial, rng::derive(opts.seed ^ 0xDEF, o.id as u64)) {
        Ok(defended) => {
            let p = judge.predict(defended.points());
            rec.predicted = Some(p);
            rec.success = rec.undefended_success && match r.target {
                Some(t) => p == t,
                None => p != o.label,
            };
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Attacks once and reports each defence. With `robust_model` the attack
/// targets that model and it also judges the defended clouds.
pub fn evaluate_defenses(model: &ClassifierModel, robust_model: Option<&ClassifierModel>, testset: &Dataset, attack: &AttackSpec, defenses: &[DefenseSpec], opts: &SuiteOptions) -> Result<Vec<MetricReport>> {
    let victim = robust_model.unwrap_or(model);
    let outcomes = attack_dataset(victim, testset, attack, opts)?;
    defenses
        .iter()
        .map(|d| score_defense(victim, &outcomes, attack, d, opts, robust_model.is_some()))
        .collect()
}

pub fn evaluate_suite(model: &ClassifierModel, robust_model: Option<&ClassifierModel>, testset: &Dataset, attack: &AttackSpec, defense: &DefenseSpec, opts: &SuiteOptions) -> Result<MetricReport> {
    let mut v = evaluate_defenses(model, robust_model, testset, attack, std::slice::from_ref(defense), opts)?;
    Ok(v.remove(0))
}
