//! Experiment configuration file (TOML).
//!
//! Every block is optional and falls back to its defaults. Unknown keys
//! are an error, and all of them are reported at once together with any
//! out-of-range values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{AttackConfig, IfgmConfig, RegionSearchConfig};
use crate::classifier::{PgdConfig, TrainConfig};
use crate::data::DatasetSpec;
use crate::defense::{DefenseSpec, SuiteOptions};
use crate::error::{Error, Result};
use crate::hardening::HardeningConfig;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HITADV_OUT_DIR";

/// Output directory used when neither the command line, the config file
/// nor the environment names one.
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
    /// When present, `train` also fits an l2-PGD adversarially trained model.
    pub adversarial_training: Option<PgdConfig>,
    pub attack: AttackConfig,
    pub region: RegionSearchConfig,
    pub hardening: HardeningConfig,
    pub ifgm: IfgmConfig,
    pub defenses: Vec<DefenseSpec>,
    pub evaluation: SuiteOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            out_dir: None,
            dataset: DatasetSpec::default(),
            train: TrainConfig::default(),
            adversarial_training: None,
            attack: AttackConfig::default(),
            region: RegionSearchConfig::default(),
            hardening: HardeningConfig::default(),
            ifgm: IfgmConfig::default(),
            defenses: vec![DefenseSpec::none(), DefenseSpec::srs(), DefenseSpec::sor()],
            evaluation: SuiteOptions::default(),
        }
    }
}

fn collect(errs: &mut Vec<String>, r: Result<()>) {
    match r {
        Ok(()) => {}
        Err(Error::Config(list)) => errs.extend(list),
        Err(e) => errs.push(e.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_ignored::deserialize(de, |path| unknown.push(format!("unknown key `{path}`"))).map_err(|e| Error::Config(vec![e.to_string().trim_end().to_string()]))?;
        if !unknown.is_empty() {
            return Err(Error::Config(unknown));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(list) => Error::Config(list.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))
    }

    /// Checks every block and reports all problems together.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        collect(&mut errs, self.dataset.validate());
        collect(&mut errs, self.train.validate());
        if let Some(p) = &self.adversarial_training {
            if !(p.budget >= 0.0 && p.budget.is_finite()) || p.steps == 0 {
                errs.push(format!("adversarial_training needs budget >= 0 and steps >= 1, got {} and {}", p.budget, p.steps));
            }
        }
        collect(&mut errs, self.attack.validate());
        collect(&mut errs, self.region.validate());
        collect(&mut errs, self.hardening.validate());
        collect(&mut errs, self.ifgm.validate());
        for d in &self.defenses {
            collect(&mut errs, d.validate());
        }
        if self.evaluation.metric_k == 0 {
            errs.push("evaluation.metric_k must be >= 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Command line, then config file, then the environment, then `out`.
    pub fn resolve_out_dir(&self, cli: Option<&Path>) -> PathBuf {
        resolve_out_dir(cli.or(self.out_dir.as_deref()))
    }
}

/// `explicit`, else the environment variable, else [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT_DIR),
    }
}
