//! Batch metric report. Field order is fixed by declaration order, so the
//! JSON output is byte-stable for a given run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::filters::DefenseSpec;
use super::suite::{AttackSpec, SuiteOptions};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub attack: AttackSpec,
    pub defense: DefenseSpec,
    pub options: SuiteOptions,
    /// Whether a separately trained robust model was the victim.
    pub robust_victim: bool,
    /// Defence parameters are project defaults rather than published values.
    pub defense_params_assumed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub attack: String,
    pub defense: String,
    /// Correctly classified clouds that were attacked.
    pub attempted: usize,
    pub successes: usize,
    pub asr: f64,
    /// Successes before the defence was applied.
    pub undefended_successes: usize,
    pub undefended_asr: f64,
    /// Means over successful examples; absent when there are none.
    pub csd_mean: Option<f64>,
    pub chamfer_mean: Option<f64>,
    pub knn_dist_mean: Option<f64>,
    pub skipped_misclassified: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: usize,
    pub label: usize,
    pub attempted: bool,
    pub success: bool,
    pub undefended_success: bool,
    pub predicted: Option<usize>,
    pub defense: String,
    pub csd: Option<f64>,
    pub chamfer: Option<f64>,
    pub knn_dist: Option<f64>,
    pub max_displacement: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub config_echo: ConfigEcho,
    pub summary: Summary,
    pub examples: Vec<ExampleRecord>,
}

fn mean(vals: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = vals.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| s / n as f64)
}

impl Summary {
    /// Aggregates records; the fields are always recomputable from them.
    pub fn from_records(attack: &str, defense: &str, examples: &[ExampleRecord]) -> Self {
        let attempted = examples.iter().filter(|e| e.attempted && e.error.is_none()).count();
        let ok: Vec<&ExampleRecord> = examples.iter().filter(|e| e.attempted && e.error.is_none() && e.success).collect();
        let undefended = examples.iter().filter(|e| e.attempted && e.error.is_none() && e.undefended_success).count();
        let ratio = |n: usize| if attempted > 0 { n as f64 / attempted as f64 } else { 0.0 };
        Self {
            attack: attack.to_string(),
            defense: defense.to_string(),
            attempted,
            successes: ok.len(),
            asr: ratio(ok.len()),
            undefended_successes: undefended,
            undefended_asr: ratio(undefended),
            csd_mean: mean(ok.iter().filter_map(|e| e.csd)),
            chamfer_mean: mean(ok.iter().filter_map(|e| e.chamfer)),
            knn_dist_mean: mean(ok.iter().filter_map(|e| e.knn_dist)),
            skipped_misclassified: examples.iter().filter(|e| !e.attempted).count(),
            errors: examples.iter().filter(|e| e.error.is_some()).count(),
        }
    }
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: Self = serde_json::from_str(&text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Invalid(format!(
                "{}: report schema {} is not supported (expected {})",
                path.display(),
                report.schema_version,
                REPORT_SCHEMA_VERSION
            )));
        }
        Ok(report)
    }

    /// Whether the summary matches a recomputation from the records.
    pub fn is_consistent(&self) -> bool {
        Summary::from_records(&self.summary.attack, &self.summary.defense, &self.examples) == self.summary
    }
}
