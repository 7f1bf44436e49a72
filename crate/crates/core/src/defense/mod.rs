//! Preprocessing defences, imperceptibility metrics and batch evaluation.

mod filters;
mod metrics;
mod report;
mod suite;

pub use filters::{mean_knn_distances, sor, srs, DefenseKind, DefenseSpec};
pub use metrics::{chamfer, csd_metric, knn_dist_metric};
pub use report::{ConfigEcho, ExampleRecord, MetricReport, Summary, REPORT_SCHEMA_VERSION};
pub use suite::{attack_dataset, evaluate_defenses, evaluate_suite, score_defense, AttackSpec, ExampleOutcome, SuiteOptions};
