//! Shape-based deformation attack and a point-wise baseline.

mod config;
pub(crate) mod hitadv;
mod ifgm;
mod kernel;
mod losses;
mod objective;
mod result;
mod si;

pub use config::{AttackConfig, IfgmConfig, RegionSearchConfig};
pub use hitadv::{prepare_attack, run_attack, AttackSetup};
pub use ifgm::ifgm_baseline;
pub use kernel::{deform, gauss_weight, DeformState, DeformationField, KernelGeometry};
pub use losses::{
    chamfer_grad, chamfer_points, loss_chamfer, loss_cls, loss_dis, loss_hide, loss_hide_grad, loss_ker, loss_ker_grad, DisBreakdown, DisWeights,
};
pub use objective::{attack_gradient, AttackProblem, Evaluation, FieldGradient, Probe, View};
pub use result::{AttackMethod, AttackMetrics, AttackReport, AttackResult, TraceEntry};
pub use si::{curvature_spread, minmax_normalize, search_regions, si_score, RegionSelection, SIScores};
