//! Making adversarial clouds survive re-posing and resampling.

mod config;
mod hardened;
mod maxot;
mod resample;
mod transform;

pub use config::HardeningConfig;
pub use hardened::{hardened_attack, hardened_attack_with_hook, simulate_rescan, HardenedStep};
pub use maxot::{maxot_search, random_transform, MaxotOutcome};
pub use resample::{benign_resample, resample_map, upsample, ResampleMap};
pub use transform::RigidTransform;
