//! Shape-based adversarial point clouds.
//!
//! The attack places a handful of Gaussian deformation centres on surface
//! regions that matter to the classifier and are visually busy, then
//! optimises per-centre offsets and bandwidths under a Carlini-Wagner style
//! objective. Every displaced point is a kernel-weighted average of the
//! centre offsets, so no point can leave the smooth deformation field.
//!
//! Modules:
//! - [`cloud`]: point clouds, file formats, kNN/FPS, normals, curvature.
//! - [`classifier`]: PointNet-lite victim with exact input gradients.
//! - [`attack`]: SI scoring, region search, kernel deformation, losses,
//!   the binary-search optimiser and the IFGM baseline.
//! - [`hardening`]: rigid transforms, MaxOT search, benign resampling.
//! - [`defense`]: SRS/SOR and the metric/evaluation harness.
//! - [`data`]: synthetic shape families and coloured export.
//! - [`config`]: the TOML experiment file.

pub mod attack;
pub mod classifier;
pub mod cloud;
pub mod config;
pub mod data;
pub mod defense;
pub mod error;
pub mod hardening;
pub mod par;
pub mod rng;

pub use cloud::{Point, PointCloud};
pub use error::{Error, Result};
