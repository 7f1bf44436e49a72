//! Point-dropping preprocessing defences.

use log::warn;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::cloud::{curvature::population_std, knn, PointCloud};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseKind {
    None,
    Srs,
    Sor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DefenseSpec {
    pub kind: DefenseKind,
    pub srs_drop_ratio: f64,
    pub sor_k: usize,
    pub sor_std_mult: f64,
}

impl Default for DefenseSpec {
    fn default() -> Self {
        Self {
            kind: DefenseKind::None,
            srs_drop_ratio: 0.5,
            sor_k: 2,
            sor_std_mult: 1.1,
        }
    }
}

impl DefenseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn srs() -> Self {
        Self {
            kind: DefenseKind::Srs,
            ..Self::default()
        }
    }

    pub fn sor() -> Self {
        Self {
            kind: DefenseKind::Sor,
            ..Self::default()
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            DefenseKind::None => "none",
            DefenseKind::Srs => "srs",
            DefenseKind::Sor => "sor",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.srs_drop_ratio > 0.0 && self.srs_drop_ratio < 1.0) {
            errs.push(format!("defense.srs_drop_ratio must be in (0, 1), got {}", self.srs_drop_ratio));
        }
        if self.sor_k == 0 {
            errs.push("defense.sor_k must be >= 1".to_string());
        }
        if !(self.sor_std_mult > 0.0 && self.sor_std_mult.is_finite()) {
            errs.push(format!("defense.sor_std_mult must be > 0, got {}", self.sor_std_mult));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Applies the defence; `seed` only matters for SRS.
    pub fn apply(&self, cloud: &PointCloud, seed: u64) -> Result<PointCloud> {
        match self.kind {
            DefenseKind::None => Ok(cloud.clone()),
            DefenseKind::Srs => srs(cloud, self.srs_drop_ratio, seed),
            DefenseKind::Sor => sor(cloud, self.sor_k, self.sor_std_mult),
        }
    }
}

/// Keeps a seeded uniform subset of `⌈m·(1 − drop_ratio)⌉` points in their
/// original order.
pub fn srs(cloud: &PointCloud, drop_ratio: f64, seed: u64) -> Result<PointCloud> {
    if !(0.0..1.0).contains(&drop_ratio) {
        return Err(Error::Invalid(format!("drop_ratio must be in [0, 1), got {drop_ratio}")));
    }
    let m = cloud.len();
    // Guard against 0.5·1024 landing a hair above 512.
    let keep = ((m as f64 * (1.0 - drop_ratio)) - 1e-9).ceil().max(0.0) as usize;
    if keep == 0 {
        return Err(Error::Invalid(format!("SRS with ratio {drop_ratio} keeps no points of {m}")));
    }
    let mut idx = sample(&mut rng::seeded(seed), m, keep).into_vec();
    idx.sort_unstable();
    cloud.select(&idx)
}

/// Mean distance from every point to its `k` nearest neighbours.
pub fn mean_knn_distances(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    let nbr = knn(cloud, k)?;
    Ok((0..cloud.len()).map(|j| nbr.distances(j).iter().sum::<f64>() / k as f64).collect())
}

/// Drops points whose mean kNN distance exceeds `mean + std_mult·std`.
pub fn sor(cloud: &PointCloud, k: usize, std_mult: f64) -> Result<PointCloud> {
    if cloud.len() <= k {
        return Err(Error::OutOfRange {
            what: "sor k",
            value: k,
            lo: 1,
            hi: cloud.len().saturating_sub(1),
        });
    }
    let d = mean_knn_distances(cloud, k)?;
    let std = population_std(&d);
    if std == 0.0 {
        return Ok(cloud.clone());
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let limit = mean + std_mult * std;
    let keep: Vec<usize> = (0..d.len()).filter(|&j| d[j] <= limit).collect();
    if keep.is_empty() {
        let best = (0..d.len()).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap_or(0);
        warn!("SOR removed every point; keeping point {best}");
        return cloud.select(&[best]);
    }
    cloud.select(&keep)
}
