//! Saliency-imperceptibility scores and the two-stage region search.

use std::cmp::Ordering;

use log::warn;

use super::config::RegionSearchConfig;
use crate::classifier::{saliency_scores, ClassifierModel};
use crate::cloud::{curvature_std_all, estimate_normals, fps, knn, PointCloud, PointGrid};
use crate::error::{Error, Result};

/// Per-point scores; `s1`, `s2` are min-max normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct SIScores {
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub alpha: f64,
    pub combined: Vec<f64>,
    /// Un-normalised curvature spread, kept for the hide loss.
    pub cstd: Vec<f64>,
}

/// Maps values onto `[0, 1]`; a constant channel becomes all zeros.
pub fn minmax_normalize(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

impl SIScores {
    pub fn from_channels(s1_raw: &[f64], cstd: Vec<f64>, alpha: f64) -> Result<Self> {
        if s1_raw.len() != cstd.len() {
            return Err(Error::AttrLength {
                name: "s2".into(),
                len: cstd.len(),
                expected: s1_raw.len(),
            });
        }
        let s1 = minmax_normalize(s1_raw);
        let s2 = minmax_normalize(&cstd);
        let combined = s1.iter().zip(&s2).map(|(a, b)| a + alpha * b).collect();
        Ok(Self {
            s1,
            s2,
            alpha,
            combined,
            cstd,
        })
    }

    pub fn len(&self) -> usize {
        self.combined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combined.is_empty()
    }
}

/// Curvature spread of every point with a `k`-neighbourhood.
pub fn curvature_spread(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    let nbr = knn(cloud, k)?;
    let normals = estimate_normals(cloud, &nbr)?;
    Ok(curvature_std_all(cloud, &normals, &nbr))
}

pub fn si_score(cloud: &PointCloud, model: &ClassifierModel, cfg: &RegionSearchConfig, alpha: f64) -> Result<SIScores> {
    let s1 = saliency_scores(model, cloud)?;
    let cstd = curvature_spread(cloud, cfg.k)?;
    SIScores::from_channels(&s1, cstd, alpha)
}

/// Result of [`search_regions`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSelection {
    /// Final centres, highest score first.
    pub centers: Vec<usize>,
    /// Distinct stage-1 winners in region order.
    pub candidates: Vec<usize>,
    /// Fewer distinct candidates than requested centres.
    pub shortfall: bool,
}

fn by_score_desc(scores: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |a, b| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b))
}

pub fn search_regions(cloud: &PointCloud, si: &SIScores, cfg: &RegionSearchConfig) -> Result<RegionSelection> {
    cfg.validate()?;
    let m = cloud.len();
    if si.len() != m {
        return Err(Error::AttrLength {
            name: "si".into(),
            len: si.len(),
            expected: m,
        });
    }
    let scores = &si.combined;
    let seeds = fps(cloud, cfg.n.min(m), cfg.seed)?;
    let grid = PointGrid::new(cloud.points(), cfg.k);
    let mut candidates = Vec::with_capacity(seeds.len());
    let mut taken = vec![false; m];
    let order = by_score_desc(scores);
    for &s in &seeds {
        let region = grid.k_nearest(cloud.point(s), cfg.k - 1, Some(s));
        let best = region
            .iter()
            .map(|(_, i)| *i)
            .fold(s, |best, i| if order(&i, &best) == Ordering::Less { i } else { best });
        if !taken[best] {
            taken[best] = true;
            candidates.push(best);
        }
    }
    let mut centers = candidates.clone();
    centers.sort_by(&order);
    let shortfall = centers.len() < cfg.n_tilde;
    if shortfall {
        warn!("region search found {} distinct centres, {} requested", centers.len(), cfg.n_tilde);
    }
    centers.truncate(cfg.n_tilde);
    Ok(RegionSelection {
        centers,
        candidates,
        shortfall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_shape, ShapeFamily, ShapeSpec};

    fn sphere(m: usize) -> PointCloud {
        sample_shape(&ShapeSpec {
            family: ShapeFamily::Sphere,
            m,
            jitter: 0.0,
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn alpha_zero_and_constant_channels() {
        let si = SIScores::from_channels(&[1.0, 3.0, 2.0], vec![5.0, 1.0, 0.0], 0.0).unwrap();
        assert_eq!(si.combined, si.s1);
        let si = SIScores::from_channels(&[2.0; 3], vec![5.0, 1.0, 7.0], 1.0).unwrap();
        assert_eq!(si.s1, vec![0.0; 3]);
        assert_eq!(si.combined, si.s2);
    }

    #[test]
    fn monotone_scores_pick_lowest_indices() {
        let c = sphere(128);
        let scores: Vec<f64> = (0..128).map(|i| 1000.0 - i as f64).collect();
        let si = SIScores::from_channels(&scores, vec![0.0; 128], 1.0).unwrap();
        let cfg = RegionSearchConfig { n: 16, k: 8, n_tilde: 8, seed: 1 };
        let sel = search_regions(&c, &si, &cfg).unwrap();
        let mut sorted = sel.candidates.clone();
        sorted.sort();
        assert_eq!(sel.centers, sorted[..sel.centers.len()].to_vec());
        assert!(sel.centers.len() <= 8);
    }

    #[test]
    fn no_truncation_when_all_kept() {
        let c = sphere(128);
        let scores: Vec<f64> = (0..128).map(|i| ((i * 37) % 128) as f64).collect();
        let si = SIScores::from_channels(&scores, vec![0.0; 128], 1.0).unwrap();
        let cfg = RegionSearchConfig { n: 10, k: 4, n_tilde: 10, seed: 0 };
        let sel = search_regions(&c, &si, &cfg).unwrap();
        let mut a = sel.centers.clone();
        let mut b = sel.candidates.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
