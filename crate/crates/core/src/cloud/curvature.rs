//! Local curvature and its neighbourhood standard deviation.

use super::{NeighborhoodIndex, NormalField, PointCloud};
use crate::par;

/// Mean absolute cosine between the chords to each neighbour and the normal
/// at `j`. Coincident neighbours contribute zero.
pub fn local_curvature(cloud: &PointCloud, normals: &NormalField, nbr: &NeighborhoodIndex, j: usize) -> f64 {
    let p = cloud.point(j);
    let n = normals.normal(j);
    let hood = nbr.neighbors(j);
    let sum: f64 = hood
        .iter()
        .map(|&i| {
            let chord = cloud.point(i) - p;
            let len = chord.norm();
            if len > 0.0 {
                (chord.dot(n) / len).abs()
            } else {
                0.0
            }
        })
        .sum();
    sum / hood.len() as f64
}

pub fn local_curvatures(cloud: &PointCloud, normals: &NormalField, nbr: &NeighborhoodIndex) -> Vec<f64> {
    par::map_range(cloud.len(), |j| local_curvature(cloud, normals, nbr, j))
}

/// Population standard deviation of the neighbours' curvatures.
pub fn curvature_std(cloud: &PointCloud, normals: &NormalField, nbr: &NeighborhoodIndex, j: usize) -> f64 {
    let vals: Vec<f64> = nbr
        .neighbors(j)
        .iter()
        .map(|&q| local_curvature(cloud, normals, nbr, q))
        .collect();
    population_std(&vals)
}

/// `curvature_std` for every point, sharing the per-point curvatures.
pub fn curvature_std_all(cloud: &PointCloud, normals: &NormalField, nbr: &NeighborhoodIndex) -> Vec<f64> {
    let curv = local_curvatures(cloud, normals, nbr);
    par::map_range(cloud.len(), |j| {
        let vals: Vec<f64> = nbr.neighbors(j).iter().map(|&q| curv[q]).collect();
        population_std(&vals)
    })
}

pub(crate) fn population_std(vals: &[f64]) -> f64 {
    if vals.iter().all(|v| *v == vals[0]) {
        return 0.0;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}
