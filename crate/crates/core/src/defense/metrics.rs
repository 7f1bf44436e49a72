//! Imperceptibility metrics.

use log::warn;

use crate::attack::{curvature_spread, loss_chamfer};
use crate::cloud::{knn, PointCloud, PointGrid};
use crate::error::Result;

/// l2 distance between the per-point curvature-spread vectors of the two
/// clouds. Equal-size clouds correspond by index; otherwise each point of
/// `adv` is paired with its nearest point in `clean`.
pub fn csd_metric(clean: &PointCloud, adv: &PointCloud, k: usize) -> Result<f64> {
    let a = curvature_spread(clean, k)?;
    let b = curvature_spread(adv, k)?;
    if clean.len() == adv.len() {
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
    }
    warn!("CSD over clouds of {} and {} points; pairing by nearest neighbour", clean.len(), adv.len());
    let grid = PointGrid::new(clean.points(), 4);
    Ok(adv
        .points()
        .iter()
        .zip(&b)
        .map(|(p, y)| {
            let x = a[grid.nearest(p).1];
            (x - y) * (x - y)
        })
        .sum::<f64>()
        .sqrt())
}

/// Mean over points of the mean distance to their `k` nearest neighbours.
pub fn knn_dist_metric(adv: &PointCloud, k: usize) -> Result<f64> {
    let nbr = knn(adv, k)?;
    let total: f64 = (0..adv.len()).map(|j| nbr.distances(j).iter().sum::<f64>() / k as f64).sum();
    Ok(total / adv.len() as f64)
}

/// Symmetric mean squared nearest-neighbour distance.
pub fn chamfer(clean: &PointCloud, adv: &PointCloud) -> f64 {
    loss_chamfer(clean, adv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point;

    #[test]
    fn grid_knn_distance_is_spacing() {
        let h = 0.25;
        let mut pts = Vec::new();
        for x in 0..5 {
            for y in 0..5 {
                pts.push(Point::new(x as f64 * h, y as f64 * h, 0.0));
            }
        }
        let c = PointCloud::new(pts.clone()).unwrap();
        assert!((knn_dist_metric(&c, 1).unwrap() - h).abs() < 1e-12);
        pts.push(Point::new(9.0, 9.0, 9.0));
        let with_outlier = PointCloud::new(pts).unwrap();
        assert!(knn_dist_metric(&with_outlier, 1).unwrap() > knn_dist_metric(&c, 1).unwrap());
    }
}
