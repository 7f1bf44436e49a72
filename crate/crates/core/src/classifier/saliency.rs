//! Point saliency from the radial component of the cross-entropy gradient.
//!
//! `S1(p) = −(∂L/∂r)·r^(1+α)` with `r` the distance of `p` from the
//! coordinate-wise median and `α = 1`. A large score means pulling the point
//! towards the centre (the effect of dropping it) raises the loss the most.

use super::{input_gradient, ClassifierModel, LossSpec};
use crate::cloud::{Point, PointCloud};
use crate::error::Result;

pub const SALIENCY_ALPHA: f64 = 1.0;

pub fn coordinate_median(points: &[Point]) -> Point {
    let mut out = Point::zeros();
    for axis in 0..3 {
        let mut v: Vec<f64> = points.iter().map(|p| p[axis]).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        out[axis] = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    }
    out
}

/// Scores from an already computed input gradient.
pub fn saliency_from_gradient(points: &[Point], grads: &[Point]) -> Vec<f64> {
    let center = coordinate_median(points);
    points
        .iter()
        .zip(grads)
        .map(|(p, g)| {
            let offset = p - center;
            let r = offset.norm();
            if r == 0.0 {
                return 0.0;
            }
            let radial = g.dot(&offset) / r;
            -radial * r.powf(1.0 + SALIENCY_ALPHA)
        })
        .collect()
}

/// Saliency of every point of a labelled cloud.
pub fn saliency_scores(model: &ClassifierModel, cloud: &PointCloud) -> Result<Vec<f64>> {
    let report = input_gradient(model, cloud, &LossSpec::CrossEntropy)?;
    Ok(saliency_from_gradient(cloud.points(), &report.grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_and_median_point() {
        let pts = vec![Point::new(0.0, 0.0, 0.0), Point::new(1.0, 1.0, 1.0), Point::new(-1.0, -1.0, -1.0)];
        let zero = vec![Point::zeros(); 3];
        assert_eq!(saliency_from_gradient(&pts, &zero), vec![0.0; 3]);
        let g = vec![Point::new(1.0, 2.0, 3.0); 3];
        let s = saliency_from_gradient(&pts, &g);
        assert_eq!(s[0], 0.0);
        // r = √3, radial = 6/√3, S = −(6/√3)·3
        assert!((s[1] + 6.0 / 3f64.sqrt() * 3.0).abs() < 1e-12);
    }

    #[test]
    fn even_count_median_averages() {
        let pts = vec![Point::new(0.0, 4.0, 1.0), Point::new(2.0, 0.0, 1.0)];
        assert_eq!(coordinate_median(&pts), Point::new(1.0, 2.0, 1.0));
    }
}
