//! Upsampling by neighbour midpoints followed by FPS back to the original size.

use log::warn;
use rand::Rng as _;

use crate::cloud::{fps, Point, PointCloud, PointGrid};
use crate::error::{Error, Result};
use crate::rng;

/// A fixed linear map from a cloud to a resampled one: output `k` is the
/// midpoint of input points `rows[k].0` and `rows[k].1` (equal for a copy).
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleMap {
    pub rows: Vec<(usize, usize)>,
    pub input_len: usize,
}

impl ResampleMap {
    pub fn identity(m: usize) -> Self {
        Self {
            rows: (0..m).map(|i| (i, i)).collect(),
            input_len: m,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn apply(&self, pts: &[Point]) -> Vec<Point> {
        self.rows
            .iter()
            .map(|&(a, b)| if a == b { pts[a] } else { (pts[a] + pts[b]) * 0.5 })
            .collect()
    }

    /// Transposed map for gradients.
    pub fn pullback(&self, g: &[Point]) -> Vec<Point> {
        let mut out = vec![Point::zeros(); self.input_len];
        for (&(a, b), gk) in self.rows.iter().zip(g) {
            if a == b {
                out[a] += gk;
            } else {
                out[a] += gk * 0.5;
                out[b] += gk * 0.5;
            }
        }
        out
    }
}

/// Number of neighbours a midpoint partner is drawn from.
const PARTNERS: usize = 3;

/// Midpoint rows growing `pts` to `factor·m`: original points first, then
/// midpoints between a point and one of its three nearest neighbours,
/// cycling over the points in a fresh seeded order each pass.
fn upsample_rows(pts: &[Point], factor: usize, rng: &mut rng::Rng) -> Vec<(usize, usize)> {
    let m = pts.len();
    let grid = PointGrid::new(pts, PARTNERS + 1);
    let partners: Vec<Vec<usize>> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| grid.k_nearest(p, PARTNERS, Some(i)).into_iter().map(|(_, j)| j).collect())
        .collect();
    let mut rows: Vec<(usize, usize)> = (0..m).map(|i| (i, i)).collect();
    let target = factor * m;
    let mut order: Vec<usize> = (0..m).collect();
    while rows.len() < target {
        for i in (1..m).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for &i in &order {
            if rows.len() == target {
                break;
            }
            let j = partners[i][rng.random_range(0..PARTNERS)];
            rows.push((i.min(j), i.max(j)));
        }
    }
    rows
}

fn check_factor(factor: usize) -> Result<()> {
    if factor == 0 {
        return Err(Error::Invalid("upsample factor must be >= 1".into()));
    }
    Ok(())
}

/// Resampling map for `pts`: upsample by `factor`, then keep `m` points by FPS.
pub fn resample_map(pts: &[Point], factor: usize, seed: u64) -> Result<ResampleMap> {
    check_factor(factor)?;
    let m = pts.len();
    if m < PARTNERS + 1 {
        warn!("benign resample needs at least {} points, got {m}; unchanged", PARTNERS + 1);
        return Ok(ResampleMap::identity(m));
    }
    let mut rng = rng::seeded(seed);
    let rows = upsample_rows(pts, factor, &mut rng);
    let up = PointCloud::new(ResampleMap { rows: rows.clone(), input_len: m }.apply(pts))?;
    let keep = fps(&up, m, rng.random())?;
    Ok(ResampleMap {
        rows: keep.into_iter().map(|k| rows[k]).collect(),
        input_len: m,
    })
}

/// Upsample then FPS back to the input size; labels are kept, attributes
/// dropped.
pub fn benign_resample(cloud: &PointCloud, factor: usize, seed: u64) -> Result<PointCloud> {
    let map = resample_map(cloud.points(), factor, seed)?;
    cloud.with_points(map.apply(cloud.points()))
}

/// The upsampled cloud before FPS.
pub fn upsample(cloud: &PointCloud, factor: usize, seed: u64) -> Result<PointCloud> {
    check_factor(factor)?;
    let m = cloud.len();
    if m < PARTNERS + 1 {
        return Ok(cloud.clone());
    }
    let rows = upsample_rows(cloud.points(), factor, &mut rng::seeded(seed));
    cloud.with_points(ResampleMap { rows, input_len: m }.apply(cloud.points()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_shape, ShapeFamily, ShapeSpec};

    fn shape() -> PointCloud {
        sample_shape(&ShapeSpec {
            family: ShapeFamily::Cube,
            m: 96,
            jitter: 0.0,
            seed: 4,
        })
        .unwrap()
    }

    #[test]
    fn factor_one_is_a_permutation() {
        let c = shape();
        let out = benign_resample(&c, 1, 9).unwrap();
        let mut a: Vec<_> = out.points().iter().map(|p| [p.x, p.y, p.z].map(f64::to_bits)).collect();
        let mut b: Vec<_> = c.points().iter().map(|p| [p.x, p.y, p.z].map(f64::to_bits)).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn counts_and_midpoints() {
        let c = shape();
        let map = resample_map(c.points(), 2, 1).unwrap();
        assert_eq!(map.len(), c.len());
        assert_eq!(upsample(&c, 3, 1).unwrap().len(), 3 * c.len());
        let out = map.apply(c.points());
        for (&(a, b), p) in map.rows.iter().zip(&out) {
            assert!((p - (c.point(a) + c.point(b)) * 0.5).norm() < 1e-15);
        }
    }

    #[test]
    fn pullback_is_transpose() {
        let c = shape();
        let map = resample_map(c.points(), 2, 5).unwrap();
        let x: Vec<Point> = (0..c.len()).map(|i| Point::new(i as f64, 1.0, -(i as f64))).collect();
        let y: Vec<Point> = (0..map.len()).map(|k| Point::new(0.5, k as f64, 2.0)).collect();
        let lhs: f64 = map.apply(&x).iter().zip(&y).map(|(a, b)| a.dot(b)).sum();
        let rhs: f64 = x.iter().zip(map.pullback(&y)).map(|(a, b)| a.dot(&b)).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn tiny_cloud_unchanged() {
        let c = PointCloud::from_slices(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(benign_resample(&c, 2, 0).unwrap().points(), c.points());
    }
}
