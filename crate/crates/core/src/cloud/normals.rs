use nalgebra::{Matrix3, SymmetricEigen};

use super::{NeighborhoodIndex, Point, PointCloud};
use crate::error::{Error, Result};
use crate::par;

/// Unit normals, one per point, plus a flag for neighbourhoods that had no
/// spatial extent (those fall back to +z).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    normals: Vec<Point>,
    degenerate: Vec<bool>,
}

impl NormalField {
    pub fn normals(&self) -> &[Point] {
        &self.normals
    }

    pub fn normal(&self, j: usize) -> &Point {
        &self.normals[j]
    }

    pub fn is_degenerate(&self, j: usize) -> bool {
        self.degenerate[j]
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }
}

/// PCA normals: the eigenvector of the smallest eigenvalue of the covariance
/// of each point together with its neighbours. The sign is fixed so the first
/// nonzero component is positive.
pub fn estimate_normals(cloud: &PointCloud, nbr: &NeighborhoodIndex) -> Result<NormalField> {
    if nbr.len() != cloud.len() {
        return Err(Error::Invalid(format!(
            "neighbourhood index covers {} points, cloud has {}",
            nbr.len(),
            cloud.len()
        )));
    }
    if nbr.k() < 3 {
        return Err(Error::OutOfRange {
            what: "k",
            value: nbr.k(),
            lo: 3,
            hi: cloud.len().saturating_sub(1),
        });
    }
    let pts = cloud.points();
    let per_point = par::map_range(cloud.len(), |j| {
        let hood = nbr.neighbors(j);
        let p = pts[j];
        if hood.iter().all(|&i| pts[i] == p) {
            return (Point::z(), true);
        }
        let count = (hood.len() + 1) as f64;
        let mean = hood.iter().fold(p, |acc, &i| acc + pts[i]) / count;
        let mut cov = Matrix3::zeros();
        for q in std::iter::once(&p).chain(hood.iter().map(|&i| &pts[i])) {
            let d = q - mean;
            cov += d * d.transpose();
        }
        cov /= count;
        let eig = SymmetricEigen::new(cov);
        let smallest = eig.eigenvalues.imin();
        let n = eig.eigenvectors.column(smallest).normalize();
        (canonical_sign(n), false)
    });
    let (normals, degenerate) = per_point.into_iter().unzip();
    Ok(NormalField {
        normals,
        degenerate,
    })
}

fn canonical_sign(n: Point) -> Point {
    match n.iter().find(|c| c.abs() > 1e-12) {
        Some(&c) if c < 0.0 => -n,
        _ => n,
    }
}
