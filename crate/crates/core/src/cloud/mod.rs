//! Point-cloud data model, file formats, spatial queries, normals and the
//! curvature statistics shared by the SI score and the CSD metric.

pub(crate) mod curvature;
mod io;
mod normals;
mod spatial;

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use curvature::{curvature_std, curvature_std_all, local_curvature, local_curvatures};
pub use io::{load_cloud, save_cloud, CloudFormat};
pub use normals::{estimate_normals, NormalField};
pub use spatial::{fps, knn, knn_brute_force, NeighborhoodIndex, PointGrid};

pub type Point = Vector3<f64>;

/// An ordered set of 3D points with an optional class label and named
/// per-point scalar channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    label: Option<usize>,
    attrs: BTreeMap<String, Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            points,
            label: None,
            attrs: BTreeMap::new(),
        })
    }

    pub fn from_slices(coords: &[[f64; 3]]) -> Result<Self> {
        Self::new(coords.iter().map(|c| Point::new(c[0], c[1], c[2])).collect())
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn set_label(&mut self, label: Option<usize>) {
        self.label = label;
    }

    pub fn with_attr(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.set_attr(name, values)?;
        Ok(self)
    }

    pub fn set_attr(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.points.len() {
            return Err(Error::AttrLength {
                name,
                len: values.len(),
                expected: self.points.len(),
            });
        }
        self.attrs.insert(name, values);
        Ok(())
    }

    pub fn attr(&self, name: &str) -> Option<&[f64]> {
        self.attrs.get(name).map(Vec::as_slice)
    }

    pub fn attrs(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.attrs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: a cloud holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    /// New cloud with the same label but different coordinates. Attribute
    /// channels are dropped since they no longer describe the points.
    pub fn with_points(&self, points: Vec<Point>) -> Result<Self> {
        let mut out = Self::new(points)?;
        out.label = self.label;
        Ok(out)
    }

    /// Keeps the listed indices, in the given order. Attributes follow.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Self::new(indices.iter().map(|&i| self.points[i]).collect())?;
        out.label = self.label;
        for (name, vals) in &self.attrs {
            out.attrs
                .insert(name.clone(), indices.iter().map(|&i| vals[i]).collect());
        }
        Ok(out)
    }

    pub fn centroid(&self) -> Point {
        let sum = self.points.iter().fold(Point::zeros(), |acc, p| acc + p);
        sum / self.points.len() as f64
    }

    /// Largest distance of any point from the centroid.
    pub fn radius(&self) -> f64 {
        let c = self.centroid();
        self.points
            .iter()
            .map(|p| (p - c).norm())
            .fold(0.0, f64::max)
    }

    /// Flattens to `[x0, y0, z0, x1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }
}

/// Euclidean squared distance.
#[inline]
pub fn dist2(a: &Point, b: &Point) -> f64 {
    (a - b).norm_squared()
}
