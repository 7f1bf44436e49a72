//! Similarity transforms `p ↦ s·R·p + t`.

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(scale: f64, rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid(format!("bad transform: scale {scale}, translation {translation:?}")));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    /// Rotation by `angle` radians about `axis`.
    pub fn rotation(axis: Vector3<f64>, angle: f64) -> Self {
        Self {
            rotation: UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle),
            ..Self::identity()
        }
    }

    /// Scale after rotation, then translate.
    pub fn apply_point(&self, p: &Point) -> Point {
        self.rotation * p * self.scale + self.translation
    }

    pub fn apply_points(&self, pts: &[Point]) -> Vec<Point> {
        pts.iter().map(|p| self.apply_point(p)).collect()
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        let mut out = cloud.with_points(self.apply_points(cloud.points()))?;
        for (name, values) in cloud.attrs() {
            out.set_attr(name.clone(), values.clone())?;
        }
        Ok(out)
    }

    /// Gradient w.r.t. the input point given one w.r.t. the output.
    pub fn pullback(&self, g: &Point) -> Point {
        self.rotation.inverse() * g * self.scale
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rotation.inverse();
        Self {
            scale: 1.0 / self.scale,
            rotation: inv_rot,
            translation: -(inv_rot * self.translation) / self.scale,
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation * self.scale + self.translation,
        }
    }

    pub fn angle(&self) -> f64 {
        self.rotation.angle()
    }
}

#[derive(Serialize, Deserialize)]
struct RawTransform {
    scale: f64,
    /// `[w, x, y, z]`.
    rotation: [f64; 4],
    translation: [f64; 3],
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let q = self.rotation.quaternion();
        RawTransform {
            scale: self.scale,
            rotation: [q.w, q.i, q.j, q.k],
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTransform::deserialize(d)?;
        let [w, x, y, z] = raw.rotation;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-9 {
            return Err(serde::de::Error::custom("rotation quaternion is not unit length"));
        }
        RigidTransform::new(raw.scale, UnitQuaternion::new_unchecked(q), Vector3::from(raw.translation))
            .map_err(serde::de::Error::custom)
    }
}
