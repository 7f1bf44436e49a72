use crate::cloud::PointCloud;

const NORMALIZED_TOL: f64 = 1e-9;

/// Centres the cloud on its centroid and scales it into the unit ball so the
/// farthest point sits at radius 1. A cloud already in that form is returned
/// unchanged, which makes the operation idempotent. A cloud whose points all
/// coincide is only centred.
pub fn normalize_cloud(cloud: &PointCloud) -> PointCloud {
    let c = cloud.centroid();
    let r = cloud
        .points()
        .iter()
        .map(|p| (p - c).norm())
        .fold(0.0, f64::max);
    if c.norm() <= NORMALIZED_TOL && (r - 1.0).abs() <= NORMALIZED_TOL {
        return cloud.clone();
    }
    let scale = if r > 0.0 { 1.0 / r } else { 1.0 };
    let pts = cloud.points().iter().map(|p| (p - c) * scale).collect();
    let mut out = cloud.with_points(pts).expect("finite input stays finite");
    for (name, vals) in cloud.attrs() {
        out.set_attr(name.clone(), vals.clone()).expect("same length");
    }
    out
}
