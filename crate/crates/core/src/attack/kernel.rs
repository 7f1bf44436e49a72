//! Gaussian deformation field and Nadaraya-Watson blending.

use serde::{Deserialize, Serialize};

use crate::cloud::{dist2, Point, PointCloud};
use crate::error::{Error, Result};

/// `exp(−‖center − point‖² / 2σ²)`.
pub fn gauss_weight(center: &Point, point: &Point, sigma: f64) -> f64 {
    (-dist2(center, point) / (2.0 * sigma * sigma)).exp()
}

/// Per-centre offsets and bandwidths around fixed clean centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationField {
    centers: Vec<[f64; 3]>,
    pub deltas: Vec<[f64; 3]>,
    pub sigmas: Vec<f64>,
}

impl DeformationField {
    pub fn new(centers: Vec<Point>, deltas: Vec<Point>, sigmas: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != deltas.len() || centers.len() != sigmas.len() {
            return Err(Error::Invalid(format!(
                "field needs matching non-empty centres/deltas/sigmas, got {}/{}/{}",
                centers.len(),
                deltas.len(),
                sigmas.len()
            )));
        }
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Invalid("bandwidths must be positive and finite".into()));
        }
        Ok(Self {
            centers: centers.iter().map(|c| [c.x, c.y, c.z]).collect(),
            deltas: deltas.iter().map(|d| [d.x, d.y, d.z]).collect(),
            sigmas,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, i: usize) -> Point {
        Point::from(self.centers[i])
    }

    pub fn delta(&self, i: usize) -> Point {
        Point::from(self.deltas[i])
    }

    pub fn set_delta(&mut self, i: usize, d: Point) {
        self.deltas[i] = [d.x, d.y, d.z];
    }

    pub fn max_delta_norm(&self) -> f64 {
        (0..self.len()).map(|i| self.delta(i).norm()).fold(0.0, f64::max)
    }

    /// Clamps every bandwidth into `[lo, hi]`.
    pub fn clip_sigmas(&mut self, lo: f64, hi: f64) {
        for s in self.sigmas.iter_mut() {
            *s = s.clamp(lo, hi);
        }
    }
}

/// Squared distances from each clean point to each centre, `m × ñ` row-major.
#[derive(Debug, Clone)]
pub struct KernelGeometry {
    base: Vec<Point>,
    d2: Vec<f64>,
    n_centers: usize,
}

/// A deformed cloud plus what backprop needs.
#[derive(Debug, Clone)]
pub struct DeformState {
    pub adv: Vec<Point>,
    /// Normalised weights ω_ij = w_ij / Σ_l w_lj, `m × ñ` row-major.
    pub omega: Vec<f64>,
    /// Displacement u_j = p'_j − p_j.
    pub disp: Vec<Point>,
}

impl KernelGeometry {
    pub fn new(base: &[Point], field: &DeformationField) -> Self {
        let n = field.len();
        let mut d2 = Vec::with_capacity(base.len() * n);
        for p in base {
            for i in 0..n {
                d2.push(dist2(&field.center(i), p));
            }
        }
        Self {
            base: base.to_vec(),
            d2,
            n_centers: n,
        }
    }

    pub fn base(&self) -> &[Point] {
        &self.base
    }

    /// `p'_j = p_j + Σ_i ω_ij δ_i`. Exponents are shifted by their per-point
    /// maximum before exponentiation, so the normaliser never underflows and
    /// a point far from every centre follows its dominant kernel.
    pub fn deform(&self, field: &DeformationField) -> DeformState {
        let n = self.n_centers;
        debug_assert_eq!(field.len(), n);
        let inv2s2: Vec<f64> = field.sigmas.iter().map(|s| 1.0 / (2.0 * s * s)).collect();
        let deltas: Vec<Point> = (0..n).map(|i| field.delta(i)).collect();
        let mut omega = vec![0.0; self.base.len() * n];
        let mut disp = Vec::with_capacity(self.base.len());
        let mut adv = Vec::with_capacity(self.base.len());
        for (j, p) in self.base.iter().enumerate() {
            let row = &mut omega[j * n..(j + 1) * n];
            let d2 = &self.d2[j * n..(j + 1) * n];
            let mut top = f64::NEG_INFINITY;
            for i in 0..n {
                row[i] = -d2[i] * inv2s2[i];
                top = top.max(row[i]);
            }
            let mut total = 0.0;
            for w in row.iter_mut() {
                *w = (*w - top).exp();
                total += *w;
            }
            let mut u = Point::zeros();
            for (w, d) in row.iter_mut().zip(&deltas) {
                *w /= total;
                u += d * *w;
            }
            disp.push(u);
            adv.push(p + u);
        }
        DeformState { adv, omega, disp }
    }

    /// Chain rule from per-point gradients `g_j = ∂L/∂p'_j` to the field:
    /// `∂L/∂δ_i = Σ_j ω_ij g_j` and
    /// `∂L/∂σ_i = Σ_j ω_ij (d_ij² / σ_i³) ⟨g_j, δ_i − u_j⟩`.
    pub fn backprop(&self, field: &DeformationField, state: &DeformState, g: &[Point]) -> (Vec<Point>, Vec<f64>) {
        let n = self.n_centers;
        let deltas: Vec<Point> = (0..n).map(|i| field.delta(i)).collect();
        let inv_s3: Vec<f64> = field.sigmas.iter().map(|s| 1.0 / (s * s * s)).collect();
        let mut gd = vec![Point::zeros(); n];
        let mut gs = vec![0.0; n];
        for (j, gj) in g.iter().enumerate() {
            if *gj == Point::zeros() {
                continue;
            }
            let row = &state.omega[j * n..(j + 1) * n];
            let d2 = &self.d2[j * n..(j + 1) * n];
            let gu = gj.dot(&state.disp[j]);
            for i in 0..n {
                let w = row[i];
                if w == 0.0 {
                    continue;
                }
                gd[i] += gj * w;
                gs[i] += w * d2[i] * inv_s3[i] * (gj.dot(&deltas[i]) - gu);
            }
        }
        (gd, gs)
    }
}

/// Applies `field` to `cloud`; weights use the field's fixed centres.
pub fn deform(cloud: &PointCloud, field: &DeformationField) -> Result<PointCloud> {
    let geo = KernelGeometry::new(cloud.points(), field);
    cloud.with_points(geo.deform(field).adv)
}
