//! Classification margin and the three distortion regularisers.

use nalgebra::DVector;

use super::kernel::DeformationField;
use crate::classifier::cw_margin;
use crate::cloud::{Point, PointCloud, PointGrid};
use crate::error::Result;

/// Margin loss, floored at `−κ`.
pub fn loss_cls(logits: &DVector<f64>, true_label: usize, kappa: f64, target: Option<usize>) -> Result<f64> {
    Ok(cw_margin(logits, true_label, kappa, target)?.0)
}

/// Weighted sum of the distortion terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl DisWeights {
    pub fn combine(&self, ker: f64, hide: f64, cha: f64) -> f64 {
        self.lambda1 * ker + self.lambda2 * hide + self.lambda3 * cha
    }
}

/// Individual distortion terms and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisBreakdown {
    pub ker: f64,
    pub hide: f64,
    pub cha: f64,
    pub total: f64,
}

/// `‖δ‖ + ‖a·1 − σ‖` with its gradients. A zero norm contributes a zero
/// subgradient.
pub fn loss_ker_grad(field: &DeformationField, a: f64) -> (f64, Vec<Point>, Vec<f64>) {
    let n = field.len();
    let dnorm = (0..n).map(|i| field.delta(i).norm_squared()).sum::<f64>().sqrt();
    let snorm = field.sigmas.iter().map(|s| (a - s) * (a - s)).sum::<f64>().sqrt();
    let gd = (0..n)
        .map(|i| if dnorm > 0.0 { field.delta(i) / dnorm } else { Point::zeros() })
        .collect();
    let gs = field
        .sigmas
        .iter()
        .map(|s| if snorm > 0.0 { -(a - s) / snorm } else { 0.0 })
        .collect();
    (dnorm + snorm, gd, gs)
}

pub fn loss_ker(field: &DeformationField, a: f64) -> f64 {
    loss_ker_grad(field, a).0
}

/// Min-max normalisation. The positions of the extremes are returned so the
/// caller can differentiate with them held fixed; `None` for a constant input.
fn minmax(v: &[f64]) -> Option<(Vec<f64>, usize, usize)> {
    if v.is_empty() {
        return None;
    }
    let (mut lo, mut hi) = (0, 0);
    for (i, x) in v.iter().enumerate() {
        if *x < v[lo] {
            lo = i;
        }
        if *x > v[hi] {
            hi = i;
        }
    }
    let range = v[hi] - v[lo];
    if !(range > 0.0) {
        return None;
    }
    Some((v.iter().map(|x| (x - v[lo]) / range).collect(), lo, hi))
}

/// Cosine similarity of the min-max normalised bandwidths and centre
/// curvature spreads, with its gradient in σ.
pub fn loss_hide_grad(sigmas: &[f64], center_cstd: &[f64]) -> (f64, Vec<f64>) {
    let n = sigmas.len();
    let zero = (0.0, vec![0.0; n]);
    if n < 2 || center_cstd.len() != n {
        return zero;
    }
    let (Some((s, lo, hi)), Some((c, _, _))) = (minmax(sigmas), minmax(center_cstd)) else {
        return zero;
    };
    let s_norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let c_norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot: f64 = s.iter().zip(&c).map(|(a, b)| a * b).sum();
    let value = dot / (s_norm * c_norm);
    // d/ds of the cosine, then through s_k = (σ_k − σ_lo)/(σ_hi − σ_lo).
    let ds: Vec<f64> = s
        .iter()
        .zip(&c)
        .map(|(sk, ck)| ck / (s_norm * c_norm) - value * sk / (s_norm * s_norm))
        .collect();
    let range = sigmas[hi] - sigmas[lo];
    let mut grad: Vec<f64> = ds.iter().map(|d| d / range).collect();
    let mut to_lo = 0.0;
    let mut to_hi = 0.0;
    for (k, d) in ds.iter().enumerate() {
        to_lo += d * (s[k] - 1.0) / range;
        to_hi += -d * s[k] / range;
    }
    // s_lo ≡ 0 and s_hi ≡ 1, so their own terms drop out of the sums.
    grad[lo] = to_lo + ds[lo] / range;
    grad[hi] = to_hi + ds[hi] / range;
    (value, grad)
}

pub fn loss_hide(field: &DeformationField, center_cstd: &[f64]) -> f64 {
    loss_hide_grad(&field.sigmas, center_cstd).0
}

/// Symmetric mean squared nearest-neighbour distance, with the gradient
/// with respect to `adv`.
pub fn chamfer_grad(clean: &[Point], adv: &[Point]) -> (f64, Vec<Point>) {
    let clean_grid = PointGrid::new(clean, 8);
    let adv_grid = PointGrid::new(adv, 8);
    let (m, m2) = (clean.len() as f64, adv.len() as f64);
    let mut grad = vec![Point::zeros(); adv.len()];
    let mut forward = 0.0;
    for p in clean {
        let (d2, j) = adv_grid.nearest(p);
        forward += d2;
        grad[j] += (adv[j] - p) * (2.0 / m);
    }
    let mut backward = 0.0;
    for (j, q) in adv.iter().enumerate() {
        let (d2, i) = clean_grid.nearest(q);
        backward += d2;
        grad[j] += (q - clean[i]) * (2.0 / m2);
    }
    (forward / m + backward / m2, grad)
}

pub fn chamfer_points(clean: &[Point], adv: &[Point]) -> f64 {
    let clean_grid = PointGrid::new(clean, 8);
    let adv_grid = PointGrid::new(adv, 8);
    let f: f64 = clean.iter().map(|p| adv_grid.nearest(p).0).sum();
    let b: f64 = adv.iter().map(|q| clean_grid.nearest(q).0).sum();
    f / clean.len() as f64 + b / adv.len() as f64
}

pub fn loss_chamfer(clean: &PointCloud, adv: &PointCloud) -> f64 {
    chamfer_points(clean.points(), adv.points())
}

/// `λ1·L_ker + λ2·L_hide + λ3·L_cha`.
pub fn loss_dis(field: &DeformationField, a: f64, clean: &PointCloud, adv: &PointCloud, center_cstd: &[f64], w: DisWeights) -> DisBreakdown {
    let ker = loss_ker(field, a);
    let hide = loss_hide(field, center_cstd);
    let cha = loss_chamfer(clean, adv);
    DisBreakdown {
        ker,
        hide,
        cha,
        total: w.combine(ker, hide, cha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(deltas: Vec<Point>, sigmas: Vec<f64>) -> DeformationField {
        let centers = (0..sigmas.len()).map(|i| Point::new(i as f64, 0.0, 0.0)).collect();
        DeformationField::new(centers, deltas, sigmas).unwrap()
    }

    #[test]
    fn ker_hand_values() {
        let f = field(vec![Point::zeros(); 2], vec![1.5, 1.5]);
        assert_eq!(loss_ker(&f, 1.5), 0.0);
        let f = field(vec![Point::new(3.0, 0.0, 0.0)], vec![0.5]);
        assert!((loss_ker(&f, 1.5) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn hide_hand_values() {
        assert!((loss_hide_grad(&[0.2, 0.4, 0.9], &[1.0, 2.0, 4.5]).0 - 1.0).abs() < 1e-12);
        assert_eq!(loss_hide_grad(&[1.0, 0.0], &[0.0, 1.0]).0, 0.0);
        assert_eq!(loss_hide_grad(&[0.3, 0.3], &[0.0, 1.0]), (0.0, vec![0.0, 0.0]));
        assert_eq!(loss_hide_grad(&[0.3], &[1.0]).0, 0.0);
    }

    #[test]
    fn hide_gradient_matches_differences() {
        let s = [0.3, 0.9, 0.5, 0.7, 0.2];
        let c = [0.1, 0.4, 0.35, 0.05, 0.3];
        let (_, g) = loss_hide_grad(&s, &c);
        for k in 0..s.len() {
            let h = 1e-6;
            let mut up = s;
            up[k] += h;
            let mut dn = s;
            dn[k] -= h;
            let fd = (loss_hide_grad(&up, &c).0 - loss_hide_grad(&dn, &c).0) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "k={k} fd={fd} an={}", g[k]);
        }
    }

    #[test]
    fn chamfer_hand_values() {
        let a = vec![Point::zeros()];
        let b = vec![Point::x()];
        assert_eq!(chamfer_points(&a, &b), 2.0);
        assert_eq!(chamfer_points(&a, &a), 0.0);
        let (v, g) = chamfer_grad(&a, &b);
        assert_eq!(v, 2.0);
        assert_eq!(g[0], Point::new(4.0, 0.0, 0.0));
    }

    #[test]
    fn dis_combination() {
        let w = DisWeights { lambda1: 1.0, lambda2: 1.0, lambda3: 0.1 };
        assert!((w.combine(4.0, 0.5, 2.0) - 4.7).abs() < 1e-12);
        let z = DisWeights { lambda1: 0.0, lambda2: 0.0, lambda3: 0.0 };
        assert_eq!(z.combine(4.0, 0.5, 2.0), 0.0);
    }
}
