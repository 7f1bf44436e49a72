//! Worst-case similarity transform search.

use nalgebra::{DVector, UnitQuaternion, Vector3};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::config::HardeningConfig;
use super::transform::RigidTransform;
use crate::classifier::{argmax, ClassifierModel, ForwardCache};
use crate::cloud::Point;
use crate::error::{Error, Result};
use crate::rng;

/// Raw margin `Z_pos − Z_neg` (positive means the attack has not succeeded)
/// and its logit gradient.
fn raw_margin(logits: &DVector<f64>, label: usize, target: Option<usize>) -> (f64, DVector<f64>) {
    let best_except = |skip: usize| {
        (0..logits.len())
            .filter(|&j| j != skip)
            .max_by(|&a, &b| logits[a].total_cmp(&logits[b]).then(b.cmp(&a)))
            .unwrap_or(skip)
    };
    let (pos, neg) = match target {
        None => (label, best_except(label)),
        Some(t) => (best_except(t), t),
    };
    let mut g = DVector::zeros(logits.len());
    g[pos] += 1.0;
    g[neg] -= 1.0;
    (logits[pos] - logits[neg], g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxotOutcome {
    pub transform: RigidTransform,
    /// `max(−κ, margin)` at `transform`.
    pub objective: f64,
    pub identity_objective: f64,
    /// Objective after the start and after every accepted step.
    pub history: Vec<f64>,
    pub predicted: usize,
}

struct Pass {
    dlogits: DVector<f64>,
    cache: ForwardCache,
    seen: Vec<Point>,
}

struct Probe {
    floored: f64,
    raw: f64,
    predicted: usize,
}

/// Projected, normalised ascent on `max(−κ, margin)` over scale, rotation
/// and translation. Directions follow the raw margin so a saturated start
/// can still move; a step is kept only if it raises `(floored, raw)`
/// lexicographically, otherwise its length is halved up to
/// `maxot_backtracks` times.
pub fn maxot_search(model: &ClassifierModel, points: &[Point], cfg: &HardeningConfig, label: usize, kappa: f64, target: Option<usize>) -> Result<MaxotOutcome> {
    if label >= model.num_classes() {
        return Err(Error::Invalid("label out of range".into()));
    }
    let radius = points.iter().map(|p| p.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let t_max = cfg.translation_max * radius;
    let eval = |t: &RigidTransform| -> (Probe, Pass) {
        let seen = t.apply_points(points);
        let cache = model.forward(&seen);
        let (raw, g) = raw_margin(cache.logits(), label, target);
        let probe = Probe {
            floored: raw.max(-kappa),
            raw,
            predicted: argmax(cache.logits()),
        };
        (probe, Pass { dlogits: g, cache, seen })
    };
    let better = |a: &Probe, b: &Probe| a.floored > b.floored || (a.floored == b.floored && a.raw > b.raw);

    let mut cur_t = RigidTransform::identity();
    let (mut cur, mut pass) = eval(&cur_t);
    let identity_objective = cur.floored;
    let mut history = vec![cur.floored];
    for _ in 0..cfg.maxot_steps {
        let grad_pts = model.input_grad(&pass.cache, &pass.dlogits);
        let mut g_t = Vector3::zeros();
        let mut g_s = 0.0;
        let mut g_w = Vector3::zeros();
        for (y, gk) in pass.seen.iter().zip(&grad_pts) {
            let rp = (y - cur_t.translation) / cur_t.scale;
            g_t += gk;
            g_s += gk.dot(&rp);
            g_w += rp.cross(gk) * cur_t.scale;
        }
        let mut lr = cfg.maxot_lr;
        let mut accepted = None;
        for _ in 0..=cfg.maxot_backtracks {
            let cand = step(&cur_t, cfg, t_max, lr, g_s, &g_w, &g_t);
            let (p, e) = eval(&cand);
            if better(&p, &cur) {
                accepted = Some((cand, p, e));
                break;
            }
            lr *= 0.5;
        }
        match accepted {
            Some((t, p, e)) => {
                cur_t = t;
                cur = p;
                pass = e;
                history.push(cur.floored);
            }
            None => break,
        }
    }
    Ok(MaxotOutcome {
        transform: cur_t,
        objective: cur.floored,
        identity_objective,
        history,
        predicted: cur.predicted,
    })
}

/// One ascent step of relative length `lr` per block, projected to bounds.
fn step(t: &RigidTransform, cfg: &HardeningConfig, t_max: f64, lr: f64, g_s: f64, g_w: &Vector3<f64>, g_t: &Vector3<f64>) -> RigidTransform {
    let scale = (t.scale + lr * (cfg.scale_hi - cfg.scale_lo) * g_s.signum() * f64::from(g_s != 0.0)).clamp(cfg.scale_lo, cfg.scale_hi);
    let mut rotation = t.rotation;
    if g_w.norm() > 0.0 && cfg.rotation_max_angle > 0.0 {
        let w = g_w / g_w.norm() * (lr * cfg.rotation_max_angle);
        rotation = UnitQuaternion::from_scaled_axis(w) * rotation;
        rotation = clamp_angle(rotation, cfg.rotation_max_angle);
    }
    let mut translation = t.translation;
    if g_t.norm() > 0.0 && t_max > 0.0 {
        translation += g_t / g_t.norm() * (lr * t_max);
        if translation.norm() > t_max {
            translation *= t_max / translation.norm();
        }
    }
    RigidTransform {
        scale,
        rotation,
        translation,
    }
}

fn clamp_angle(q: UnitQuaternion<f64>, max_angle: f64) -> UnitQuaternion<f64> {
    let v = q.scaled_axis();
    let a = v.norm();
    if a > max_angle {
        UnitQuaternion::from_scaled_axis(v * (max_angle / a))
    } else {
        q
    }
}

/// Uniformly drawn in-bounds transform: random axis, angle, scale and a
/// translation inside the ball of radius `translation_max·radius`.
pub fn random_transform(cfg: &HardeningConfig, radius: f64, seed: u64) -> RigidTransform {
    let mut r = rng::seeded(seed);
    let axis = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(&mut r));
    let angle = r.random_range(-1.0..=1.0) * cfg.rotation_max_angle;
    let rotation = if axis.norm() > 0.0 {
        UnitQuaternion::from_scaled_axis(axis / axis.norm() * angle)
    } else {
        UnitQuaternion::identity()
    };
    let scale = r.random_range(cfg.scale_lo..=cfg.scale_hi);
    let dir = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(&mut r));
    let len = cfg.translation_max * radius * r.random::<f64>().cbrt();
    let translation = if dir.norm() > 0.0 { dir / dir.norm() * len } else { Vector3::zeros() };
    RigidTransform {
        scale,
        rotation,
        translation,
    }
}
