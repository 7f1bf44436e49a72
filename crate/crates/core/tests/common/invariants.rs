//! Seeded invariant checks for the acceptance run. The property tests cover
//! the same ground with shrinking; these are deterministic replays.

use hitadv_core::attack::{deform, run_attack, AttackConfig, DeformationField, RegionSearchConfig};
use hitadv_core::cloud::{curvature_std_all, estimate_normals, knn, local_curvatures};
use hitadv_core::data::{sample_shape, ShapeFamily, ShapeSpec};
use hitadv_core::defense::csd_metric;
use hitadv_core::hardening::{maxot_search, HardeningConfig, RigidTransform};
use hitadv_core::{Point, PointCloud};
use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{random_cloud, random_points, rng, tiny_model, Check};

fn random_transform(r: &mut ChaCha8Rng) -> RigidTransform {
    let axis = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(0.5..1.5));
    let rot = UnitQuaternion::from_scaled_axis(axis.normalize() * r.random_range(0.0..std::f64::consts::PI));
    let t = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    RigidTransform::new(r.random_range(0.5..2.0), rot, t).unwrap()
}

fn surface(r: &mut ChaCha8Rng) -> PointCloud {
    sample_shape(&ShapeSpec {
        family: ShapeFamily::ALL[r.random_range(0..8)],
        m: 96,
        jitter: 0.0,
        seed: r.random(),
    })
    .unwrap()
}

pub fn check_permutation(seed: u64) -> Check {
    let mut r = rng(seed);
    let model = tiny_model(5, seed);
    let m = r.random_range(4..64);
    let pts = random_points(&mut r, m);
    let mut shuffled = pts.clone();
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, r.random_range(0..=i));
    }
    if model.logits(&pts) != model.logits(&shuffled) {
        return Err(format!("seed {seed}: logits depend on point order"));
    }
    Ok(())
}

pub fn check_curvature_rigid(seed: u64) -> Check {
    let mut r = rng(seed);
    let cloud = surface(&mut r);
    let t = random_transform(&mut r);
    let curv = |c: &PointCloud| {
        let nbr = knn(c, 10).unwrap();
        let normals = estimate_normals(c, &nbr).unwrap();
        (local_curvatures(c, &normals, &nbr), curvature_std_all(c, &normals, &nbr))
    };
    let (c0, s0) = curv(&cloud);
    let (c1, s1) = curv(&t.apply(&cloud).unwrap());
    for j in 0..cloud.len() {
        if (c0[j] - c1[j]).abs() > 1e-6 || (s0[j] - s1[j]).abs() > 1e-6 {
            return Err(format!("seed {seed} point {j}: curvature moved under a similarity"));
        }
    }
    Ok(())
}

pub fn check_csd_rigid(seed: u64) -> Check {
    let mut r = rng(seed);
    let a = surface(&mut r);
    let b = a
        .with_points(a.points().iter().map(|p| p + Point::from_fn(|_, _| r.random_range(-0.03..0.03))).collect())
        .unwrap();
    let t = random_transform(&mut r);
    let ab = csd_metric(&a, &b, 10).unwrap();
    let moved = csd_metric(&t.apply(&a).unwrap(), &t.apply(&b).unwrap(), 10).unwrap();
    if csd_metric(&a, &a, 10).unwrap() != 0.0 || (ab - moved).abs() > 1e-6 {
        return Err(format!("seed {seed}: csd {ab} vs {moved} after a similarity"));
    }
    Ok(())
}

fn field(r: &mut ChaCha8Rng, cloud: &PointCloud, n: usize, scale: f64) -> DeformationField {
    let centers = cloud.points()[..n].to_vec();
    let deltas = (0..n).map(|_| Point::from_fn(|_, _| scale * r.random_range(-1.0..1.0))).collect();
    let sigmas = (0..n).map(|_| r.random_range(1e-3..5.0)).collect();
    DeformationField::new(centers, deltas, sigmas).unwrap()
}

pub fn check_sigma_clip(seed: u64) -> Check {
    let mut r = rng(seed);
    let cloud = random_cloud(&mut r, 20);
    let mut f = field(&mut r, &cloud, 8, 0.1);
    let lo = r.random_range(0.01..0.5);
    let hi = lo + r.random_range(0.1..2.0);
    f.clip_sigmas(lo, hi);
    if f.sigmas.iter().any(|s| *s < lo || *s > hi) {
        return Err(format!("seed {seed}: sigma outside [{lo}, {hi}]"));
    }
    Ok(())
}

pub fn check_zero_field(seed: u64) -> Check {
    let mut r = rng(seed);
    let m = r.random_range(8..80);
    let cloud = random_cloud(&mut r, m);
    let f = field(&mut r, &cloud, 6, 0.0);
    if deform(&cloud, &f).unwrap().points() != cloud.points() {
        return Err(format!("seed {seed}: zero field moved points"));
    }
    Ok(())
}

pub fn check_maxot_monotone(seed: u64) -> Check {
    let mut r = rng(seed);
    let model = tiny_model(4, seed);
    let pts = random_points(&mut r, 32);
    let cfg = HardeningConfig { maxot_steps: 4, ..Default::default() };
    let out = maxot_search(&model, &pts, &cfg, r.random_range(0..4), r.random_range(0.0..5.0), None).unwrap();
    let monotone = out.history.windows(2).all(|w| w[1] >= w[0]);
    if !monotone || out.objective < out.identity_objective || out.history[0] != out.identity_objective {
        return Err(format!("seed {seed}: maxot history {:?}", out.history));
    }
    Ok(())
}

pub fn check_replay(seed: u64) -> Check {
    let mut r = rng(seed);
    let model = tiny_model(3, seed);
    let cloud = surface(&mut r);
    let label = model.predict(cloud.points());
    let cloud = cloud.with_label(label);
    let acfg = AttackConfig {
        binary_search_steps: 2,
        inner_iters: 10,
        seed,
        ..Default::default()
    };
    let rcfg = RegionSearchConfig {
        n: 16,
        n_tilde: 6,
        ..Default::default()
    };
    let a = run_attack(&model, &cloud, &acfg, &rcfg).unwrap();
    let b = run_attack(&model, &cloud, &acfg, &rcfg).unwrap();
    if a.adversarial.points() != b.adversarial.points() || a.trace != b.trace {
        return Err(format!("seed {seed}: attack did not replay"));
    }
    if let Some(f) = &a.field {
        if f.sigmas.iter().any(|s| *s < acfg.sigma_min || *s > acfg.a) {
            return Err(format!("seed {seed}: optimised sigma out of bounds"));
        }
    }
    Ok(())
}
