//! Fixtures and brute-force reference implementations shared by the
//! integration tests and the acceptance harness. The references are written
//! from the definitions, without touching the library's spatial index.
#![allow(dead_code)]

use hitadv_core::attack::{AttackConfig, DeformationField};
use hitadv_core::classifier::{Architecture, ClassifierModel};
use hitadv_core::{Point, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, m: usize) -> Vec<Point> {
    (0..m)
        .map(|_| Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn random_cloud(rng: &mut ChaCha8Rng, m: usize) -> PointCloud {
    PointCloud::new(random_points(rng, m)).unwrap()
}

/// Points on a coarse integer lattice, so exact distance ties are common.
pub fn lattice_cloud(rng: &mut ChaCha8Rng, m: usize) -> PointCloud {
    let pts = (0..m)
        .map(|_| Point::new(rng.random_range(0..4) as f64, rng.random_range(0..4) as f64, rng.random_range(0..4) as f64))
        .collect();
    PointCloud::new(pts).unwrap()
}

pub fn tiny_model(classes: usize, seed: u64) -> ClassifierModel {
    ClassifierModel::init_with_biases(Architecture::custom(&[16, 32], &[16], classes), seed).unwrap()
}

/// Field on `n` distinct random centres drawn from `cloud`.
pub fn random_field(rng: &mut ChaCha8Rng, cloud: &PointCloud, n: usize, cfg: &AttackConfig) -> DeformationField {
    let mut idx: Vec<usize> = (0..cloud.len()).collect();
    for i in 0..n {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    let centers = idx[..n].iter().map(|&i| *cloud.point(i)).collect();
    let deltas = (0..n)
        .map(|_| Point::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
        .collect();
    let sigmas = (0..n).map(|_| rng.random_range(cfg.sigma_min + 0.05..cfg.a - 0.05)).collect();
    DeformationField::new(centers, deltas, sigmas).unwrap()
}

fn sq(a: &Point, b: &Point) -> f64 {
    (a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)
}

/// Full sort of all other points by (distance, index).
pub fn knn_oracle(pts: &[Point], k: usize) -> Vec<Vec<usize>> {
    (0..pts.len())
        .map(|j| {
            let mut all: Vec<(f64, usize)> = (0..pts.len()).filter(|&i| i != j).map(|i| (sq(&pts[i], &pts[j]), i)).collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            all.into_iter().take(k).map(|(_, i)| i).collect()
        })
        .collect()
}

/// Greedy farthest point order, recomputing every min-distance each step.
pub fn fps_oracle(pts: &[Point], n: usize, seed: u64) -> Vec<usize> {
    let mut picked = vec![(seed % pts.len() as u64) as usize];
    while picked.len() < n {
        let mut best = None::<(f64, usize)>;
        for i in 0..pts.len() {
            if picked.contains(&i) {
                continue;
            }
            let d = picked.iter().map(|&p| sq(&pts[i], &pts[p])).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(bd, _)| d > bd) {
                best = Some((d, i));
            }
        }
        picked.push(best.unwrap().1);
    }
    picked
}

pub fn chamfer_oracle(a: &[Point], b: &[Point]) -> f64 {
    let one_way = |x: &[Point], y: &[Point]| {
        let mut total = 0.0;
        for p in x {
            let mut best = f64::INFINITY;
            for q in y {
                best = best.min(sq(p, q));
            }
            total += best;
        }
        total / x.len() as f64
    };
    one_way(a, b) + one_way(b, a)
}

/// Indices surviving statistical outlier removal.
pub fn sor_oracle(pts: &[Point], k: usize, mult: f64) -> Vec<usize> {
    let lists = knn_oracle(pts, k);
    let d: Vec<f64> = lists
        .iter()
        .enumerate()
        .map(|(j, l)| l.iter().map(|&i| sq(&pts[i], &pts[j]).sqrt()).sum::<f64>() / k as f64)
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    if std == 0.0 {
        return (0..pts.len()).collect();
    }
    let kept: Vec<usize> = (0..pts.len()).filter(|&j| d[j] <= mean + mult * std).collect();
    if kept.is_empty() {
        let best = (0..d.len()).min_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap()).unwrap();
        return vec![best];
    }
    kept
}

/// Both stages of the centre search, spelled out.
pub fn regions_oracle(pts: &[Point], scores: &[f64], n: usize, k: usize, n_tilde: usize, seed: u64) -> Vec<usize> {
    let better = |a: usize, b: usize| scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    let seeds = fps_oracle(pts, n.min(pts.len()), seed);
    let lists = knn_oracle(pts, k - 1);
    let mut candidates: Vec<usize> = Vec::new();
    for s in seeds {
        let mut best = s;
        for &i in &lists[s] {
            if better(i, best) {
                best = i;
            }
        }
        if !candidates.contains(&best) {
            candidates.push(best);
        }
    }
    let mut out = Vec::new();
    while out.len() < n_tilde && out.len() < candidates.len() {
        let next = candidates.iter().copied().filter(|c| !out.contains(c)).reduce(|a, b| if better(b, a) { b } else { a }).unwrap();
        out.push(next);
    }
    out
}

/// Cosine of min-max normalised vectors, zero for a constant input.
pub fn hide_oracle(sigmas: &[f64], cstd: &[f64]) -> f64 {
    let norm = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            Some(v.iter().map(|x| (x - lo) / (hi - lo)).collect::<Vec<_>>())
        } else {
            None
        }
    };
    match (norm(sigmas), norm(cstd)) {
        (Some(s), Some(c)) => {
            let dot: f64 = s.iter().zip(&c).map(|(a, b)| a * b).sum();
            let ns: f64 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nc: f64 = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (ns * nc)
        }
        _ => 0.0,
    }
}

pub fn rel_err(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1e-6)
}

/// Worst relative error between analytic and central-difference gradients
/// of the attack objective over every δ and σ coordinate.
pub fn field_gradient_error(model: &ClassifierModel, cloud: &PointCloud, field: &DeformationField, cfg: &AttackConfig, cstd: &[f64], lambda: f64, h: f64) -> f64 {
    use hitadv_core::attack::attack_gradient;
    let g = attack_gradient(model, cloud, field, cfg, cstd, lambda).unwrap();
    let total = |f: &DeformationField| attack_gradient(model, cloud, f, cfg, cstd, lambda).unwrap().total;
    let mut worst: f64 = 0.0;
    for i in 0..field.len() {
        for c in 0..3 {
            let mut plus = field.clone();
            let mut minus = field.clone();
            plus.deltas[i][c] += h;
            minus.deltas[i][c] -= h;
            let fd = (total(&plus) - total(&minus)) / (2.0 * h);
            worst = worst.max(rel_err(g.delta[i][c], fd));
        }
        let mut plus = field.clone();
        let mut minus = field.clone();
        plus.sigmas[i] += h;
        minus.sigmas[i] -= h;
        let fd = (total(&plus) - total(&minus)) / (2.0 * h);
        worst = worst.max(rel_err(g.sigma[i], fd));
    }
    worst
}

/// One random configuration for the gradient check: a tiny model, a 48-point
/// cloud and a six-centre field. The margin cap is lifted so the clamp at
/// `-kappa` (a kink) never engages.
pub struct FdCase {
    pub model: ClassifierModel,
    pub cloud: PointCloud,
    pub field: DeformationField,
    pub cfg: AttackConfig,
    pub cstd: Vec<f64>,
    pub lambda: f64,
}

pub fn fd_case(seed: u64) -> FdCase {
    let mut r = rng(seed);
    let model = tiny_model(4, seed);
    let cloud = random_cloud(&mut r, 48).with_label(r.random_range(0..4));
    let cfg = AttackConfig {
        kappa: 1e3,
        ..Default::default()
    };
    let field = random_field(&mut r, &cloud, 6, &cfg);
    let cstd = (0..6).map(|_| r.random_range(0.0..1.0)).collect();
    FdCase {
        model,
        cloud,
        field,
        cfg,
        cstd,
        lambda: r.random_range(0.5..20.0),
    }
}

impl FdCase {
    pub fn worst_error(&self) -> f64 {
        field_gradient_error(&self.model, &self.cloud, &self.field, &self.cfg, &self.cstd, self.lambda, 1e-4)
    }
}

pub type Check = Result<(), String>;

fn mixed_cloud(r: &mut ChaCha8Rng, lo: usize, hi: usize) -> PointCloud {
    let m = r.random_range(lo..=hi);
    if r.random_bool(0.3) {
        lattice_cloud(r, m)
    } else {
        random_cloud(r, m)
    }
}

pub fn check_knn(seed: u64) -> Check {
    use hitadv_core::cloud::{knn, PointGrid};
    let mut r = rng(seed);
    let cloud = mixed_cloud(&mut r, 2, 128);
    let m = cloud.len();
    let k = r.random_range(1..m.min(17));
    let want = knn_oracle(cloud.points(), k);
    let idx = knn(&cloud, k).map_err(|e| e.to_string())?;
    let grid = PointGrid::new(cloud.points(), r.random_range(1..12));
    for j in 0..m {
        if idx.neighbors(j) != want[j].as_slice() {
            return Err(format!("knn m={m} k={k} point {j}: {:?} vs {:?}", idx.neighbors(j), want[j]));
        }
        let from_grid: Vec<usize> = grid.k_nearest(cloud.point(j), k, Some(j)).into_iter().map(|(_, i)| i).collect();
        if from_grid != want[j] {
            return Err(format!("grid m={m} k={k} point {j}: {from_grid:?} vs {:?}", want[j]));
        }
        if idx.distances(j).windows(2).any(|w| w[0] > w[1]) {
            return Err(format!("knn distances not sorted at {j}"));
        }
    }
    Ok(())
}

pub fn check_fps(seed: u64) -> Check {
    use hitadv_core::cloud::fps;
    let mut r = rng(seed);
    let cloud = mixed_cloud(&mut r, 1, 128);
    let n = r.random_range(1..=cloud.len());
    let s = r.random::<u64>();
    let got = fps(&cloud, n, s).map_err(|e| e.to_string())?;
    let want = fps_oracle(cloud.points(), n, s);
    if got != want {
        return Err(format!("fps m={} n={n}: {got:?} vs {want:?}", cloud.len()));
    }
    Ok(())
}

pub fn check_chamfer(seed: u64) -> Check {
    use hitadv_core::attack::{chamfer_grad, loss_chamfer};
    let mut r = rng(seed);
    let a = mixed_cloud(&mut r, 1, 128);
    let b = mixed_cloud(&mut r, 1, 128);
    let want = chamfer_oracle(a.points(), b.points());
    for (what, got) in [
        ("loss_chamfer", loss_chamfer(&a, &b)),
        ("chamfer metric", hitadv_core::defense::chamfer(&a, &b)),
        ("chamfer_grad", chamfer_grad(a.points(), b.points()).0),
    ] {
        if (got - want).abs() > 1e-9 * want.max(1.0) {
            return Err(format!("{what}: {got} vs {want}"));
        }
    }
    Ok(())
}

pub fn check_sor(seed: u64) -> Check {
    use hitadv_core::defense::sor;
    let mut r = rng(seed);
    let mut pts = mixed_cloud(&mut r, 4, 127).points().to_vec();
    if r.random_bool(0.5) {
        pts.push(Point::new(r.random_range(3.0..10.0), 0.0, 0.0));
    }
    let k = r.random_range(1..pts.len().min(6));
    let mult = r.random_range(0.2..2.5);
    let cloud = PointCloud::new(pts.clone()).unwrap();
    let got = sor(&cloud, k, mult).map_err(|e| e.to_string())?;
    let want: Vec<Point> = sor_oracle(&pts, k, mult).into_iter().map(|i| pts[i]).collect();
    if got.points() != want.as_slice() {
        return Err(format!("sor m={} k={k} mult={mult}: kept {} vs {}", pts.len(), got.len(), want.len()));
    }
    Ok(())
}

pub fn check_regions(seed: u64) -> Check {
    use hitadv_core::attack::{search_regions, RegionSearchConfig, SIScores};
    let mut r = rng(seed);
    let cloud = mixed_cloud(&mut r, 16, 128);
    let m = cloud.len();
    // Coarse levels force score ties.
    let levels = r.random_range(2..50) as f64;
    let s1: Vec<f64> = (0..m).map(|_| (r.random_range(0.0..1.0) * levels).floor()).collect();
    let cstd: Vec<f64> = (0..m).map(|_| (r.random_range(0.0..1.0) * levels).floor()).collect();
    let si = SIScores::from_channels(&s1, cstd, r.random_range(0.0..2.0)).map_err(|e| e.to_string())?;
    let n = r.random_range(1..=m.min(40));
    let cfg = RegionSearchConfig {
        n,
        k: r.random_range(4..=12.min(m)),
        n_tilde: r.random_range(1..=n),
        seed: r.random(),
    };
    let got = search_regions(&cloud, &si, &cfg).map_err(|e| e.to_string())?;
    let want = regions_oracle(cloud.points(), &si.combined, cfg.n, cfg.k, cfg.n_tilde, cfg.seed);
    if got.centers != want {
        return Err(format!("regions m={m} {cfg:?}: {:?} vs {want:?}", got.centers));
    }
    Ok(())
}

pub fn check_hide(seed: u64) -> Check {
    use hitadv_core::attack::loss_hide_grad;
    let mut r = rng(seed);
    let n = r.random_range(1..=16);
    let constant = r.random_bool(0.1);
    let sigmas: Vec<f64> = (0..n).map(|_| if constant { 0.7 } else { r.random_range(0.05..1.5) }).collect();
    let cstd: Vec<f64> = (0..n).map(|_| r.random_range(0.0..0.5)).collect();
    let got = loss_hide_grad(&sigmas, &cstd).0;
    let want = hide_oracle(&sigmas, &cstd);
    if (got - want).abs() > 1e-9 {
        return Err(format!("hide n={n}: {got} vs {want}"));
    }
    Ok(())
}

/// Runs `check` on seeds `0..count` and returns the first failure.
pub fn run_checks(count: u64, check: fn(u64) -> Check) -> Check {
    (0..count).try_for_each(check)
}

pub mod invariants;
