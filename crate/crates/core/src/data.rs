//! Synthetic shape families standing in for a CAD benchmark, and PLY export
//! of per-point score channels.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::{normalize_cloud, Dataset, Split};
use crate::cloud::{save_cloud, CloudFormat, Point, PointCloud};
use crate::error::{Error, Result};
use crate::{par, rng};

pub const MIN_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFamily {
    Sphere,
    Cube,
    Cylinder,
    Cone,
    Torus,
    Pyramid,
    Star,
    Composite,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 8] = [
        ShapeFamily::Sphere,
        ShapeFamily::Cube,
        ShapeFamily::Cylinder,
        ShapeFamily::Cone,
        ShapeFamily::Torus,
        ShapeFamily::Pyramid,
        ShapeFamily::Star,
        ShapeFamily::Composite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Sphere => "sphere",
            ShapeFamily::Cube => "cube",
            ShapeFamily::Cylinder => "cylinder",
            ShapeFamily::Cone => "cone",
            ShapeFamily::Torus => "torus",
            ShapeFamily::Pyramid => "pyramid",
            ShapeFamily::Star => "star",
            ShapeFamily::Composite => "composite",
        }
    }
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown shape family `{s}`")))
    }
}

/// One procedurally sampled cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub family: ShapeFamily,
    pub m: usize,
    /// Std of the isotropic Gaussian surface noise, before normalisation.
    pub jitter: f64,
    pub seed: u64,
}

/// Dataset recipe: one class per family, in the listed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub families: Vec<ShapeFamily>,
    pub m: usize,
    pub jitter: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            families: ShapeFamily::ALL.to_vec(),
            m: 1024,
            jitter: 0.005,
            train_per_class: 20,
            test_per_class: 20,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.m < MIN_POINTS {
            errs.push(format!("dataset.m must be >= {MIN_POINTS}, got {}", self.m));
        }
        if self.families.len() < 2 {
            errs.push("dataset.families needs at least two families".into());
        }
        let mut seen = self.families.clone();
        seen.sort_by_key(|f| f.name());
        seen.dedup();
        if seen.len() != self.families.len() {
            errs.push("dataset.families lists a family twice".into());
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            errs.push(format!("dataset.jitter must be >= 0, got {}", self.jitter));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        self.families.iter().map(|f| f.name().to_string()).collect()
    }

    /// Train and test splits drawn from disjoint seed streams.
    pub fn generate(&self) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let train = gen_dataset(&self.families, self.m, self.jitter, self.train_per_class, rng::derive(self.seed, 1), Split::Train)?;
        let test = gen_dataset(&self.families, self.m, self.jitter, self.test_per_class, rng::derive(self.seed, 2), Split::Test)?;
        Ok((train, test))
    }
}

/// `per_class` clouds for every family, label = position in `families`.
pub fn gen_dataset(families: &[ShapeFamily], m: usize, jitter: f64, per_class: usize, seed: u64, split: Split) -> Result<Dataset> {
    let jobs: Vec<(usize, ShapeSpec)> = families
        .iter()
        .enumerate()
        .flat_map(|(label, &family)| {
            (0..per_class).map(move |i| {
                let index = (label * per_class + i) as u64;
                (label, ShapeSpec { family, m, jitter, seed: rng::derive(seed, index) })
            })
        })
        .collect();
    let clouds = par::map_slice(&jobs, |(label, spec)| sample_shape(spec).map(|c| c.with_label(*label)));
    let names = families.iter().map(|f| f.name().to_string()).collect();
    Dataset::new(clouds.into_iter().collect::<Result<_>>()?, names, split)
}

/// Samples a normalised cloud from one family.
pub fn sample_shape(spec: &ShapeSpec) -> Result<PointCloud> {
    if spec.m < MIN_POINTS {
        return Err(Error::OutOfRange {
            what: "m",
            value: spec.m,
            lo: MIN_POINTS,
            hi: usize::MAX,
        });
    }
    let mut rng = rng::seeded(spec.seed);
    let mut pts = match spec.family {
        ShapeFamily::Sphere => sphere(&mut rng, spec.m),
        ShapeFamily::Cube => {
            let half = Point::from_fn(|_, _| rng.random_range(0.85..1.15));
            (0..spec.m).map(|_| box_surface(&mut rng, &half, &Point::zeros())).collect()
        }
        ShapeFamily::Cylinder => {
            let r = rng.random_range(0.5..0.7);
            let h = rng.random_range(0.8..1.2);
            (0..spec.m).map(|_| cylinder_surface(&mut rng, r, h, &Point::zeros())).collect()
        }
        ShapeFamily::Cone => {
            let r = rng.random_range(0.6..0.9);
            let h = rng.random_range(1.5..2.0);
            (0..spec.m).map(|_| cone_surface(&mut rng, r, h)).collect()
        }
        ShapeFamily::Torus => {
            let tube = rng.random_range(0.25..0.4);
            (0..spec.m).map(|_| torus_surface(&mut rng, 1.0, tube)).collect()
        }
        ShapeFamily::Pyramid => {
            let w = rng.random_range(0.8..1.0);
            let h = rng.random_range(1.2..1.6);
            (0..spec.m).map(|_| pyramid_surface(&mut rng, w, h)).collect()
        }
        ShapeFamily::Star => star(&mut rng, spec.m),
        ShapeFamily::Composite => composite(&mut rng, spec.m),
    };
    if spec.jitter > 0.0 {
        for p in pts.iter_mut() {
            *p += Point::from_fn(|_, _| StandardNormal.sample(&mut rng)) * spec.jitter;
        }
    }
    Ok(normalize_cloud(&PointCloud::new(pts)?))
}

fn unit_vector(rng: &mut rng::Rng) -> Point {
    loop {
        let v = Point::from_fn(|_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Antipodal pairs, so the centroid is exactly the origin.
fn sphere(rng: &mut rng::Rng, m: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity(m);
    while pts.len() + 1 < m {
        let u = unit_vector(rng);
        pts.push(u);
        pts.push(-u);
    }
    if pts.len() < m {
        pts.push(unit_vector(rng));
    }
    pts
}

fn box_surface(rng: &mut rng::Rng, half: &Point, center: &Point) -> Point {
    let areas = [half.y * half.z, half.x * half.z, half.x * half.y];
    let total: f64 = areas.iter().sum();
    let mut pick = rng.random_range(0.0..total);
    let mut axis = 2;
    for (a, area) in areas.iter().enumerate() {
        if pick < *area {
            axis = a;
            break;
        }
        pick -= area;
    }
    let mut p = Point::from_fn(|i, _| rng.random_range(-1.0..1.0) * half[i]);
    p[axis] = if rng.random_bool(0.5) { half[axis] } else { -half[axis] };
    p + center
}

fn disc(rng: &mut rng::Rng, r: f64) -> (f64, f64) {
    let rad = r * rng.random_range(0.0f64..1.0).sqrt();
    let t = rng.random_range(0.0..TAU);
    (rad * t.cos(), rad * t.sin())
}

fn cylinder_surface(rng: &mut rng::Rng, r: f64, half_h: f64, center: &Point) -> Point {
    let side = TAU * r * 2.0 * half_h;
    let caps = 2.0 * PI * r * r;
    let p = if rng.random_range(0.0..side + caps) < side {
        let t = rng.random_range(0.0..TAU);
        Point::new(r * t.cos(), r * t.sin(), rng.random_range(-half_h..half_h))
    } else {
        let (x, y) = disc(rng, r);
        Point::new(x, y, if rng.random_bool(0.5) { half_h } else { -half_h })
    };
    p + center
}

fn cone_surface(rng: &mut rng::Rng, r: f64, h: f64) -> Point {
    let lateral = PI * r * (r * r + h * h).sqrt();
    let base = PI * r * r;
    if rng.random_range(0.0..lateral + base) < lateral {
        // Area grows linearly with distance from the apex.
        let s = rng.random_range(0.0f64..1.0).sqrt();
        let t = rng.random_range(0.0..TAU);
        Point::new(s * r * t.cos(), s * r * t.sin(), h * (1.0 - s))
    } else {
        let (x, y) = disc(rng, r);
        Point::new(x, y, 0.0)
    }
}

fn torus_surface(rng: &mut rng::Rng, major: f64, tube: f64) -> Point {
    loop {
        let u = rng.random_range(0.0..TAU);
        let v = rng.random_range(0.0..TAU);
        // Accept proportionally to the local area element.
        if rng.random_range(0.0..major + tube) <= major + tube * v.cos() {
            let ring = major + tube * v.cos();
            return Point::new(ring * u.cos(), ring * u.sin(), tube * v.sin());
        }
    }
}

fn triangle(rng: &mut rng::Rng, a: &Point, b: &Point, c: &Point) -> Point {
    let r1 = rng.random_range(0.0f64..1.0).sqrt();
    let r2 = rng.random_range(0.0..1.0);
    a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
}

fn pyramid_surface(rng: &mut rng::Rng, w: f64, h: f64) -> Point {
    let base = 4.0 * w * w;
    let face = w * (h * h + w * w).sqrt();
    let corners = [Point::new(w, w, 0.0), Point::new(-w, w, 0.0), Point::new(-w, -w, 0.0), Point::new(w, -w, 0.0)];
    let apex = Point::new(0.0, 0.0, h);
    let pick = rng.random_range(0.0..base + 4.0 * face);
    if pick < base {
        Point::new(rng.random_range(-w..w), rng.random_range(-w..w), 0.0)
    } else {
        let f = (((pick - base) / face) as usize).min(3);
        triangle(rng, &corners[f], &corners[(f + 1) % 4], &apex)
    }
}

/// A sphere with sharp radial spikes.
fn star(rng: &mut rng::Rng, m: usize) -> Vec<Point> {
    let spikes = rng.random_range(6..=10);
    let dirs: Vec<Point> = (0..spikes).map(|_| unit_vector(rng)).collect();
    let sharpness = rng.random_range(20.0..40.0);
    (0..m)
        .map(|_| {
            let u = unit_vector(rng);
            let bump = dirs.iter().map(|d| u.dot(d).max(0.0).powf(sharpness)).fold(0.0, f64::max);
            u * (0.55 + 0.6 * bump)
        })
        .collect()
}

/// A box base carrying a ball and a horizontal rod.
fn composite(rng: &mut rng::Rng, m: usize) -> Vec<Point> {
    let half = Point::new(rng.random_range(0.45..0.6), rng.random_range(0.45..0.6), 0.35);
    let base_center = Point::new(0.0, 0.0, -0.3);
    let ball_r = rng.random_range(0.35..0.45);
    let ball_center = Point::new(0.0, 0.0, 0.05 + ball_r);
    let rod_r = 0.12;
    let rod_half = rng.random_range(0.6..0.8);
    let areas = [
        8.0 * (half.x * half.y + half.x * half.z + half.y * half.z),
        4.0 * PI * ball_r * ball_r,
        TAU * rod_r * 2.0 * rod_half,
    ];
    let total: f64 = areas.iter().sum();
    (0..m)
        .map(|_| {
            let pick = rng.random_range(0.0..total);
            if pick < areas[0] {
                box_surface(rng, &half, &base_center)
            } else if pick < areas[0] + areas[1] {
                ball_center + unit_vector(rng) * ball_r
            } else {
                // Rod along x through the ball, caps ignored.
                let t = rng.random_range(0.0..TAU);
                Point::new(rng.random_range(-rod_half..rod_half), rod_r * t.cos(), ball_center.z + rod_r * t.sin())
            }
        })
        .collect()
}

/// Writes `cloud` as PLY carrying only the named scalar channel.
pub fn export_colored(cloud: &PointCloud, channel: &str, path: impl AsRef<Path>) -> Result<()> {
    let values = cloud
        .attr(channel)
        .ok_or_else(|| Error::MissingChannel(channel.to_string()))?
        .to_vec();
    let out = PointCloud::new(cloud.points().to_vec())?.with_attr(channel, values)?;
    save_cloud(&out, path, CloudFormat::Ply)
}
