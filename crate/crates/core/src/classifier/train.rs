//! Mini-batch SGD with momentum, optionally on l2-PGD adversarial batches.

use log::{debug, info};
use nalgebra::{Rotation3, Unit};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{cross_entropy, loss_and_input_grad, Architecture, ClassifierModel, LossSpec};
use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};
use crate::{par, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Labelled clouds sharing one point count.
#[derive(Debug, Clone)]
pub struct Dataset {
    examples: Vec<PointCloud>,
    class_names: Vec<String>,
    split: Split,
}

impl Dataset {
    pub fn new(examples: Vec<PointCloud>, class_names: Vec<String>, split: Split) -> Result<Self> {
        let c = class_names.len();
        let m = examples.first().map(PointCloud::len);
        for (i, e) in examples.iter().enumerate() {
            match e.label() {
                Some(y) if y < c => {}
                _ => return Err(Error::Invalid(format!("example {i} has a missing or out-of-range label"))),
            }
            if Some(e.len()) != m {
                return Err(Error::Invalid(format!("example {i} has {} points, expected {}", e.len(), m.unwrap())));
            }
        }
        Ok(Self {
            examples,
            class_names,
            split,
        })
    }

    pub fn examples(&self) -> &[PointCloud] {
        &self.examples
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn label(&self, i: usize) -> usize {
        self.examples[i].label().expect("validated on construction")
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for e in &self.examples {
            counts[e.label().unwrap()] += 1;
        }
        counts
    }
}

/// Random pose/noise applied to each training example as it is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Augmentation {
    /// Largest rotation angle (radians) about a uniformly random axis.
    pub max_rotation: f64,
    pub scale_lo: f64,
    pub scale_hi: f64,
    pub max_translation: f64,
    pub jitter: f64,
}

impl Default for Augmentation {
    fn default() -> Self {
        Self {
            max_rotation: 0.0,
            scale_lo: 1.0,
            scale_hi: 1.0,
            max_translation: 0.0,
            jitter: 0.0,
        }
    }
}

impl Augmentation {
    pub fn is_identity(&self) -> bool {
        *self == Self::default()
    }

    fn apply(&self, points: &[Point], rng: &mut rng::Rng) -> Vec<Point> {
        if self.is_identity() {
            return points.to_vec();
        }
        let axis = Unit::new_normalize(Point::from_fn(|_, _| StandardNormal.sample(rng)));
        let angle = rng.random_range(-1.0..=1.0) * self.max_rotation;
        let rot = Rotation3::from_axis_angle(&axis, angle);
        let scale = rng.random_range(self.scale_lo..=self.scale_hi);
        let shift = random_in_ball(rng) * self.max_translation;
        points
            .iter()
            .map(|p| {
                let noise = if self.jitter > 0.0 {
                    Point::from_fn(|_, _| StandardNormal.sample(rng)) * self.jitter
                } else {
                    Point::zeros()
                };
                rot * p * scale + shift + noise
            })
            .collect()
    }
}

fn random_in_ball(rng: &mut rng::Rng) -> Point {
    loop {
        let p = Point::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if p.norm_squared() <= 1.0 {
            return p;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Learning rate is multiplied by `lr_decay` every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub seed: u64,
    pub augmentation: Augmentation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 0.01,
            momentum: 0.9,
            batch_size: 16,
            lr_decay: 0.5,
            decay_every: 10,
            seed: 0,
            augmentation: Augmentation::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.lr <= 0.0 || !self.lr.is_finite() {
            errs.push(format!("train.lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            errs.push(format!("train.momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            errs.push("train.batch_size must be >= 1".into());
        }
        if self.decay_every == 0 {
            errs.push("train.decay_every must be >= 1".into());
        }
        let a = &self.augmentation;
        if a.scale_lo <= 0.0 || a.scale_lo > a.scale_hi {
            errs.push("train.augmentation scale bounds must satisfy 0 < lo <= hi".into());
        }
        if a.max_rotation < 0.0 || a.max_translation < 0.0 || a.jitter < 0.0 {
            errs.push("train.augmentation magnitudes must be >= 0".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// l2 PGD used to build adversarial training batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgdConfig {
    /// Radius of the l2 ball on the whole-cloud perturbation.
    pub budget: f64,
    pub steps: usize,
    /// Defaults to `2.5 * budget / steps`.
    pub step_size: Option<f64>,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            budget: 1.0,
            steps: 5,
            step_size: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub final_train_accuracy: f64,
    /// Largest whole-cloud l2 norm of any adversarial training perturbation.
    pub max_perturbation_norm: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: ClassifierModel,
    pub report: TrainReport,
}

/// Whole-cloud l2 norm of a perturbation.
pub fn l2_norm(delta: &[Point]) -> f64 {
    delta.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt()
}

/// Rescales `delta` onto the l2 ball of radius `budget` if it lies outside.
pub fn project_l2(delta: &mut [Point], budget: f64) {
    let n = l2_norm(delta);
    if n > budget {
        let s = if n > 0.0 { budget / n } else { 0.0 };
        for d in delta.iter_mut() {
            *d *= s;
        }
    }
}

/// Normalised-gradient ascent on `loss`, projected onto the l2 ball around
/// `clean` after every step. Returns the adversarial points.
pub fn pgd_l2(model: &ClassifierModel, clean: &[Point], label: usize, loss: &LossSpec, budget: f64, steps: usize, step_size: f64) -> Result<Vec<Point>> {
    let mut x = clean.to_vec();
    let mut delta = vec![Point::zeros(); clean.len()];
    for _ in 0..steps {
        let report = loss_and_input_grad(model, &x, label, loss)?;
        let gnorm = report.norm();
        if gnorm == 0.0 || !gnorm.is_finite() {
            break;
        }
        for (d, g) in delta.iter_mut().zip(&report.grads) {
            *d += g * (step_size / gnorm);
        }
        project_l2(&mut delta, budget);
        for ((xi, ci), di) in x.iter_mut().zip(clean).zip(&delta) {
            *xi = ci + di;
        }
    }
    Ok(x)
}

pub fn accuracy(model: &ClassifierModel, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = par::map_slice(data.examples(), |e| model.predict(e.points()) == e.label().unwrap());
    hits.iter().filter(|&&h| h).count() as f64 / data.len() as f64
}

pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
    fit(data, cfg, None)
}

/// Like [`train`], but each batch is first replaced by l2-PGD adversarial
/// clouds against the current model.
pub fn adversarial_train(data: &Dataset, cfg: &TrainConfig, pgd: &PgdConfig) -> Result<Trained> {
    if pgd.budget < 0.0 || !pgd.budget.is_finite() {
        return Err(Error::Invalid(format!("PGD budget must be >= 0, got {}", pgd.budget)));
    }
    fit(data, cfg, Some(pgd))
}

fn fit(data: &Dataset, cfg: &TrainConfig, pgd: Option<&PgdConfig>) -> Result<Trained> {
    cfg.validate()?;
    let counts = data.class_counts();
    if counts.len() < 2 {
        return Err(Error::Invalid("training needs at least 2 classes".into()));
    }
    if let Some(c) = counts.iter().position(|&n| n < 10) {
        return Err(Error::Invalid(format!("class {c} has {} examples, need >= 10", counts[c])));
    }
    let mut model = ClassifierModel::init(Architecture::pointnet_lite(data.num_classes()), cfg.seed)?;
    let mut velocity = model.zeros_like();
    let mut rng = rng::seeded(rng::derive(cfg.seed, 0x7EA1));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    let mut max_pert: f64 = 0.0;

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr * cfg.lr_decay.powi((epoch / cfg.decay_every) as i32);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<(Vec<Point>, usize)> = batch
                .iter()
                .map(|&i| (cfg.augmentation.apply(data.examples()[i].points(), &mut rng), data.label(i)))
                .collect();
            let inputs = match pgd {
                Some(p) => {
                    let step = p.step_size.unwrap_or(2.5 * p.budget / p.steps.max(1) as f64);
                    let adv = par::map_slice(&inputs, |(x, y)| {
                        pgd_l2(&model, x, *y, &LossSpec::CrossEntropy, p.budget, p.steps, step).map(|a| (a, *y))
                    });
                    let adv = adv.into_iter().collect::<Result<Vec<_>>>()?;
                    for ((a, _), (x, _)) in adv.iter().zip(&inputs) {
                        let delta: Vec<Point> = a.iter().zip(x).map(|(ai, xi)| ai - xi).collect();
                        max_pert = max_pert.max(l2_norm(&delta));
                    }
                    adv
                }
                None => inputs,
            };
            let per_example = par::map_slice(&inputs, |(x, y)| {
                let cache = model.forward(x);
                let (loss, dlogits) = cross_entropy(cache.logits(), *y);
                let mut g = model.zeros_like();
                model.backward_into(&cache, &dlogits, &mut g);
                (loss, g)
            });
            // Sequential reduction keeps the update independent of thread count.
            let mut grad = model.zeros_like();
            let mut batch_loss = 0.0;
            for (loss, g) in &per_example {
                batch_loss += loss;
                grad.axpy(1.0, g);
            }
            let n = per_example.len() as f64;
            batch_loss /= n;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_no,
                    loss: batch_loss,
                });
            }
            grad.scale(1.0 / n);
            velocity.scale(cfg.momentum);
            velocity.axpy(1.0, &grad);
            model.axpy(-lr, &velocity);
            epoch_loss += batch_loss * n;
        }
        epoch_loss /= data.len() as f64;
        debug!("epoch {epoch}: lr {lr:.5} loss {epoch_loss:.4}");
        report.epoch_losses.push(epoch_loss);
    }
    if !model.is_finite() {
        return Err(Error::Diverged {
            epoch: cfg.epochs,
            batch: 0,
            loss: f64::NAN,
        });
    }
    report.final_train_accuracy = accuracy(&model, data);
    if pgd.is_some() {
        report.max_perturbation_norm = Some(max_pert);
    }
    info!(
        "trained {} epochs, final loss {:.4}, train accuracy {:.3}",
        cfg.epochs,
        report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        report.final_train_accuracy
    );
    Ok(Trained { model, report })
}
