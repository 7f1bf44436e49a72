//! Binary search over λ with an Adam inner loop on the deformation field.

use log::debug;
use rand::Rng as _;

use super::config::{AttackConfig, RegionSearchConfig};
use super::kernel::DeformationField;
use super::objective::{AttackProblem, Evaluation};
use super::result::{AttackMethod, AttackResult, TraceEntry};
use super::si::{si_score, search_regions, RegionSelection, SIScores};
use crate::classifier::ClassifierModel;
use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};
use crate::rng;

/// Per-cloud state computed once on the clean input.
#[derive(Debug, Clone)]
pub struct AttackSetup {
    pub label: usize,
    pub si: SIScores,
    pub selection: RegionSelection,
    pub center_cstd: Vec<f64>,
    /// Starting field reused by every binary-search step.
    pub initial: DeformationField,
}

pub fn prepare_attack(model: &ClassifierModel, cloud: &PointCloud, cfg: &AttackConfig, rcfg: &RegionSearchConfig) -> Result<AttackSetup> {
    cfg.validate()?;
    rcfg.validate()?;
    let label = cloud.label().ok_or_else(|| Error::Invalid("cloud has no label".into()))?;
    let si = si_score(cloud, model, rcfg, cfg.alpha)?;
    let selection = search_regions(cloud, &si, rcfg)?;
    let centers: Vec<Point> = selection.centers.iter().map(|&i| *cloud.point(i)).collect();
    let center_cstd = selection.centers.iter().map(|&i| si.cstd[i]).collect();
    let mut r = rng::seeded(rng::derive(cfg.seed, 0xDE17A));
    let eps = cfg.init_scale * cloud.radius();
    let deltas = centers
        .iter()
        .map(|_| Point::from_fn(|_, _| if eps > 0.0 { r.random_range(-eps..=eps) } else { 0.0 }))
        .collect();
    let sigma0 = (cfg.a / 2.0).clamp(cfg.sigma_min, cfg.a);
    let initial = DeformationField::new(centers.clone(), deltas, vec![sigma0; centers.len()])?;
    Ok(AttackSetup {
        label,
        si,
        selection,
        center_cstd,
        initial,
    })
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * g;
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * g * g;
            *p -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
        }
    }
}

fn pack(field: &DeformationField) -> Vec<f64> {
    let mut out: Vec<f64> = field.deltas.iter().flatten().copied().collect();
    out.extend_from_slice(&field.sigmas);
    out
}

fn unpack(field: &mut DeformationField, flat: &[f64]) {
    let n = field.len();
    for i in 0..n {
        field.deltas[i] = [flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]];
    }
    field.sigmas.copy_from_slice(&flat[3 * n..]);
}

fn is_finite(ev: &Evaluation) -> bool {
    ev.total.is_finite() && ev.grad_delta.iter().all(|g| g.iter().all(|v| v.is_finite())) && ev.grad_sigma.iter().all(|g| g.is_finite())
}

fn pack_grad(ev: &Evaluation) -> Vec<f64> {
    let mut out: Vec<f64> = ev.grad_delta.iter().flat_map(|g| [g.x, g.y, g.z]).collect();
    out.extend_from_slice(&ev.grad_sigma);
    out
}

/// Best successful iterate seen so far.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub field: DeformationField,
    pub adv: Vec<Point>,
    pub dis: f64,
    pub lambda: f64,
    pub predicted: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SearchOutcome {
    pub best: Option<Candidate>,
    pub last: Candidate,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
}

/// Runs the λ search. `evaluate(field, λ, iteration)` must return the
/// objective at `field`; `iteration` counts across the whole search.
pub(crate) fn binary_search(cfg: &AttackConfig, initial: &DeformationField, mut evaluate: impl FnMut(&DeformationField, f64, usize) -> Result<Evaluation>) -> Result<SearchOutcome> {
    let (mut lo, mut hi) = (cfg.lambda_min, cfg.lambda_max);
    let mut lambda = cfg.lambda_init;
    let mut best: Option<Candidate> = None;
    let mut last = None;
    let mut trace = Vec::with_capacity(cfg.binary_search_steps);
    let mut iterations = 0;
    let check_every = (cfg.inner_iters / 10).max(1);

    for step in 0..cfg.binary_search_steps {
        if cfg.final_probe_at_min && step > 0 && step + 1 == cfg.binary_search_steps && best.is_none() {
            lambda = cfg.lambda_min;
        }
        let mut field = initial.clone();
        let mut params = pack(&field);
        let mut adam = Adam::new(params.len(), cfg.lr);
        let mut diverged = false;
        let mut aborted = false;
        let mut prev = f64::INFINITY;
        let mut ran = 0;
        for it in 0..cfg.inner_iters {
            let ev = evaluate(&field, lambda, iterations)?;
            iterations += 1;
            ran += 1;
            if !is_finite(&ev) {
                debug!("non-finite objective at lambda {lambda}, iteration {it}");
                diverged = true;
                break;
            }
            if cfg.abort_early && it > 0 && it % check_every == 0 {
                if ev.total > prev - 1e-4 * prev.abs() {
                    aborted = true;
                    break;
                }
                prev = ev.total;
            }
            adam.step(&mut params, &pack_grad(&ev));
            unpack(&mut field, &params);
            field.clip_sigmas(cfg.sigma_min, cfg.a);
            params = pack(&field);
        }
        // Each step is judged by where its optimisation ended; a diverged
        // branch counts as a failure at this λ.
        let final_ev = if diverged {
            None
        } else {
            let ev = evaluate(&field, lambda, iterations)?;
            iterations += 1;
            is_finite(&ev).then_some(ev)
        };
        let success = final_ev.as_ref().is_some_and(|ev| ev.success);
        if let Some(ev) = &final_ev {
            let cand = Candidate {
                field: field.clone(),
                adv: ev.adv.clone(),
                dis: ev.dis.total,
                lambda,
                predicted: ev.predicted,
            };
            if success && best.as_ref().is_none_or(|b| cand.dis < b.dis) {
                best = Some(cand.clone());
            }
            last = Some(cand);
        }
        trace.push(TraceEntry {
            lambda,
            success,
            iterations: ran,
            aborted_early: aborted,
            diverged: final_ev.is_none(),
            final_total: final_ev.as_ref().map(|e| e.total),
            final_cls: final_ev.as_ref().map(|e| e.cls),
            final_dis: final_ev.as_ref().map(|e| e.dis.total),
        });
        if success {
            lo = lambda;
        } else {
            hi = lambda;
        }
        lambda = 0.5 * (lo + hi);
    }
    let last = match last {
        Some(c) => c,
        None => Candidate {
            field: initial.clone(),
            adv: Vec::new(),
            dis: f64::NAN,
            lambda,
            predicted: usize::MAX,
        },
    };
    Ok(SearchOutcome {
        best,
        last,
        trace,
        iterations,
    })
}

/// Deformation attack on a labelled cloud.
pub fn run_attack(model: &ClassifierModel, cloud: &PointCloud, cfg: &AttackConfig, rcfg: &RegionSearchConfig) -> Result<AttackResult> {
    cfg.validate()?;
    let label = cloud.label().ok_or_else(|| Error::Invalid("cloud has no label".into()))?;
    if let Some(r) = AttackResult::trivial_if_misclassified(model, cloud, label, cfg.target, AttackMethod::HitAdv, rcfg.k)? {
        return Ok(r);
    }
    let setup = prepare_attack(model, cloud, cfg, rcfg)?;
    let problem = AttackProblem::new(model, cloud.points(), label, cfg, &setup.initial, setup.center_cstd.clone())?;
    let outcome = binary_search(cfg, &setup.initial, |field, lambda, _| problem.evaluate(field, lambda, 1.0, None, None))?;
    AttackResult::from_search(AttackMethod::HitAdv, cloud, label, cfg.target, &setup, outcome, model, rcfg.k)
}
