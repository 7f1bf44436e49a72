//! `L_cls + λ·L_dis` over a deformation field, with exact gradients.

use nalgebra::DVector;

use super::config::AttackConfig;
use super::kernel::{DeformationField, KernelGeometry};
use super::losses::{chamfer_grad, loss_hide_grad, loss_ker_grad, DisBreakdown, DisWeights};
use crate::classifier::{argmax, cw_margin, ClassifierModel};
use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};
use crate::hardening::{ResampleMap, RigidTransform};

/// How the deformed cloud is presented to the classifier and the Chamfer
/// term. The classifier sees `transform(resample(P'))`; Chamfer compares
/// `transform(P)` with `transform(P')`.
#[derive(Debug, Clone, Default)]
pub struct View {
    pub resample: Option<ResampleMap>,
    pub transform: RigidTransform,
}

/// Point sets an evaluation actually used, for instrumentation.
#[derive(Debug, Clone)]
pub struct Probe<'a> {
    pub classifier_input: &'a [Point],
    pub chamfer_clean: &'a [Point],
    pub chamfer_adv: &'a [Point],
}

/// Everything about one attack instance that stays fixed while the field
/// is optimised.
#[derive(Debug, Clone)]
pub struct AttackProblem<'a> {
    pub model: &'a ClassifierModel,
    pub label: usize,
    pub kappa: f64,
    pub target: Option<usize>,
    pub a: f64,
    pub weights: DisWeights,
    pub center_cstd: Vec<f64>,
    geometry: KernelGeometry,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub total: f64,
    pub cls: f64,
    pub dis: DisBreakdown,
    pub logits: DVector<f64>,
    pub predicted: usize,
    pub success: bool,
    /// The deformed cloud (before any view).
    pub adv: Vec<Point>,
    pub max_displacement: f64,
    pub grad_delta: Vec<Point>,
    pub grad_sigma: Vec<f64>,
}

impl<'a> AttackProblem<'a> {
    pub fn new(model: &'a ClassifierModel, clean: &[Point], label: usize, cfg: &AttackConfig, field: &DeformationField, center_cstd: Vec<f64>) -> Result<Self> {
        if center_cstd.len() != field.len() {
            return Err(Error::AttrLength {
                name: "center_cstd".into(),
                len: center_cstd.len(),
                expected: field.len(),
            });
        }
        if label >= model.num_classes() || cfg.target.is_some_and(|t| t >= model.num_classes()) {
            return Err(Error::Invalid("class index out of range".into()));
        }
        Ok(Self {
            model,
            label,
            kappa: cfg.kappa,
            target: cfg.target,
            a: cfg.a,
            weights: DisWeights {
                lambda1: cfg.lambda1,
                lambda2: cfg.lambda2,
                lambda3: cfg.lambda3,
            },
            center_cstd,
            geometry: KernelGeometry::new(clean, field),
        })
    }

    pub fn clean(&self) -> &[Point] {
        self.geometry.base()
    }

    pub fn is_success(&self, predicted: usize) -> bool {
        match self.target {
            Some(t) => predicted == t,
            None => predicted != self.label,
        }
    }

    pub fn deform(&self, field: &DeformationField) -> Vec<Point> {
        self.geometry.deform(field).adv
    }

    /// Objective `cls_weight·L_cls + λ·L_dis` and its gradients.
    pub fn evaluate(&self, field: &DeformationField, lambda: f64, cls_weight: f64, view: Option<&View>, probe: Option<&mut dyn FnMut(&Probe)>) -> Result<Evaluation> {
        let state = self.geometry.deform(field);
        let clean = self.geometry.base();
        let (cls_input, chamfer_clean, chamfer_adv) = match view {
            None => (state.adv.clone(), clean.to_vec(), state.adv.clone()),
            Some(v) => {
                let seen = match &v.resample {
                    Some(map) => map.apply(&state.adv),
                    None => state.adv.clone(),
                };
                (
                    v.transform.apply_points(&seen),
                    v.transform.apply_points(clean),
                    v.transform.apply_points(&state.adv),
                )
            }
        };
        if let Some(f) = probe {
            f(&Probe {
                classifier_input: &cls_input,
                chamfer_clean: &chamfer_clean,
                chamfer_adv: &chamfer_adv,
            });
        }

        let cache = self.model.forward(&cls_input);
        let logits = cache.logits().clone();
        let predicted = argmax(&logits);
        let (cls, dlogits) = cw_margin(&logits, self.label, self.kappa, self.target)?;
        let (cha, cha_grad) = chamfer_grad(&chamfer_clean, &chamfer_adv);

        let mut g = if cls_weight != 0.0 {
            let raw = self.model.input_grad(&cache, &(dlogits * cls_weight));
            match view {
                None => raw,
                Some(v) => {
                    let back: Vec<Point> = raw.iter().map(|x| v.transform.pullback(x)).collect();
                    match &v.resample {
                        Some(map) => map.pullback(&back),
                        None => back,
                    }
                }
            }
        } else {
            vec![Point::zeros(); clean.len()]
        };
        let cw = lambda * self.weights.lambda3;
        if cw != 0.0 {
            for (gj, cj) in g.iter_mut().zip(&cha_grad) {
                *gj += match view {
                    None => cj * cw,
                    Some(v) => v.transform.pullback(cj) * cw,
                };
            }
        }
        let (mut grad_delta, mut grad_sigma) = self.geometry.backprop(field, &state, &g);

        let (ker, ker_gd, ker_gs) = loss_ker_grad(field, self.a);
        let (hide, hide_gs) = loss_hide_grad(&field.sigmas, &self.center_cstd);
        let (w1, w2) = (lambda * self.weights.lambda1, lambda * self.weights.lambda2);
        for i in 0..field.len() {
            grad_delta[i] += ker_gd[i] * w1;
            grad_sigma[i] += ker_gs[i] * w1 + hide_gs[i] * w2;
        }
        let dis = DisBreakdown {
            ker,
            hide,
            cha,
            total: self.weights.combine(ker, hide, cha),
        };
        let max_displacement = state.disp.iter().map(|u| u.norm()).fold(0.0, f64::max);
        Ok(Evaluation {
            total: cls_weight * cls + lambda * dis.total,
            cls,
            dis,
            logits,
            predicted,
            success: self.is_success(predicted),
            adv: state.adv,
            max_displacement,
            grad_delta,
            grad_sigma,
        })
    }
}

/// Gradients of the total objective with respect to a field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGradient {
    pub total: f64,
    pub delta: Vec<Point>,
    pub sigma: Vec<f64>,
}

/// One-shot gradient of `L_cls + λ·L_dis` for a labelled cloud.
pub fn attack_gradient(model: &ClassifierModel, cloud: &PointCloud, field: &DeformationField, cfg: &AttackConfig, center_cstd: &[f64], lambda: f64) -> Result<FieldGradient> {
    let label = cloud.label().ok_or_else(|| Error::Invalid("cloud has no label".into()))?;
    let problem = AttackProblem::new(model, cloud.points(), label, cfg, field, center_cstd.to_vec())?;
    let ev = problem.evaluate(field, lambda, 1.0, None, None)?;
    Ok(FieldGradient {
        total: ev.total,
        delta: ev.grad_delta,
        sigma: ev.grad_sigma,
    })
}
