use nalgebra::DVector;

use super::{ClassifierModel, LossSpec};
use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

/// Gradient of a scalar loss with respect to every input coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub loss: f64,
    pub grads: Vec<Point>,
    pub logits: DVector<f64>,
}

impl GradientReport {
    /// Euclidean norm over all coordinates.
    pub fn norm(&self) -> f64 {
        self.grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt()
    }
}

/// Loss and exact input gradient for raw points and an explicit label.
pub fn loss_and_input_grad(model: &ClassifierModel, points: &[Point], label: usize, loss: &LossSpec) -> Result<GradientReport> {
    let cache = model.forward(points);
    let (value, dlogits) = loss.eval(cache.logits(), label)?;
    let grads = model.input_grad(&cache, &dlogits);
    Ok(GradientReport {
        loss: value,
        grads,
        logits: cache.logits().clone(),
    })
}

/// Input gradient for a labelled cloud.
pub fn input_gradient(model: &ClassifierModel, cloud: &PointCloud, loss: &LossSpec) -> Result<GradientReport> {
    let label = cloud
        .label()
        .ok_or_else(|| Error::Invalid("cloud has no label".into()))?;
    loss_and_input_grad(model, cloud.points(), label, loss)
}
