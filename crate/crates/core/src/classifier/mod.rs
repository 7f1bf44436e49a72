//! The victim classifier: a PointNet-lite network in double precision with
//! exact gradients for parameters and input coordinates, plus saliency
//! scoring and (adversarial) training.

mod checkpoint;
mod gradient;
mod loss;
mod model;
mod normalize;
mod saliency;
mod train;

pub use checkpoint::{load_model, save_model, CHECKPOINT_VERSION};
pub use gradient::{input_gradient, loss_and_input_grad, GradientReport};
pub use loss::{cross_entropy, cw_margin, LossSpec};
pub use model::{argmax, Architecture, ClassifierModel, ForwardCache, Linear};
pub use normalize::normalize_cloud;
pub use saliency::{coordinate_median, saliency_from_gradient, saliency_scores, SALIENCY_ALPHA};
pub use train::{
    accuracy, adversarial_train, l2_norm, pgd_l2, project_l2, train, Augmentation, Dataset, PgdConfig, Split, TrainConfig,
    TrainReport, Trained,
};
