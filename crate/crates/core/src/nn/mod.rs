//! Dense network with batch normalization, exact reverse-mode gradients for
//! parameters and inputs, and an Adam optimizer.

mod adam;
pub mod checkpoint;
mod layer;
mod model;

pub use adam::{AdamConfig, AdamState};
pub use layer::{BatchNorm, DenseLayer, BN_EPS, BN_MOMENTUM};
pub use model::{
    default_scales, init_params, Cache, ForwardPass, Gradients, HeadLayout, LayerGrad, MlpClassifier, Mode,
};
