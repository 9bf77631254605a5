//! Backbones, losses and training.

mod discrepancy;
mod loss;
mod spec;
mod train;
mod uplift;

pub use discrepancy::{
    discrepancy_multi, mmd_rbf, mmd_rbf_with, wasserstein_1d, DiscValue, MmdEstimator, MEDIAN_SAMPLE_CAP,
};
pub use loss::{bce_loss, sigmoid, PROB_CLAMP};
pub use spec::{Backbone, DiscKind, ModelSpec, Pairing, Preset};
pub use train::{train, train_with, EpochRecord, TrainConfig, TrainHistory};
pub use uplift::{Batch, LossParts, ModelGrads, UpliftModel};
