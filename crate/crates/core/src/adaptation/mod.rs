//! Source pretraining, frozen-backbone correction training, batch-norm
//! statistic replacement and discrepancy-regularized pretraining.

mod adabn;
mod config;
mod mmd;
mod train;

pub use adabn::{adabn_transform, AdaBnScope};
pub use config::{EpochStats, TrainConfig, TrainReport, Trained};
pub use mmd::{
    median_pairwise_distance, mmd_biased, mmd_loss, mmd_unbiased, mmd_with_grad, AlignmentLayer,
    MmdConfig,
};
pub use train::{
    fit_autoencoder, pretrain_mmd, pretrain_source, train_adaptive, train_adaptive_with,
};
