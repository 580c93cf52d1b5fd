//! Physics-informed learning of the set-based value function.
//!
//! Sets enter the network through the hyper-interval embedding
//! `[lo, hi] ↦ (lo, hi)`, so the same model scores singletons `{x}` and
//! one-step images `F({x})`. Training minimises
//! `λ_d·mean (W̃ − ω̃(𝒯{x}))² + λ_pi·mean (Zubov residual)²`.

mod checkpoint;
mod dataset;
mod embed;
mod loss;
mod mlp;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use dataset::{
    collocation_point_at, data_point_at, generate_dataset, CollocationPoint, DataPoint, ValueDataset,
};
pub use embed::{embed_rect, embed_singleton, embed_singleton_into, Embedding};
pub use loss::{composite_loss, composite_loss_grad, loss_data, loss_pi, LossBreakdown, LossWeights};
pub use mlp::{Activation, MlpModel, Tape};
pub use train::{train, EpochLoss, TrainConfig, TrainHistory};

/// `ω_nn(x) = ω̃(𝒯({x}))`.
pub fn omega_nn(m: &MlpModel, x: &[f64]) -> f64 {
    let mut z = vec![0.0; 2 * x.len()];
    embed_singleton_into(x, &mut z);
    m.forward_unchecked(&z)
}
