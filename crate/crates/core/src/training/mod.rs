//! Synthetic data, losses, and the stage-by-stage training procedure.

mod config;
mod loss;
mod synth;
mod train;

pub use config::TrainConfig;
pub use loss::{mse_loss, mse_loss_batch, stage_weights, stage_wise_loss};
pub use synth::{synth_scene, synth_scenes, temporal_diff_energy, SceneSpec};
pub use train::{
    clip_global_norm, loss_and_grads, measure, phase_plan, synth_dataset, train, EpochRecord, PhasePlan, TrainLog,
    TrainObserver,
};
