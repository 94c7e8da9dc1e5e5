//! The conditional drum network: configuration, parameters, forward pass,
//! optimizer, training loop and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod forward;
pub mod params;
pub mod train;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use config::ModelConfig;
pub use forward::{evaluate, forward_step, sequence_gradcheck, sequence_loss, DropoutSite, Evaluation, ModelState, RunMode, StepInput};
pub use params::{init_params, ModelParams, StreamBlock};
pub use train::{train, TrainOptions, Trainer, TrainingRun};
