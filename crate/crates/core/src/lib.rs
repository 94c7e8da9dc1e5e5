//! Conditional drum-rhythm generation with three parallel LSTM streams
//! and two shared feed-forward condition modules.
//!
//! The crate is dependency-light and framework-free: [`tensor`] and
//! [`autodiff`] provide the numeric substrate, [`layers`] the recurrent and
//! linear building blocks, [`encoding`] the symbolic-music representation,
//! [`model`] the network with training and checkpoints, [`generate`] seeded
//! sampling, [`analysis`] rhythm features and t-SNE, and [`synth`] a
//! registry of rule-based styles for building corpora.

pub mod analysis;
pub mod autodiff;
pub mod encoding;
pub mod error;
pub mod fsio;
pub mod generate;
pub mod layers;
pub mod model;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
