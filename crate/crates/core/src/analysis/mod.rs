//! Rhythm features, t-SNE embedding and their CSV formats.

pub mod csv_io;
pub mod features;
pub mod tsne;

pub use features::{bar_features, global_features, lhl_syncopation, song_features, BarFeatures, GlobalFeatures};
pub use tsne::{tsne_embed, Embedding, TsneConfig};
