use rand::Rng;

use super::config::ModelConfig;
use crate::autodiff::ParamStore;
use crate::encoding::words::Stream;
use crate::error::Result;
use crate::layers::{LinearLayer, LstmLayerParams};

/// Recurrent stack and softmax head of one drum stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamBlock {
    pub stream: Stream,
    pub lstm: Vec<LstmLayerParams>,
    pub head: LinearLayer,
}

/// All weights of the network: two condition modules shared by three
/// stream blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub store: ParamStore,
    /// Past-window condition module, merged before each LSTM stack.
    pub pre_ff: LinearLayer,
    /// Current/future-window condition module, merged after each LSTM stack.
    pub post_ff: LinearLayer,
    pub streams: Vec<StreamBlock>,
}

/// Glorot-uniform weights, zero biases except unit LSTM forget biases,
/// zero output heads.
pub fn init_params<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<ModelParams> {
    config.validate()?;
    let h = config.hidden;
    let mut store = ParamStore::new();
    let pre_ff = LinearLayer::glorot(&mut store, "pre_ff", config.condition_dim, h, rng);
    let post_ff = LinearLayer::glorot(&mut store, "post_ff", config.condition_dim, h, rng);
    let streams = Stream::ALL
        .into_iter()
        .map(|stream| {
            let vocab = config.vocab_sizes[stream.index()];
            let lstm = (0..config.lstm_layers)
                .map(|layer| {
                    let input = if layer == 0 { vocab + h } else { h };
                    LstmLayerParams::glorot(&mut store, &format!("{stream}.lstm{layer}"), input, h, rng)
                })
                .collect();
            let head = LinearLayer::zeros(&mut store, &format!("{stream}.head"), 2 * h, vocab);
            StreamBlock { stream, lstm, head }
        })
        .collect();
    Ok(ModelParams {
        config: config.clone(),
        store,
        pre_ff,
        post_ff,
        streams,
    })
}

impl ModelParams {
    pub fn num_scalars(&self) -> usize {
        self.store.num_scalars()
    }

    /// Overwrites every parameter with uniform noise in `[-scale, scale]`,
    /// so zero-initialized heads do not hide the recurrent gradients.
    pub fn randomize<R: Rng + ?Sized>(&mut self, scale: f64, rng: &mut R) {
        for p in self.store.params_mut() {
            for x in p.value.data_mut() {
                *x = rng.random_range(-scale..=scale);
            }
        }
    }
}
