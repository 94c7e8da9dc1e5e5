use serde::{Deserialize, Serialize};

use crate::encoding::condition::CONDITION_DIM;
use crate::encoding::sequence::{DEFAULT_WINDOW_FUTURE, DEFAULT_WINDOW_PAST};
use crate::encoding::words::VOCAB_SIZES;
use crate::error::{Error, Result};

/// Width of every LSTM layer and of both condition modules.
pub const HIDDEN_UNITS: usize = 256;
pub const LSTM_LAYERS: usize = 2;
pub const DROPOUT_RATE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub lstm_layers: usize,
    pub dropout: f64,
    pub window_past: usize,
    pub window_future: usize,
    pub vocab_sizes: [usize; 3],
    pub condition_dim: usize,
    pub learning_rate: f64,
    pub seq_len: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: HIDDEN_UNITS,
            lstm_layers: LSTM_LAYERS,
            dropout: DROPOUT_RATE,
            window_past: DEFAULT_WINDOW_PAST,
            window_future: DEFAULT_WINDOW_FUTURE,
            vocab_sizes: VOCAB_SIZES,
            condition_dim: CONDITION_DIM,
            learning_rate: 1e-3,
            seq_len: 64,
            batch_size: 16,
            clip_norm: 5.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("model config: {what}")));
        if self.hidden == 0 || self.lstm_layers == 0 || self.seq_len == 0 || self.batch_size == 0 {
            return bad("hidden, lstm_layers, seq_len and batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.vocab_sizes != VOCAB_SIZES || self.condition_dim != CONDITION_DIM {
            return bad("vocabulary and condition sizes are fixed by the encoding");
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) {
            return bad("learning_rate and clip_norm must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!((c.hidden, c.lstm_layers, c.dropout), (256, 2, 0.2));
        assert_eq!((c.window_past, c.window_future), (4, 4));
    }

    #[test]
    fn rejects_bad_values_and_unknown_keys() {
        let c = ModelConfig { dropout: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { vocab_sizes: [4, 8, 8], ..Default::default() };
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<ModelConfig>(r#"{"hiden": 4}"#).is_err());
        let c: ModelConfig = serde_json::from_str(r#"{"hidden": 4}"#).unwrap();
        assert_eq!(c.hidden, 4);
        assert_eq!(c.seq_len, 64);
    }
}
