//! Seeded, condition-driven sampling of drum sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::encoding::sequence::{encode_song, with_drum_words, EncodedSequence};
use crate::encoding::song::Song;
use crate::encoding::words::{WordTriple, SILENCE};
use crate::error::{Error, Result};
use crate::model::forward::{argmax, forward_step, ModelState, RunMode, StepInput};
use crate::model::ModelParams;

/// Temperatures at or below this are treated as greedy decoding.
pub const GREEDY_TEMPERATURE: f64 = 0.01;
/// Diversity values offered on the command line.
pub const TEMPERATURE_CHOICES: [f64; 4] = [0.5, 0.8, 1.0, 1.2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub seed_steps: usize,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            seed_steps: 16,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.seed_steps == 0 {
            return Err(Error::InvalidArgument("seed_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-step conditions of a piece, with its bar structure and source song.
#[derive(Debug, Clone)]
pub struct ConditionTrack {
    pub song: Song,
    pub encoded: EncodedSequence,
}

impl ConditionTrack {
    /// Encodes `song` with the model's window sizes. Any drums in the song
    /// become available as seed words.
    pub fn from_song(song: &Song, params: &ModelParams) -> Result<Self> {
        let c = &params.config;
        Ok(Self {
            song: song.clone(),
            encoded: encode_song(song, c.window_past, c.window_future)?,
        })
    }

    pub fn len(&self) -> usize {
        self.encoded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoded.is_empty()
    }

    /// Drum words of the source song, one per step.
    pub fn words(&self) -> &[WordTriple] {
        &self.encoded.words
    }
}

/// Reweights `p` as `p_i^(1/T)`, renormalized; one-hot on the argmax when
/// `T <= GREEDY_TEMPERATURE`.
pub fn temperature_adjust(p: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) || temperature.is_nan() {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {temperature}")));
    }
    if p.is_empty() {
        return Err(Error::Empty("probability row"));
    }
    if temperature <= GREEDY_TEMPERATURE {
        let mut out = vec![0.0; p.len()];
        out[argmax(p)] = 1.0;
        return Ok(out);
    }
    // Work in log space so small temperatures do not underflow every entry.
    let logs: Vec<f64> = p.iter().map(|&x| x.ln() / temperature).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = out.iter().sum();
    for x in &mut out {
        *x /= z;
    }
    Ok(out)
}

/// Inverse-CDF draw from `p`. Zero-probability entries are never chosen.
pub fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let total: f64 = p.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &x) in p.iter().enumerate() {
        if x <= 0.0 {
            continue;
        }
        acc += x;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub words: Vec<WordTriple>,
    /// The condition song with its drum track replaced by `words`.
    pub song: Song,
}

/// Warms the recurrent state on `seed` (copied to the output), then samples
/// every later step from the temperature-adjusted heads.
///
/// If the seed covers the whole track the output is the seed itself.
pub fn generate(params: &ModelParams, track: &ConditionTrack, seed: &[WordTriple], config: &GenerationConfig) -> Result<Generated> {
    config.validate()?;
    let n = track.len();
    let seed_len = config.seed_steps.min(n);
    if seed.len() < seed_len {
        return Err(Error::InvalidArgument(format!(
            "seed has {} steps, {} required",
            seed.len(),
            seed_len
        )));
    }
    let vocab = params.config.vocab_sizes;
    for w in &seed[..seed_len] {
        for (k, &idx) in w.iter().enumerate() {
            if idx >= vocab[k] {
                return Err(Error::IndexOutOfRange { index: idx, len: vocab[k] });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut words: Vec<WordTriple> = seed[..seed_len].to_vec();
    let mut state_values = None;
    if seed_len < n {
        for t in 0..n {
            let prev = if t == 0 { SILENCE } else { words[t - 1] };
            let (probs, next_state) = advance(params, track, t, prev, state_values.take(), &mut rng)?;
            state_values = Some(next_state);
            if t < seed_len {
                continue;
            }
            let mut w = [0usize; 3];
            for (k, row) in probs.iter().enumerate() {
                let adjusted = temperature_adjust(row, config.temperature)?;
                w[k] = sample_categorical(&adjusted, &mut rng);
            }
            words.push(w);
        }
    }
    words.truncate(n);
    Ok(Generated {
        song: with_drum_words(&track.song, &words),
        words,
    })
}

type StateValues = Vec<Vec<crate::layers::LstmStateValues>>;

/// One inference step at `t`; returns the three probability rows and the new state.
fn advance(
    params: &ModelParams,
    track: &ConditionTrack,
    t: usize,
    prev: WordTriple,
    state: Option<StateValues>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<f64>>, StateValues)> {
    let mut tape = Tape::new(&params.store);
    let mut state = match state {
        Some(v) => ModelState::from_values(&mut tape, &v),
        None => ModelState::zeros(&mut tape, params, 1),
    };
    let mut mode = RunMode::new(false, rng);
    let input = StepInput {
        prev_words: std::slice::from_ref(&prev),
        pre: std::slice::from_ref(&track.encoded.pre[t]),
        post: std::slice::from_ref(&track.encoded.post[t]),
    };
    let outputs = forward_step(&mut tape, params, input, &mut state, &mut mode)?;
    let probs = outputs.iter().map(|&v| tape.value(v).row(0).to_vec()).collect();
    Ok((probs, state.values(&tape)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn unit_temperature_is_identity() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let q = temperature_adjust(&p, 1.0).unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_row_is_fixed() {
        for t in [0.05, 0.5, 2.0, 10.0] {
            assert_eq!(temperature_adjust(&[0.5, 0.5], t).unwrap(), vec![0.5, 0.5]);
        }
    }

    #[test]
    fn half_temperature_squares() {
        let q = temperature_adjust(&[0.8, 0.2], 0.5).unwrap();
        // 0.64 / 0.68 and 0.04 / 0.68
        assert!((q[0] - 0.64 / 0.68).abs() < 1e-12);
        assert!((q[1] - 0.04 / 0.68).abs() < 1e-12);
        assert!((q[0] - 0.9412).abs() < 5e-5);
    }

    #[test]
    fn tiny_temperature_is_argmax_first_on_ties() {
        assert_eq!(temperature_adjust(&[0.2, 0.4, 0.4], 0.001).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(temperature_adjust(&[0.2, 0.4, 0.4], 0.01).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_ne!(temperature_adjust(&[0.5, 0.49], 0.011).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn nonpositive_temperature_is_rejected() {
        assert!(temperature_adjust(&[1.0], 0.0).is_err());
        assert!(temperature_adjust(&[1.0], -1.0).is_err());
        assert!(temperature_adjust(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn one_hot_always_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[0.0, 0.0, 1.0, 0.0], &mut rng), 2);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = [0.1, 0.6, 0.3];
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_categorical(&p, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn uniform_counts_concentrate() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[sample_categorical(&[0.25; 4], &mut rng)] += 1;
        }
        for c in counts {
            assert!((2150..=2850).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(GenerationConfig::default().validate().is_ok());
        assert!(GenerationConfig { temperature: 0.0, ..Default::default() }.validate().is_err());
        assert!(GenerationConfig { seed_steps: 0, ..Default::default() }.validate().is_err());
    }
}
