//! Seeded, resumable training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::checkpoint::{Checkpoint, RngState};
use super::config::ModelConfig;
use super::forward::{batch_loss, cut_slices, evaluate, RunMode};
use super::params::{init_params, ModelParams};
use crate::autodiff::Tape;
use crate::encoding::sequence::EncodedSequence;
use crate::error::{Error, Result};

/// Snapshot epochs on either side of the 100-epoch early/late divide.
pub const DEFAULT_SNAPSHOTS: [usize; 2] = [50, 150];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub snapshot_epochs: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            snapshot_epochs: DEFAULT_SNAPSHOTS.to_vec(),
            seed: 0,
        }
    }
}

/// Parameters, optimizer, epoch counter and RNG of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    params: ModelParams,
    optimizer: Adam,
    epoch: usize,
    rng: ChaCha8Rng,
    loss_curve: Vec<f64>,
}

impl Trainer {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = init_params(config, &mut rng)?;
        let optimizer = Adam::new(&params.store, config.learning_rate, Some(config.clip_norm));
        Ok(Self {
            params,
            optimizer,
            epoch: 0,
            rng,
            loss_curve: Vec::new(),
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Ok(Self {
            params: ckpt.params.clone(),
            optimizer: ckpt.optimizer.clone(),
            epoch: ckpt.epoch,
            rng: ckpt.rng.restore()?,
            loss_curve: ckpt.loss_curve.clone(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn loss_curve(&self) -> &[f64] {
        &self.loss_curve
    }

    /// Snapshot of the trainer; gradient buffers are not part of it.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut params = self.params.clone();
        params.store.zero_grads();
        Checkpoint {
            config: self.params.config.clone(),
            epoch: self.epoch,
            params,
            optimizer: self.optimizer.clone(),
            rng: RngState::capture(&self.rng),
            loss_curve: self.loss_curve.clone(),
        }
    }

    /// One pass over the shuffled corpus; returns the mean per-step training loss.
    pub fn run_epoch(&mut self, corpus: &[EncodedSequence]) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::Empty("training corpus"));
        }
        let config = self.params.config.clone();
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut self.rng);
        let slices = cut_slices(corpus, &order, config.seq_len);

        let mut weighted = 0.0;
        let mut steps = 0;
        for batch in slices.chunks(config.batch_size) {
            self.params.store.zero_grads();
            let (grads, loss, valid) = {
                let mut tape = Tape::new(&self.params.store);
                let mut mode = RunMode::new(true, &mut self.rng);
                let (loss, valid) = batch_loss(&mut tape, &self.params, corpus, batch, &mut mode, None)?;
                (tape.backward(loss)?, tape.value(loss).data()[0], valid)
            };
            self.params.store.accumulate(&grads)?;
            self.optimizer.update(&mut self.params.store)?;
            weighted += loss * valid as f64;
            steps += valid;
        }
        self.epoch += 1;
        let mean = weighted / steps as f64;
        self.loss_curve.push(mean);
        Ok(mean)
    }
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    /// Checkpoints at the requested snapshot epochs and at the final epoch.
    pub checkpoints: Vec<Checkpoint>,
    pub loss_curve: Vec<f64>,
    /// Inference-mode loss of the initial parameters.
    pub initial_loss: f64,
}

pub fn train(corpus: &[EncodedSequence], config: &ModelConfig, options: &TrainOptions) -> Result<TrainingRun> {
    let trainer = Trainer::new(config, options.seed)?;
    continue_training(trainer, corpus, options)
}

/// Trains an existing trainer up to `options.epochs` total epochs.
pub fn continue_training(mut trainer: Trainer, corpus: &[EncodedSequence], options: &TrainOptions) -> Result<TrainingRun> {
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    let initial_loss = evaluate(trainer.params(), corpus)?.loss_per_step;
    let mut checkpoints = Vec::new();
    if options.epochs <= trainer.epoch() {
        checkpoints.push(trainer.checkpoint());
    }
    while trainer.epoch() < options.epochs {
        trainer.run_epoch(corpus)?;
        let e = trainer.epoch();
        if options.snapshot_epochs.contains(&e) || e == options.epochs {
            checkpoints.push(trainer.checkpoint());
        }
    }
    Ok(TrainingRun {
        checkpoints,
        loss_curve: trainer.loss_curve().to_vec(),
        initial_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::sequence::encode_song;
    use crate::encoding::song::{Bar, DrumEvent, PhraseMark, Song};
    use crate::encoding::Component;

    fn corpus() -> Vec<EncodedSequence> {
        (0..3)
            .map(|i| {
                let mut song = Song {
                    title: format!("s{i}"),
                    bars: vec![Bar::new(4, 4, 100.0 + 10.0 * i as f64, PhraseMark::Start); 2],
                    guitar: vec![],
                    bass: vec![],
                    drums: vec![],
                };
                for s in (0..32).step_by(4) {
                    song.drums.push(DrumEvent { step: s as f64, component: Component::Kick });
                }
                encode_song(&song, 4, 4).unwrap()
            })
            .collect()
    }

    fn small() -> ModelConfig {
        ModelConfig {
            hidden: 6,
            seq_len: 12,
            batch_size: 2,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_state() {
        let opts = TrainOptions { epochs: 0, ..Default::default() };
        let run = train(&corpus(), &small(), &opts).unwrap();
        assert_eq!(run.checkpoints.len(), 1);
        assert_eq!(run.checkpoints[0].epoch, 0);
        assert!(run.loss_curve.is_empty());
        assert!((run.initial_loss - 512f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(train(&[], &small(), &TrainOptions::default()), Err(Error::Empty(_))));
    }

    #[test]
    fn fixed_seed_gives_identical_curves() {
        let opts = TrainOptions { epochs: 3, snapshot_epochs: vec![2], seed: 5 };
        let a = train(&corpus(), &small(), &opts).unwrap();
        let b = train(&corpus(), &small(), &opts).unwrap();
        let bits = |c: &[f64]| c.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.loss_curve), bits(&b.loss_curve));
        assert_eq!(a.checkpoints.iter().map(|c| c.epoch).collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(a.checkpoints[1].to_bytes(), b.checkpoints[1].to_bytes());
    }

    #[test]
    fn one_step_reduces_batch_loss() {
        let corpus = corpus();
        let config = ModelConfig { dropout: 0.0, batch_size: 16, seq_len: 64, ..small() };
        let mut trainer = Trainer::new(&config, 1).unwrap();
        let before = evaluate(trainer.params(), &corpus).unwrap().loss_per_step;
        trainer.run_epoch(&corpus).unwrap();
        let after = evaluate(trainer.params(), &corpus).unwrap().loss_per_step;
        assert!(after < before, "{after} !< {before}");
    }
}
