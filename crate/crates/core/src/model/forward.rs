//! Forward pass, teacher-forced losses and evaluation.
//!
//! Per step and stream `s`:
//! `x_s = [onehot_s(t−1) | pre_ff(pre window)]`, `h_s = lstm_s(x_s)`,
//! `y_s = softmax(head_s([h_s | post_ff(post window)]))`. The two condition
//! modules are evaluated once and their outputs shared by every stream.

use rand::RngCore;

use super::params::ModelParams;
use crate::autodiff::{finite_diff_check, GradCheckReport, Tape, Var};
use crate::encoding::condition::DenseCondition;
use crate::encoding::sequence::EncodedSequence;
use crate::encoding::words::{Stream, WordTriple};
use crate::error::{Error, Result};
use crate::layers::{dropout, linear_forward, stacked_lstm_step, LstmState, LstmStateValues};
use crate::tensor::Tensor;

/// Where a dropout mask is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropoutSite {
    PreFfOutput,
    PostFfOutput,
    /// Input of LSTM layer `layer` in a stream stack; layer 0 is the block input.
    LstmInput { stream: Stream, layer: usize },
    LstmOutput { stream: Stream },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutRecord {
    pub site: DropoutSite,
    pub rate: f64,
}

/// Training flag, randomness for dropout, optional dropout trace.
pub struct RunMode<'a> {
    pub training: bool,
    pub rng: &'a mut dyn RngCore,
    pub trace: Option<&'a mut Vec<DropoutRecord>>,
}

impl<'a> RunMode<'a> {
    pub fn new(training: bool, rng: &'a mut dyn RngCore) -> Self {
        Self { training, rng, trace: None }
    }

    fn drop(&mut self, tape: &mut Tape<'_>, x: Var, site: DropoutSite, rate: f64) -> Result<Var> {
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(DropoutRecord { site, rate });
        }
        dropout(tape, x, rate, self.training, &mut *self.rng)
    }
}

/// Batched inputs for one step; all slices have one entry per batch row.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub prev_words: &'a [WordTriple],
    pub pre: &'a [DenseCondition],
    pub post: &'a [DenseCondition],
}

/// Recurrent state of the three stream stacks.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub streams: Vec<LstmState>,
}

impl ModelState {
    pub fn zeros(tape: &mut Tape<'_>, params: &ModelParams, batch: usize) -> Self {
        let c = &params.config;
        Self {
            streams: (0..params.streams.len())
                .map(|_| LstmState::zeros(tape, c.lstm_layers, batch, c.hidden))
                .collect(),
        }
    }

    pub fn values(&self, tape: &Tape<'_>) -> Vec<Vec<LstmStateValues>> {
        self.streams.iter().map(|s| s.values(tape)).collect()
    }

    pub fn from_values(tape: &mut Tape<'_>, values: &[Vec<LstmStateValues>]) -> Self {
        Self {
            streams: values.iter().map(|v| LstmState::from_values(tape, v)).collect(),
        }
    }
}

fn one_hot_rows(words: &[WordTriple], stream: usize, vocab: usize) -> Result<Tensor> {
    let mut data = vec![0.0; words.len() * vocab];
    for (r, w) in words.iter().enumerate() {
        let idx = w[stream];
        if idx >= vocab {
            return Err(Error::IndexOutOfRange { index: idx, len: vocab });
        }
        data[r * vocab + idx] = 1.0;
    }
    Tensor::matrix(words.len(), vocab, data)
}

fn condition_rows(rows: &[DenseCondition]) -> Result<Tensor> {
    let dim = rows.first().map_or(0, |r| r.len());
    Tensor::matrix(rows.len(), dim, rows.iter().flatten().copied().collect())
}

/// One step of the network for a batch; returns a probability matrix per stream.
pub fn forward_step(
    tape: &mut Tape<'_>,
    params: &ModelParams,
    input: StepInput<'_>,
    state: &mut ModelState,
    mode: &mut RunMode<'_>,
) -> Result<Vec<Var>> {
    let batch = input.prev_words.len();
    if batch == 0 || input.pre.len() != batch || input.post.len() != batch {
        return Err(Error::shape("forward_step", &[batch], &[input.pre.len(), input.post.len()]));
    }
    let rate = params.config.dropout;
    let pre = tape.constant(condition_rows(input.pre)?);
    let post = tape.constant(condition_rows(input.post)?);
    let pre_h = linear_forward(tape, &params.pre_ff, pre)?;
    let pre_h = mode.drop(tape, pre_h, DropoutSite::PreFfOutput, rate)?;
    let post_h = linear_forward(tape, &params.post_ff, post)?;
    let post_h = mode.drop(tape, post_h, DropoutSite::PostFfOutput, rate)?;

    let mut outputs = Vec::with_capacity(params.streams.len());
    for (block, stream_state) in params.streams.iter().zip(state.streams.iter_mut()) {
        let s = block.stream;
        let vocab = params.config.vocab_sizes[s.index()];
        let words = tape.constant(one_hot_rows(input.prev_words, s.index(), vocab)?);
        let x = tape.concat(&[words, pre_h])?;
        if let Some(trace) = mode.trace.as_deref_mut() {
            trace.extend((0..block.lstm.len()).map(|layer| DropoutRecord {
                site: DropoutSite::LstmInput { stream: s, layer },
                rate,
            }));
        }
        let h = stacked_lstm_step(tape, &block.lstm, x, stream_state, rate, mode.training, &mut *mode.rng)?;
        let h = mode.drop(tape, h, DropoutSite::LstmOutput { stream: s }, rate)?;
        let merged = tape.concat(&[h, post_h])?;
        let logits = linear_forward(tape, &block.head, merged)?;
        outputs.push(tape.softmax_rows(logits)?);
    }
    Ok(outputs)
}

/// A contiguous run of steps `[start, start + len)` of one piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slice {
    pub piece: usize,
    pub start: usize,
    pub len: usize,
}

/// Cuts every piece (in the given order) into consecutive slices of at most `seq_len` steps.
pub fn cut_slices(corpus: &[EncodedSequence], order: &[usize], seq_len: usize) -> Vec<Slice> {
    let mut slices = Vec::new();
    for &piece in order {
        let n = corpus[piece].len();
        let mut start = 0;
        while start < n {
            let len = seq_len.min(n - start);
            slices.push(Slice { piece, start, len });
            start += len;
        }
    }
    slices
}

/// Unrolls a batch of slices from zero state under teacher forcing.
///
/// Returns the loss node (mean over valid steps of the summed stream
/// cross-entropies), the number of valid steps, and, if requested, the
/// per-step probability rows for evaluation.
pub fn batch_loss(
    tape: &mut Tape<'_>,
    params: &ModelParams,
    corpus: &[EncodedSequence],
    slices: &[Slice],
    mode: &mut RunMode<'_>,
    mut on_step: Option<&mut dyn FnMut(&Tape<'_>, usize, &[Var])>,
) -> Result<(Var, usize)> {
    if slices.is_empty() {
        return Err(Error::Empty("batch slices"));
    }
    let steps = slices.iter().map(|s| s.len).max().unwrap_or(0);
    let valid: usize = slices.iter().map(|s| s.len).sum();
    if valid == 0 {
        return Err(Error::Empty("batch steps"));
    }
    let weight = 1.0 / valid as f64;
    let batch = slices.len();
    let mut state = ModelState::zeros(tape, params, batch);
    let mut total: Option<Var> = None;

    let zero = [0.0; crate::encoding::condition::CONDITION_DIM];
    let mut prev = vec![[0usize; 3]; batch];
    let mut pre = vec![zero; batch];
    let mut post = vec![zero; batch];
    let mut targets = vec![vec![0usize; batch]; 3];
    let mut weights = vec![0.0; batch];
    for t in 0..steps {
        for (r, s) in slices.iter().enumerate() {
            let seq = &corpus[s.piece];
            if t < s.len {
                let step = s.start + t;
                prev[r] = seq.input_words(step);
                pre[r] = seq.pre[step];
                post[r] = seq.post[step];
                let tw = seq.targets(step);
                for k in 0..3 {
                    targets[k][r] = tw[k];
                }
                weights[r] = weight;
            } else {
                prev[r] = [0; 3];
                pre[r] = zero;
                post[r] = zero;
                for tk in targets.iter_mut() {
                    tk[r] = 0;
                }
                weights[r] = 0.0;
            }
        }
        let input = StepInput {
            prev_words: &prev,
            pre: &pre,
            post: &post,
        };
        let probs = forward_step(tape, params, input, &mut state, mode)?;
        if let Some(cb) = on_step.as_deref_mut() {
            cb(tape, t, &probs);
        }
        for (k, &p) in probs.iter().enumerate() {
            let nll = tape.nll(p, &targets[k], &weights)?;
            total = Some(match total {
                Some(acc) => tape.add(acc, nll)?,
                None => nll,
            });
        }
    }
    Ok((total.expect("at least one step"), valid))
}

/// Teacher-forced mean per-step loss of one slice of `seq`.
pub fn sequence_loss(
    params: &ModelParams,
    seq: &EncodedSequence,
    start: usize,
    len: usize,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if len == 0 || start + len > seq.len() {
        return Err(Error::InvalidArgument(format!(
            "slice {start}..{} of a {}-step sequence",
            start + len,
            seq.len()
        )));
    }
    let corpus = std::slice::from_ref(seq);
    let mut tape = Tape::new(&params.store);
    let mut mode = RunMode::new(training, rng);
    let slice = Slice { piece: 0, start, len };
    let (loss, _) = batch_loss(&mut tape, params, corpus, &[slice], &mut mode, None)?;
    Ok(tape.value(loss).data()[0])
}

/// Teacher-forced loss and argmax accuracy over a corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss_per_step: f64,
    /// Fraction of (step, stream) predictions whose argmax equals the target.
    pub accuracy: f64,
    pub steps: usize,
}

/// Evaluates in inference mode over the same slicing as training.
pub fn evaluate(params: &ModelParams, corpus: &[EncodedSequence]) -> Result<Evaluation> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let order: Vec<usize> = (0..corpus.len()).collect();
    let slices = cut_slices(corpus, &order, params.config.seq_len);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let mut loss_sum = 0.0;
    let mut steps = 0;
    let mut correct = 0usize;
    for batch in slices.chunks(params.config.batch_size) {
        let mut tape = Tape::new(&params.store);
        let mut mode = RunMode::new(false, &mut rng);
        let mut hits = 0usize;
        let mut count_hits = |tape: &Tape<'_>, t: usize, probs: &[Var]| {
            for (r, s) in batch.iter().enumerate() {
                if t >= s.len {
                    continue;
                }
                let target = corpus[s.piece].targets(s.start + t);
                for (k, &p) in probs.iter().enumerate() {
                    if argmax(tape.value(p).row(r)) == target[k] {
                        hits += 1;
                    }
                }
            }
        };
        let (loss, valid) = batch_loss(&mut tape, params, corpus, batch, &mut mode, Some(&mut count_hits))?;
        loss_sum += tape.value(loss).data()[0] * valid as f64;
        steps += valid;
        correct += hits;
    }
    Ok(Evaluation {
        loss_per_step: loss_sum / steps as f64,
        accuracy: correct as f64 / (3 * steps) as f64,
        steps,
    })
}

/// Central finite differences against the teacher-forced loss of one slice,
/// with dropout off.
pub fn sequence_gradcheck(params: &mut ModelParams, seq: &EncodedSequence, start: usize, len: usize, h: f64) -> Result<GradCheckReport> {
    if len == 0 || start + len > seq.len() {
        return Err(Error::InvalidArgument(format!("slice {start}..{} of a {}-step sequence", start + len, seq.len())));
    }
    let layout = params.clone();
    let corpus = std::slice::from_ref(seq);
    let slice = [Slice { piece: 0, start, len }];
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    finite_diff_check(&mut params.store, h, |tape| {
        let mut mode = RunMode::new(false, &mut rng);
        Ok(batch_loss(tape, &layout, corpus, &slice, &mut mode, None)?.0)
    })
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}
