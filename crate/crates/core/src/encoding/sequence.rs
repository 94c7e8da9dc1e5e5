//! Per-step training sequences: drum words, condition vectors and their
//! past / current-and-future window sums.

use super::condition::{encode_condition, ConditionVector, DenseCondition, CONDITION_DIM};
use super::grid::{drum_events, quantize_song, StepGrid};
use super::song::{DrumEvent, Song};
use super::words::{mask_from_words, words_from_mask, WordTriple, SILENCE};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_PAST: usize = 4;
pub const DEFAULT_WINDOW_FUTURE: usize = 4;

/// Sum of `conditions[t-w_p .. t]`, zero for steps before the start.
pub fn window_pre(conditions: &[DenseCondition], t: usize, w_p: usize) -> DenseCondition {
    let mut out = [0.0; CONDITION_DIM];
    for c in &conditions[t.saturating_sub(w_p)..t.min(conditions.len())] {
        for (o, x) in out.iter_mut().zip(c) {
            *o += x;
        }
    }
    out
}

/// Sum of `conditions[t ..= t+w_f]`, zero past the end.
pub fn window_post(conditions: &[DenseCondition], t: usize, w_f: usize) -> DenseCondition {
    let mut out = [0.0; CONDITION_DIM];
    let end = (t + w_f + 1).min(conditions.len());
    for c in &conditions[t.min(end)..end] {
        for (o, x) in out.iter_mut().zip(c) {
            *o += x;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub title: String,
    pub conditions: Vec<ConditionVector>,
    /// Drum words sounding at each step; the prediction targets.
    pub words: Vec<WordTriple>,
    pub pre: Vec<DenseCondition>,
    pub post: Vec<DenseCondition>,
    pub steps_per_bar: Vec<usize>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words fed as input at step `t`: the previous step's words, silence at 0.
    pub fn input_words(&self, t: usize) -> WordTriple {
        if t == 0 {
            SILENCE
        } else {
            self.words[t - 1]
        }
    }

    pub fn targets(&self, t: usize) -> WordTriple {
        self.words[t]
    }

    pub fn drum_events(&self) -> Vec<DrumEvent> {
        let masks: Vec<u16> = self.words.iter().map(|&w| mask_from_words(w)).collect();
        drum_events(&masks)
    }
}

/// Dense condition vectors for every step of a grid.
pub fn encode_conditions(grid: &StepGrid) -> Result<Vec<ConditionVector>> {
    (0..grid.len()).map(|t| encode_condition(grid, t)).collect()
}

pub fn encode_sequence(grid: &StepGrid, w_p: usize, w_f: usize) -> Result<EncodedSequence> {
    if grid.is_empty() {
        return Err(Error::Empty("step grid"));
    }
    let conditions = encode_conditions(grid)?;
    let dense: Vec<DenseCondition> = conditions.iter().map(ConditionVector::to_dense).collect();
    Ok(EncodedSequence {
        title: grid.title.clone(),
        words: grid.drums.iter().map(|&m| words_from_mask(m)).collect(),
        pre: (0..dense.len()).map(|t| window_pre(&dense, t, w_p)).collect(),
        post: (0..dense.len()).map(|t| window_post(&dense, t, w_f)).collect(),
        conditions,
        steps_per_bar: grid.steps_per_bar(),
    })
}

pub fn encode_song(song: &Song, w_p: usize, w_f: usize) -> Result<EncodedSequence> {
    encode_sequence(&quantize_song(song)?, w_p, w_f)
}

/// Replaces the drum track of `song` with the given per-step words.
pub fn with_drum_words(song: &Song, words: &[WordTriple]) -> Song {
    let masks: Vec<u16> = words.iter().map(|&w| mask_from_words(w)).collect();
    Song {
        drums: drum_events(&masks),
        ..song.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::condition::{block_sums, TEMPO_BLOCK};
    use crate::encoding::song::{Bar, PhraseMark};
    use crate::encoding::words::Component;
    use proptest::prelude::*;

    fn silent(bars: Vec<Bar>) -> Song {
        Song {
            title: "s".into(),
            bars,
            guitar: vec![],
            bass: vec![],
            drums: vec![],
        }
    }

    fn four_four(n: usize) -> Vec<Bar> {
        vec![Bar::new(4, 4, 100.0, PhraseMark::Mid); n]
    }

    #[test]
    fn window_examples() {
        let seq = encode_song(&silent(four_four(2)), 4, 4).unwrap();
        let dense: Vec<_> = seq.conditions.iter().map(|c| c.to_dense()).collect();
        assert_eq!(window_pre(&dense, 0, 4), [0.0; CONDITION_DIM]);
        assert_eq!(block_sums(&window_pre(&dense, 2, 4)), [2.0; 6]);
        assert_eq!(block_sums(&window_pre(&dense, 9, 4)), [4.0; 6]);
        assert_eq!(block_sums(&window_post(&dense, 31, 4)), [1.0; 6]);
        assert_eq!(block_sums(&window_post(&dense, 10, 4)), [5.0; 6]);
        assert_eq!(seq.pre[9], window_pre(&dense, 9, 4));
        assert_eq!(seq.post[10], window_post(&dense, 10, 4));
    }

    #[test]
    fn future_tempo_change_only_in_post_window() {
        let mut bars = four_four(2);
        bars[1].tempo_bpm = 150.0;
        let seq = encode_song(&silent(bars), 4, 4).unwrap();
        let t = 14;
        let fast = TEMPO_BLOCK.start + 4;
        assert!(seq.post[t][fast] > 0.0);
        assert_eq!(seq.pre[t][fast], 0.0);
    }

    #[test]
    fn silent_bar_encodes_to_silence() {
        let seq = encode_song(&silent(four_four(1)), 4, 4).unwrap();
        assert_eq!(seq.len(), 16);
        assert!(seq.words.iter().all(|&w| w == SILENCE));
        assert_eq!(seq.steps_per_bar, vec![16]);
    }

    #[test]
    fn targets_lead_inputs_by_one_step() {
        let mut song = silent(four_four(2));
        for bar in 0..2 {
            for (p, c) in [(0, Component::Kick), (4, Component::Snare), (8, Component::Kick), (12, Component::Snare)] {
                song.drums.push(DrumEvent { step: (bar * 16 + p) as f64, component: c });
            }
            for p in (0..16).step_by(2) {
                song.drums.push(DrumEvent { step: (bar * 16 + p) as f64, component: Component::ClosedHat });
            }
        }
        let seq = encode_song(&song, 4, 4).unwrap();
        assert_eq!(seq.len(), 32);
        assert_eq!(seq.input_words(0), SILENCE);
        for t in 1..32 {
            assert_eq!(seq.input_words(t), seq.targets(t - 1));
        }
        assert_eq!(seq.targets(0), [1, 1, 0]);
        assert_eq!(seq.targets(4), [2, 1, 0]);
        assert_eq!(seq.targets(1), [0, 0, 0]);
        let mut events = seq.drum_events();
        let mut original = song.drums.clone();
        let key = |e: &DrumEvent| (e.step as i64, e.component);
        events.sort_by_key(key);
        original.sort_by_key(key);
        assert_eq!(events, original);
    }

    #[test]
    fn unseen_meters_encode() {
        let bars = vec![
            Bar::new(3, 8, 100.0, PhraseMark::Start),
            Bar::new(9, 8, 100.0, PhraseMark::End),
        ];
        let seq = encode_song(&silent(bars), 4, 4).unwrap();
        assert_eq!(seq.len(), 24);
    }

    proptest! {
        #[test]
        fn windows_count_real_steps(n_bars in 1usize..4, t_frac in 0.0f64..1.0, wp in 0usize..8, wf in 0usize..8) {
            let seq = encode_song(&silent(four_four(n_bars)), wp, wf).unwrap();
            let t = ((seq.len() as f64 - 1.0) * t_frac) as usize;
            let pre_real = t.min(wp) as f64;
            let post_real = ((t + wf + 1).min(seq.len()) - t) as f64;
            prop_assert_eq!(block_sums(&seq.pre[t]), [pre_real; 6]);
            prop_assert_eq!(block_sums(&seq.post[t]), [post_real; 6]);
            for c in &seq.conditions {
                prop_assert_eq!(c.to_dense().iter().sum::<f64>(), 6.0);
            }
        }
    }
}
