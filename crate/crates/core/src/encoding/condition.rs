//! One-hot condition vectors describing guitar, bass, meter, tempo and
//! phrase position at a single step.

use super::grid::{StepGrid, VoiceState};
use super::song::PhraseMark;
use crate::error::{Error, Result};

pub const CONDITION_DIM: usize = 31;

pub const GUITAR_BLOCK: std::ops::Range<usize> = 0..5;
pub const BASS_BLOCK: std::ops::Range<usize> = 5..10;
pub const METRIC_BLOCK: std::ops::Range<usize> = 10..14;
pub const SIGNATURE_BLOCK: std::ops::Range<usize> = 14..23;
pub const TEMPO_BLOCK: std::ops::Range<usize> = 23..28;
pub const GROUPING_BLOCK: std::ops::Range<usize> = 28..31;

pub const BLOCKS: [std::ops::Range<usize>; 6] = [
    GUITAR_BLOCK,
    BASS_BLOCK,
    METRIC_BLOCK,
    SIGNATURE_BLOCK,
    TEMPO_BLOCK,
    GROUPING_BLOCK,
];

/// Time signatures with a slot in the signature block.
pub const SIGNATURES: [(u32, u32); 9] = [(2, 4), (3, 4), (4, 4), (5, 4), (6, 8), (7, 8), (3, 8), (9, 8), (12, 8)];

/// Lower bounds (BPM) of tempo classes 1..5; class 0 is everything below 70.
pub const TEMPO_EDGES: [f64; 4] = [70.0, 90.0, 110.0, 140.0];

pub type DenseCondition = [f64; CONDITION_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoteClass {
    Rest,
    Hold,
    OnsetLow,
    OnsetMid,
    OnsetHigh,
}

impl NoteClass {
    fn from_state(state: VoiceState, low_below: u8, mid_below: u8) -> Self {
        match state {
            VoiceState::Rest => NoteClass::Rest,
            VoiceState::Hold => NoteClass::Hold,
            VoiceState::Onset { lowest_pitch } if lowest_pitch < low_below => NoteClass::OnsetLow,
            VoiceState::Onset { lowest_pitch } if lowest_pitch < mid_below => NoteClass::OnsetMid,
            VoiceState::Onset { .. } => NoteClass::OnsetHigh,
        }
    }

    pub fn bass(state: VoiceState) -> Self {
        Self::from_state(state, 40, 49)
    }

    pub fn guitar(state: VoiceState) -> Self {
        Self::from_state(state, 52, 65)
    }

    pub fn is_onset(self) -> bool {
        matches!(self, NoteClass::OnsetLow | NoteClass::OnsetMid | NoteClass::OnsetHigh)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Position class inside a bar, from quarter-note and eighth-note boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricClass {
    Downbeat,
    OnBeat,
    HalfBeat,
    Offbeat,
}

impl MetricClass {
    pub fn at(position: usize) -> Self {
        if position == 0 {
            MetricClass::Downbeat
        } else if position.is_multiple_of(4) {
            MetricClass::OnBeat
        } else if position.is_multiple_of(2) {
            MetricClass::HalfBeat
        } else {
            MetricClass::Offbeat
        }
    }

    /// Metrical weight: 0 for the downbeat down to −3 for sixteenth offbeats.
    pub fn weight(self) -> i32 {
        -(self as i32)
    }

    pub fn is_weak(self) -> bool {
        matches!(self, MetricClass::HalfBeat | MetricClass::Offbeat)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

pub fn signature_index(numerator: u32, denominator: u32) -> Result<usize> {
    SIGNATURES
        .iter()
        .position(|&s| s == (numerator, denominator))
        .ok_or(Error::UnsupportedMeter {
            num: numerator,
            den: denominator,
        })
}

pub fn tempo_class(bpm: f64) -> usize {
    TEMPO_EDGES.iter().filter(|&&edge| bpm >= edge).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConditionVector {
    pub guitar: NoteClass,
    pub bass: NoteClass,
    pub metric: MetricClass,
    pub signature: usize,
    pub tempo: usize,
    pub grouping: PhraseMark,
}

impl ConditionVector {
    pub fn to_dense(&self) -> DenseCondition {
        let mut v = [0.0; CONDITION_DIM];
        v[GUITAR_BLOCK.start + self.guitar.index()] = 1.0;
        v[BASS_BLOCK.start + self.bass.index()] = 1.0;
        v[METRIC_BLOCK.start + self.metric.index()] = 1.0;
        v[SIGNATURE_BLOCK.start + self.signature] = 1.0;
        v[TEMPO_BLOCK.start + self.tempo] = 1.0;
        v[GROUPING_BLOCK.start + self.grouping.index()] = 1.0;
        v
    }
}

pub fn encode_condition(grid: &StepGrid, t: usize) -> Result<ConditionVector> {
    let (b, position) = grid.locate(t)?;
    let bar = grid.bars[b].bar;
    Ok(ConditionVector {
        guitar: NoteClass::guitar(grid.guitar[t]),
        bass: NoteClass::bass(grid.bass[t]),
        metric: MetricClass::at(position),
        signature: signature_index(bar.numerator, bar.denominator)?,
        tempo: tempo_class(bar.tempo_bpm),
        grouping: bar.phrase,
    })
}

/// Sum of each one-hot block of a dense (possibly windowed) vector.
pub fn block_sums(v: &DenseCondition) -> [f64; 6] {
    let mut sums = [0.0; 6];
    for (s, block) in sums.iter_mut().zip(BLOCKS) {
        *s = v[block].iter().sum();
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::grid::quantize_song;
    use crate::encoding::song::{Bar, NoteEvent, Song};

    fn grid(bar: Bar, bass: Vec<NoteEvent>) -> StepGrid {
        quantize_song(&Song {
            title: "c".into(),
            bars: vec![bar],
            guitar: vec![],
            bass,
            drums: vec![],
        })
        .unwrap()
    }

    #[test]
    fn blocks_tile_the_vector() {
        let mut next = 0;
        for b in BLOCKS {
            assert_eq!(b.start, next);
            next = b.end;
        }
        assert_eq!(next, CONDITION_DIM);
    }

    #[test]
    fn silent_downbeat() {
        let g = grid(Bar::new(4, 4, 120.0, PhraseMark::Mid), vec![]);
        let c = encode_condition(&g, 0).unwrap();
        assert_eq!(
            c,
            ConditionVector {
                guitar: NoteClass::Rest,
                bass: NoteClass::Rest,
                metric: MetricClass::Downbeat,
                signature: 2,
                tempo: 3,
                grouping: PhraseMark::Mid,
            }
        );
        let dense = c.to_dense();
        assert_eq!(dense.iter().sum::<f64>(), 6.0);
        assert_eq!(block_sums(&dense), [1.0; 6]);
        assert!(encode_condition(&g, 16).is_err());
    }

    #[test]
    fn bass_register_classes() {
        let notes = vec![
            NoteEvent { onset: 0.0, duration: 1.0, pitch: 36 },
            NoteEvent { onset: 1.0, duration: 1.0, pitch: 45 },
            NoteEvent { onset: 2.0, duration: 1.0, pitch: 49 },
        ];
        let g = grid(Bar::new(4, 4, 120.0, PhraseMark::Mid), notes);
        assert_eq!(encode_condition(&g, 0).unwrap().bass, NoteClass::OnsetLow);
        assert_eq!(encode_condition(&g, 1).unwrap().bass, NoteClass::OnsetMid);
        assert_eq!(encode_condition(&g, 2).unwrap().bass, NoteClass::OnsetHigh);
        assert_eq!(NoteClass::guitar(VoiceState::Onset { lowest_pitch: 51 }), NoteClass::OnsetLow);
        assert_eq!(NoteClass::guitar(VoiceState::Onset { lowest_pitch: 64 }), NoteClass::OnsetMid);
        assert_eq!(NoteClass::guitar(VoiceState::Onset { lowest_pitch: 65 }), NoteClass::OnsetHigh);
    }

    #[test]
    fn metric_classes_in_four_four() {
        let expected: Vec<MetricClass> = (0..16).map(MetricClass::at).collect();
        for (p, m) in expected.iter().enumerate() {
            let want = match p {
                0 => MetricClass::Downbeat,
                4 | 8 | 12 => MetricClass::OnBeat,
                2 | 6 | 10 | 14 => MetricClass::HalfBeat,
                _ => MetricClass::Offbeat,
            };
            assert_eq!(*m, want, "position {p}");
        }
        assert_eq!(MetricClass::Downbeat.weight(), 0);
        assert_eq!(MetricClass::Offbeat.weight(), -3);
    }

    #[test]
    fn tempo_bins() {
        assert_eq!(tempo_class(60.0), 0);
        assert_eq!(tempo_class(70.0), 1);
        assert_eq!(tempo_class(89.9), 1);
        assert_eq!(tempo_class(90.0), 2);
        assert_eq!(tempo_class(110.0), 3);
        assert_eq!(tempo_class(139.99), 3);
        assert_eq!(tempo_class(140.0), 4);
    }

    #[test]
    fn signature_slots() {
        assert_eq!(signature_index(3, 8).unwrap(), 6);
        assert_eq!(signature_index(9, 8).unwrap(), 7);
        assert!(signature_index(5, 8).is_err());
    }
}
