//! Symbolic songs, grid quantization, drum words and condition encodings.

pub mod condition;
pub mod grid;
pub mod sequence;
pub mod song;
pub mod words;

pub use condition::{encode_condition, ConditionVector, DenseCondition, MetricClass, NoteClass, CONDITION_DIM};
pub use grid::{quantize_song, StepGrid, VoiceState};
pub use sequence::{encode_sequence, encode_song, window_post, window_pre, with_drum_words, EncodedSequence};
pub use song::{Bar, DrumEvent, NoteEvent, PhraseMark, Song};
pub use words::{drum_word_index, Component, Stream, WordTriple, SILENCE, VOCAB_SIZES};
