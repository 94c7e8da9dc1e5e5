//! Multi-track symbolic songs and their JSON file format.
//!
//! ```json
//! {"title": "demo",
//!  "bars": [{"num": 4, "den": 4, "bpm": 120, "phrase": "start"}],
//!  "guitar": [[0, 16, 52]], "bass": [[0, 8, 36]],
//!  "drums": [[0, "kick"], [4, "snare"]]}
//! ```
//!
//! Event steps are global sixteenth-note positions and may be fractional;
//! quantization snaps them onto the grid.

use std::fmt;
use std::path::Path;

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::words::Component;
use crate::error::{Error, Result};
use crate::fsio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhraseMark {
    Start,
    Mid,
    End,
}

impl PhraseMark {
    pub const ALL: [PhraseMark; 3] = [PhraseMark::Start, PhraseMark::Mid, PhraseMark::End];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    #[serde(rename = "num")]
    pub numerator: u32,
    #[serde(rename = "den")]
    pub denominator: u32,
    #[serde(rename = "bpm")]
    pub tempo_bpm: f64,
    pub phrase: PhraseMark,
}

impl Bar {
    pub fn new(numerator: u32, denominator: u32, tempo_bpm: f64, phrase: PhraseMark) -> Self {
        Self {
            numerator,
            denominator,
            tempo_bpm,
            phrase,
        }
    }

    /// Sixteenth-note steps in the bar, `numerator × 16 / denominator`.
    pub fn steps(&self) -> Result<usize> {
        if !matches!(self.denominator, 2 | 4 | 8 | 16) || self.numerator == 0 {
            return Err(Error::UnsupportedMeter {
                num: self.numerator,
                den: self.denominator,
            });
        }
        Ok((self.numerator * 16 / self.denominator) as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps()?;
        if !(self.tempo_bpm.is_finite() && self.tempo_bpm > 0.0) {
            return Err(Error::InvalidArgument(format!("tempo must be positive, got {}", self.tempo_bpm)));
        }
        Ok(())
    }
}

/// A pitched note: onset and duration in sixteenth steps, MIDI pitch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoteEvent {
    pub onset: f64,
    pub duration: f64,
    pub pitch: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrumEvent {
    pub step: f64,
    pub component: Component,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Song {
    pub title: String,
    pub bars: Vec<Bar>,
    #[serde(default)]
    pub guitar: Vec<NoteEvent>,
    #[serde(default)]
    pub bass: Vec<NoteEvent>,
    #[serde(default)]
    pub drums: Vec<DrumEvent>,
}

impl Song {
    pub fn total_steps(&self) -> Result<usize> {
        self.bars.iter().map(Bar::steps).sum()
    }

    pub fn without_drums(&self) -> Song {
        Song {
            drums: Vec::new(),
            ..self.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Song> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("songs serialize")
    }

    pub fn load(path: &Path) -> Result<Song> {
        let bytes = fsio::read(path)?;
        serde_json::from_slice(&bytes).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        fsio::write_atomic(path, text.as_bytes())
    }
}

fn serialize_step<S: SerializeTuple>(tup: &mut S, x: f64) -> std::result::Result<(), S::Error> {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        tup.serialize_element(&(x as i64))
    } else {
        tup.serialize_element(&x)
    }
}

impl Serialize for NoteEvent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(3)?;
        serialize_step(&mut tup, self.onset)?;
        serialize_step(&mut tup, self.duration)?;
        tup.serialize_element(&self.pitch)?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for NoteEvent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = NoteEvent;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("[step, duration, pitch]")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<NoteEvent, A::Error> {
                let onset = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let duration = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let pitch = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(2, &self))?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(4, &self));
                }
                Ok(NoteEvent { onset, duration, pitch })
            }
        }
        deserializer.deserialize_tuple(3, V)
    }
}

impl Serialize for DrumEvent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(2)?;
        serialize_step(&mut tup, self.step)?;
        tup.serialize_element(&self.component)?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for DrumEvent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = DrumEvent;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("[step, component-name]")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<DrumEvent, A::Error> {
                let step = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let component = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(DrumEvent { step, component })
            }
        }
        deserializer.deserialize_tuple(2, V)
    }
}
