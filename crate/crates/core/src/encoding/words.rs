//! Drum components and the three per-stream word vocabularies.
//!
//! A drum word is the set of components of one stream sounding at a step,
//! encoded as a bitmask: bit `i` is set iff the stream's `i`-th component
//! sounds. Every subset is a word, so stream vocabularies are `2^k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Kick,
    Snare,
    #[serde(rename = "chh")]
    ClosedHat,
    #[serde(rename = "ohh")]
    OpenHat,
    Ride,
    Crash,
    TomHi,
    TomMid,
    TomLo,
}

impl Component {
    pub const ALL: [Component; 9] = [
        Component::Kick,
        Component::Snare,
        Component::ClosedHat,
        Component::OpenHat,
        Component::Ride,
        Component::Crash,
        Component::TomHi,
        Component::TomMid,
        Component::TomLo,
    ];

    /// Position in [`Component::ALL`]; used as the grid bit.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Kick => "kick",
            Component::Snare => "snare",
            Component::ClosedHat => "chh",
            Component::OpenHat => "ohh",
            Component::Ride => "ride",
            Component::Crash => "crash",
            Component::TomHi => "tom_hi",
            Component::TomMid => "tom_mid",
            Component::TomLo => "tom_lo",
        }
    }

    pub fn stream(self) -> Stream {
        match self {
            Component::Kick | Component::Snare => Stream::Backbone,
            Component::ClosedHat | Component::OpenHat | Component::Ride => Stream::Timekeeping,
            Component::Crash | Component::TomHi | Component::TomMid | Component::TomLo => Stream::Accents,
        }
    }

    /// Bit position inside the component's stream word.
    pub fn bit(self) -> usize {
        self.stream()
            .components()
            .iter()
            .position(|&c| c == self)
            .expect("component listed in its stream")
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownComponent(s.to_string()))
    }
}

/// The three drum input spaces: kick/snare, hats/ride, crash/toms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    Backbone,
    Timekeeping,
    Accents,
}

impl Stream {
    pub const ALL: [Stream; 3] = [Stream::Backbone, Stream::Timekeeping, Stream::Accents];

    pub fn components(self) -> &'static [Component] {
        match self {
            Stream::Backbone => &[Component::Kick, Component::Snare],
            Stream::Timekeeping => &[Component::ClosedHat, Component::OpenHat, Component::Ride],
            Stream::Accents => &[Component::Crash, Component::TomHi, Component::TomMid, Component::TomLo],
        }
    }

    pub fn vocab_size(self) -> usize {
        1 << self.components().len()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Stream::Backbone => "K",
            Stream::Timekeeping => "H",
            Stream::Accents => "T",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Vocabulary sizes in stream order.
pub const VOCAB_SIZES: [usize; 3] = [4, 8, 16];

/// One word per stream at a single step.
pub type WordTriple = [usize; 3];

pub const SILENCE: WordTriple = [0, 0, 0];

pub fn drum_word_index(stream: Stream, active: &[Component]) -> Result<usize> {
    let mut index = 0;
    for &c in active {
        if c.stream() != stream {
            return Err(Error::ForeignComponent {
                component: c.name(),
                stream: stream.label(),
            });
        }
        index |= 1 << c.bit();
    }
    Ok(index)
}

/// Components encoded by `index` in `stream`, in bit order.
pub fn word_components(stream: Stream, index: usize) -> Result<Vec<Component>> {
    if index >= stream.vocab_size() {
        return Err(Error::IndexOutOfRange {
            index,
            len: stream.vocab_size(),
        });
    }
    Ok(stream
        .components()
        .iter()
        .enumerate()
        .filter(|(bit, _)| index & (1 << bit) != 0)
        .map(|(_, &c)| c)
        .collect())
}

/// Splits a 9-bit component mask (bit = [`Component::index`]) into stream words.
pub fn words_from_mask(mask: u16) -> WordTriple {
    let mut words = SILENCE;
    for c in Component::ALL {
        if mask & (1 << c.index()) != 0 {
            words[c.stream().index()] |= 1 << c.bit();
        }
    }
    words
}

/// Inverse of [`words_from_mask`].
pub fn mask_from_words(words: WordTriple) -> u16 {
    let mut mask = 0u16;
    for stream in Stream::ALL {
        for (bit, c) in stream.components().iter().enumerate() {
            if words[stream.index()] & (1 << bit) != 0 {
                mask |= 1 << c.index();
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn word_examples() {
        assert_eq!(drum_word_index(Stream::Backbone, &[]).unwrap(), 0);
        assert_eq!(drum_word_index(Stream::Backbone, &[Component::Kick, Component::Snare]).unwrap(), 3);
        assert_eq!(drum_word_index(Stream::Accents, &[Component::Crash, Component::TomLo]).unwrap(), 9);
        assert!(matches!(
            drum_word_index(Stream::Backbone, &[Component::Ride]),
            Err(Error::ForeignComponent { .. })
        ));
    }

    #[test]
    fn vocab_sizes_match_streams() {
        for s in Stream::ALL {
            assert_eq!(s.vocab_size(), VOCAB_SIZES[s.index()]);
        }
    }

    #[test]
    fn names_round_trip() {
        for c in Component::ALL {
            assert_eq!(c.name().parse::<Component>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.name()));
        }
        assert!("cowbell".parse::<Component>().is_err());
    }

    #[test]
    fn word_index_is_a_bijection_per_stream() {
        for s in Stream::ALL {
            let mut seen = vec![false; s.vocab_size()];
            for idx in 0..s.vocab_size() {
                let comps = word_components(s, idx).unwrap();
                assert_eq!(drum_word_index(s, &comps).unwrap(), idx);
                seen[idx] = true;
            }
            assert!(seen.into_iter().all(|x| x));
            assert!(word_components(s, s.vocab_size()).is_err());
        }
    }

    proptest! {
        #[test]
        fn mask_words_round_trip(mask in 0u16..512) {
            prop_assert_eq!(mask_from_words(words_from_mask(mask)), mask);
        }
    }
}
