//! Quantization of songs onto a global sixteenth-note step grid.

use super::song::{Bar, DrumEvent, NoteEvent, Song};
use super::words::Component;
use crate::error::{Error, Result};

/// What a pitched instrument does at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoiceState {
    Rest,
    Hold,
    /// A note starts here; carries the lowest pitch sounding at the step.
    Onset { lowest_pitch: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBar {
    pub bar: Bar,
    pub start: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepGrid {
    pub title: String,
    pub bars: Vec<GridBar>,
    pub guitar: Vec<VoiceState>,
    pub bass: Vec<VoiceState>,
    /// Component bitmask per step, bit = [`Component::index`].
    pub drums: Vec<u16>,
    step_bar: Vec<usize>,
}

/// Nearest integer step; exact halves round down.
pub fn snap(x: f64) -> i64 {
    (x - 0.5).ceil() as i64
}

impl StepGrid {
    pub fn len(&self) -> usize {
        self.drums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drums.is_empty()
    }

    /// Bar index and position inside the bar of global step `t`.
    pub fn locate(&self, t: usize) -> Result<(usize, usize)> {
        let b = *self
            .step_bar
            .get(t)
            .ok_or(Error::IndexOutOfRange { index: t, len: self.len() })?;
        Ok((b, t - self.bars[b].start))
    }

    pub fn steps_per_bar(&self) -> Vec<usize> {
        self.bars.iter().map(|b| b.steps).collect()
    }

    /// The drum masks of bar `b`.
    pub fn bar_drums(&self, b: usize) -> &[u16] {
        let gb = &self.bars[b];
        &self.drums[gb.start..gb.start + gb.steps]
    }
}

fn place(step: f64, total: usize, what: &str) -> Result<usize> {
    let s = snap(step);
    if s < 0 || s as usize >= total {
        return Err(Error::InvalidArgument(format!(
            "{what} at step {step} lies outside the {total}-step grid"
        )));
    }
    Ok(s as usize)
}

fn voice_track(notes: &[NoteEvent], total: usize, what: &str) -> Result<Vec<VoiceState>> {
    let mut lowest: Vec<Option<u8>> = vec![None; total];
    let mut onset = vec![false; total];
    for n in notes {
        if n.pitch > 127 {
            return Err(Error::InvalidArgument(format!("{what} pitch {} outside [0, 127]", n.pitch)));
        }
        let start = place(n.onset, total, what)?;
        let dur = snap(n.duration).max(1) as usize;
        onset[start] = true;
        for slot in &mut lowest[start..(start + dur).min(total)] {
            *slot = Some(slot.map_or(n.pitch, |p| p.min(n.pitch)));
        }
    }
    Ok(lowest
        .into_iter()
        .zip(onset)
        .map(|(low, on)| match (low, on) {
            (Some(p), true) => VoiceState::Onset { lowest_pitch: p },
            (Some(_), false) => VoiceState::Hold,
            (None, _) => VoiceState::Rest,
        })
        .collect())
}

pub fn quantize_song(song: &Song) -> Result<StepGrid> {
    if song.bars.is_empty() {
        return Err(Error::Empty("song bars"));
    }
    let mut bars = Vec::with_capacity(song.bars.len());
    let mut step_bar = Vec::new();
    let mut start = 0;
    for (i, bar) in song.bars.iter().enumerate() {
        bar.validate()?;
        let steps = bar.steps()?;
        bars.push(GridBar { bar: *bar, start, steps });
        step_bar.extend(std::iter::repeat_n(i, steps));
        start += steps;
    }
    let total = start;
    let mut drums = vec![0u16; total];
    for ev in &song.drums {
        let s = place(ev.step, total, ev.component.name())?;
        drums[s] |= 1 << ev.component.index();
    }
    Ok(StepGrid {
        title: song.title.clone(),
        bars,
        guitar: voice_track(&song.guitar, total, "guitar")?,
        bass: voice_track(&song.bass, total, "bass")?,
        drums,
        step_bar,
    })
}

/// Drum events for per-step component masks, ordered by step then component.
pub fn drum_events(masks: &[u16]) -> Vec<DrumEvent> {
    masks
        .iter()
        .enumerate()
        .flat_map(|(step, &mask)| {
            Component::ALL
                .into_iter()
                .filter(move |c| mask & (1 << c.index()) != 0)
                .map(move |component| DrumEvent {
                    step: step as f64,
                    component,
                })
        })
        .collect()
}
