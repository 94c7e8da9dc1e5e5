use super::{OnsetProbabilities, StepContext, Style};
use crate::encoding::song::PhraseMark;
use crate::encoding::words::Component;

/// Probability of a ghost snare on a free half-beat in mid-phrase bars.
pub const GHOST_SNARE: f64 = 0.15;
/// Probability of an extra kick on a free half-beat in mid-phrase bars.
pub const EXTRA_KICK: f64 = 0.25;
/// Probability that the last eighth of a mid-phrase bar opens the hi-hat.
pub const OPEN_HAT: f64 = 0.2;
/// Tempo class from which the closed hi-hat plays sixteenths (110 BPM and up).
pub const SIXTEENTH_HATS_FROM: usize = 3;

/// Backbeat rock: kick on beats 1 and 3, snare on 2 and 4, hi-hat pulse,
/// crash on phrase starts and a three-tom fill closing each phrase.
#[derive(Debug, Clone, Copy, Default)]
pub struct SynthRock;

impl Style for SynthRock {
    fn name(&self) -> &str {
        "synthrock"
    }

    fn onset_probabilities(&self, ctx: &StepContext<'_>) -> OnsetProbabilities {
        let mut p = [0.0; 9];
        let pos = ctx.position;
        let n = ctx.steps;
        let beat = ctx.beat();
        let last_beat = ctx.beats.len();
        let mut set = |c: Component, v: f64| p[c.index()] = v;

        let kick = matches!(beat, Some(1 | 3));
        let snare = match beat {
            Some(2 | 4) => true,
            Some(b) => last_beat < 4 && b == last_beat,
            None => false,
        };
        if kick {
            set(Component::Kick, 1.0);
        }
        if snare {
            set(Component::Snare, 1.0);
        }
        let hat_every = if ctx.tempo_class >= SIXTEENTH_HATS_FROM { 1 } else { 2 };
        if pos.is_multiple_of(hat_every) {
            set(Component::ClosedHat, 1.0);
        }
        match ctx.bar.phrase {
            PhraseMark::Start if pos == 0 => set(Component::Crash, 1.0),
            PhraseMark::End if n >= 6 => {
                if pos == n - 6 {
                    set(Component::TomHi, 1.0);
                } else if pos == n - 4 {
                    set(Component::TomMid, 1.0);
                } else if pos == n - 2 {
                    set(Component::TomLo, 1.0);
                }
            }
            PhraseMark::Mid => {
                let free = beat.is_none() && pos % 4 == 2;
                if free {
                    set(Component::Snare, GHOST_SNARE);
                    set(Component::Kick, EXTRA_KICK);
                }
                if n >= 2 && pos == n - 2 {
                    set(Component::OpenHat, OPEN_HAT);
                    set(Component::ClosedHat, 0.0);
                }
            }
            _ => {}
        }
        p
    }
}
