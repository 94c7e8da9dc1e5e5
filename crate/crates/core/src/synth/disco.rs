use super::{OnsetProbabilities, StepContext, Style};
use crate::encoding::words::Component;

/// Four-on-the-floor: kick on every beat, snare on 2 and 4, open hat on
/// the off-eighths, closed hat elsewhere on eighths, crash on phrase starts.
#[derive(Debug, Clone, Copy, Default)]
pub struct Disco;

impl Style for Disco {
    fn name(&self) -> &str {
        "disco"
    }

    fn onset_probabilities(&self, ctx: &StepContext<'_>) -> OnsetProbabilities {
        let mut p = [0.0; 9];
        let beat = ctx.beat();
        if beat.is_some() {
            p[Component::Kick.index()] = 1.0;
            p[Component::ClosedHat.index()] = 1.0;
        }
        if matches!(beat, Some(2 | 4)) {
            p[Component::Snare.index()] = 1.0;
        }
        if beat.is_none() && ctx.position.is_multiple_of(2) {
            p[Component::OpenHat.index()] = 1.0;
        }
        if ctx.position == 0 && ctx.bar.phrase == crate::encoding::song::PhraseMark::Start {
            p[Component::Crash.index()] = 1.0;
        }
        p
    }
}
