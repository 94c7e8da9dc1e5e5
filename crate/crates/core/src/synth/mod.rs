//! Rule-based style synthesizer for training and evaluation corpora.
//!
//! A [`Style`] maps each step's musical context to per-component onset
//! probabilities. Probabilities of exactly 0 or 1 are the deterministic
//! backbone; anything in between is a stochastic ornament. Bass and guitar
//! parts are derived from the drums so the couplings are known exactly.

mod disco;
mod synthrock;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::condition::{signature_index, tempo_class};
use crate::encoding::song::{Bar, DrumEvent, NoteEvent, PhraseMark, Song};
use crate::encoding::words::Component;
use crate::error::{Error, Result};
use crate::fsio;

pub use disco::Disco;
pub use synthrock::SynthRock;

/// Everything a style may look at when deciding one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext<'a> {
    pub bar: &'a Bar,
    /// Position inside the bar, in sixteenth steps.
    pub position: usize,
    pub steps: usize,
    /// Start positions of the bar's beats.
    pub beats: &'a [usize],
    pub tempo_class: usize,
}

impl StepContext<'_> {
    /// 1-based beat number if the step starts a beat.
    pub fn beat(&self) -> Option<usize> {
        self.beats.iter().position(|&b| b == self.position).map(|i| i + 1)
    }
}

pub type OnsetProbabilities = [f64; 9];

pub trait Style: Send + Sync {
    fn name(&self) -> &str;

    /// Onset probability of each component, indexed by [`Component::index`].
    fn onset_probabilities(&self, ctx: &StepContext<'_>) -> OnsetProbabilities;
}

/// Styles by name.
#[derive(Clone)]
pub struct StyleRegistry {
    styles: BTreeMap<String, Arc<dyn Style>>,
}

impl StyleRegistry {
    pub fn empty() -> Self {
        Self { styles: BTreeMap::new() }
    }

    pub fn register(&mut self, style: Arc<dyn Style>) {
        self.styles.insert(style.name().to_string(), style);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Style>> {
        self.styles
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStyle(format!("{name} (known: {})", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<&str> {
        self.styles.keys().map(String::as_str).collect()
    }
}

impl Default for StyleRegistry {
    /// The built-in styles.
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(SynthRock));
        r.register(Arc::new(Disco));
        r
    }
}

/// Beat start positions: quarter notes in x/4 and x/16, half notes in x/2,
/// dotted quarters in compound x/8, and 2+2+…+3 eighth groups in odd x/8.
pub fn beat_starts(numerator: u32, denominator: u32) -> Result<Vec<usize>> {
    let steps = Bar::new(numerator, denominator, 120.0, PhraseMark::Mid).steps()?;
    let beat = match denominator {
        2 => 8,
        8 if numerator.is_multiple_of(3) => 6,
        8 if numerator % 2 == 1 => {
            let groups = ((numerator as usize).saturating_sub(1) / 2).max(1);
            return Ok((0..groups).map(|g| 4 * g).collect());
        }
        _ => 4,
    };
    Ok((0..steps).step_by(beat).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_songs: usize,
    pub bars: usize,
    /// Meters drawn uniformly per song, as `(numerator, denominator)`.
    pub meters: Vec<(u32, u32)>,
    /// Inclusive integer BPM range drawn uniformly per song.
    pub tempo_range: (u32, u32),
    pub phrase_len: usize,
    /// Bars to shift the phrase labels by.
    pub phrase_offset: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_songs: 8,
            bars: 16,
            meters: vec![(4, 4)],
            tempo_range: (80, 140),
            phrase_len: 4,
            phrase_offset: 0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bars == 0 {
            return Err(Error::InvalidArgument("bars must be positive".into()));
        }
        if self.meters.is_empty() {
            return Err(Error::InvalidArgument("at least one meter is required".into()));
        }
        for &(num, den) in &self.meters {
            signature_index(num, den)?;
        }
        let (lo, hi) = self.tempo_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidArgument(format!("bad tempo range {lo}..={hi}")));
        }
        if self.phrase_len < 2 {
            return Err(Error::InvalidArgument("phrase length must be at least 2 bars".into()));
        }
        Ok(())
    }

    /// Phrase label of bar `b`.
    pub fn phrase_mark(&self, b: usize) -> PhraseMark {
        match (b + self.phrase_offset) % self.phrase_len {
            0 => PhraseMark::Start,
            k if k + 1 == self.phrase_len => PhraseMark::End,
            _ => PhraseMark::Mid,
        }
    }

    /// Generator for song `index`: the run seed with a per-song stream.
    pub fn song_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

fn draw(p: f64, rng: &mut ChaCha8Rng) -> bool {
    if p <= 0.0 {
        false
    } else if p >= 1.0 {
        true
    } else {
        rng.random::<f64>() < p
    }
}

/// One song of `bars` bars in a single meter and tempo.
pub fn synth_song(style: &dyn Style, config: &SynthConfig, title: &str, meter: (u32, u32), bpm: f64, rng: &mut ChaCha8Rng) -> Result<Song> {
    config.validate()?;
    let (num, den) = meter;
    signature_index(num, den)?;
    let beats = beat_starts(num, den)?;
    let bars: Vec<Bar> = (0..config.bars).map(|b| Bar::new(num, den, bpm, config.phrase_mark(b))).collect();
    let steps = bars[0].steps()?;

    let mut drums = Vec::new();
    let mut kicks = Vec::new();
    let mut guitar = Vec::new();
    for (b, bar) in bars.iter().enumerate() {
        let start = b * steps;
        for position in 0..steps {
            let ctx = StepContext {
                bar,
                position,
                steps,
                beats: &beats,
                tempo_class: tempo_class(bpm),
            };
            let probs = style.onset_probabilities(&ctx);
            for c in Component::ALL {
                if draw(probs[c.index()], rng) {
                    drums.push(DrumEvent { step: (start + position) as f64, component: c });
                    if c == Component::Kick {
                        kicks.push(start + position);
                    }
                }
            }
        }
        guitar.push(NoteEvent {
            onset: start as f64,
            duration: steps as f64,
            pitch: rng.random_range(45..=76),
        });
    }

    let total = steps * config.bars;
    let bass = kicks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let next = kicks.get(i + 1).copied().unwrap_or(total);
            NoteEvent {
                onset: k as f64,
                duration: (next - k).min(8) as f64,
                pitch: rng.random_range(28..=60),
            }
        })
        .collect();

    Ok(Song {
        title: title.to_string(),
        bars,
        guitar,
        bass,
        drums,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub title: String,
    /// Stream of the run seed used for this song.
    pub stream: u64,
    pub meter: (u32, u32),
    pub bpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub style: String,
    pub config: SynthConfig,
    pub songs: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Songs with their manifest entries (paths relative to the corpus directory).
pub fn synth_songs(style: &dyn Style, config: &SynthConfig) -> Result<Vec<(Song, ManifestEntry)>> {
    config.validate()?;
    (0..config.n_songs)
        .map(|i| {
            let mut rng = config.song_rng(i);
            let meter = config.meters[rng.random_range(0..config.meters.len())];
            let bpm = rng.random_range(config.tempo_range.0..=config.tempo_range.1) as f64;
            let title = format!("{}-{i:03}", style.name());
            let song = synth_song(style, config, &title, meter, bpm, &mut rng)?;
            let entry = ManifestEntry {
                path: format!("{title}.json"),
                title,
                stream: i as u64,
                meter,
                bpm,
            };
            Ok((song, entry))
        })
        .collect()
}

/// Writes every song and `manifest.json` into `dir`, creating it if needed.
pub fn synth_corpus(style: &dyn Style, config: &SynthConfig, dir: &Path) -> Result<Manifest> {
    let songs = synth_songs(style, config)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(songs.len());
    for (song, entry) in songs {
        song.save(&dir.join(&entry.path))?;
        entries.push(entry);
    }
    let manifest = Manifest {
        style: style.name().to_string(),
        config: config.clone(),
        songs: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fsio::write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

/// Loads every song listed in `dir/manifest.json`.
pub fn load_corpus(dir: &Path) -> Result<(Manifest, Vec<Song>)> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fsio::read(&path)?;
    let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| Error::Json { path: path.clone(), source: e })?;
    let songs = manifest
        .songs
        .iter()
        .map(|e| Song::load(&dir.join(&e.path)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, songs))
}

/// Paths of all `*.json` songs in `dir` except the manifest, sorted.
pub fn song_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_json = path.extension().is_some_and(|x| x == "json");
        if is_json && path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Steps at the end of a bar searched by [`has_tom_fill`].
pub const FILL_WINDOW: usize = 6;

/// True when high, mid and low toms all sound in the bar's last six steps.
pub fn has_tom_fill(bar_masks: &[u16]) -> bool {
    let window = &bar_masks[bar_masks.len().saturating_sub(FILL_WINDOW)..];
    [Component::TomHi, Component::TomMid, Component::TomLo]
        .iter()
        .all(|c| window.iter().any(|m| m & (1 << c.index()) != 0))
}
