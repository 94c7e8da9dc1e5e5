//! Optional JSON run configuration. Command-line flags take precedence.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub style: Option<String>,
    pub songs: Option<usize>,
    pub bars: Option<usize>,
    pub meters: Option<Vec<String>>,
    pub tempo_range: Option<(u32, u32)>,
    pub phrase_len: Option<usize>,
    pub phrase_offset: Option<usize>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub snapshots: Option<Vec<usize>>,
    pub hidden: Option<usize>,
    pub lstm_layers: Option<usize>,
    pub dropout: Option<f64>,
    pub wpast: Option<usize>,
    pub wfuture: Option<usize>,
    pub learning_rate: Option<f64>,
    pub seq_len: Option<usize>,
    pub batch_size: Option<usize>,
    pub clip_norm: Option<f64>,
    pub temperature: Option<f64>,
    pub seed_steps: Option<usize>,
    pub perplexity: Option<f64>,
    pub iterations: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Parses `4/4` style meters.
pub fn parse_meter(s: &str) -> Result<(u32, u32), String> {
    let (n, d) = s.split_once('/').ok_or_else(|| format!("meter {s:?} is not of the form N/D"))?;
    let n = n.trim().parse().map_err(|_| format!("bad meter numerator in {s:?}"))?;
    let d = d.trim().parse().map_err(|_| format!("bad meter denominator in {s:?}"))?;
    Ok((n, d))
}

/// Parses `80-140` as an inclusive BPM range.
pub fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (lo, hi) = s.split_once('-').ok_or_else(|| format!("range {s:?} is not of the form LO-HI"))?;
    let lo = lo.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
    let hi = hi.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
    Ok((lo, hi))
}
