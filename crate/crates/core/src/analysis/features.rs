//! Per-bar rhythm features and their per-piece aggregation.

use crate::encoding::condition::MetricClass;
use crate::encoding::grid::{quantize_song, StepGrid};
use crate::encoding::song::Song;
use crate::encoding::words::{Component, Stream};
use crate::error::{Error, Result};

pub const BAR_FEATURES: usize = 7;
pub const GLOBAL_FEATURES: usize = 2 * BAR_FEATURES;

pub const BAR_FEATURE_NAMES: [&str; BAR_FEATURES] = [
    "density",
    "density_k",
    "density_h",
    "density_t",
    "syncopation",
    "weak_ratio",
    "symmetry",
];

/// Column names of [`GlobalFeatures`]: all means, then all standard deviations.
pub fn global_feature_names() -> Vec<String> {
    let means = BAR_FEATURE_NAMES.iter().map(|n| format!("{n}_mean"));
    let stds = BAR_FEATURE_NAMES.iter().map(|n| format!("{n}_std"));
    means.chain(stds).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarFeatures {
    pub density: f64,
    /// Densities of the K, H and T streams.
    pub stream_density: [f64; 3],
    pub syncopation: f64,
    pub weak_ratio: f64,
    pub symmetry: f64,
}

impl BarFeatures {
    pub fn to_array(&self) -> [f64; BAR_FEATURES] {
        let [k, h, t] = self.stream_density;
        [self.density, k, h, t, self.syncopation, self.weak_ratio, self.symmetry]
    }
}

/// Means followed by population standard deviations of the bar features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalFeatures(pub [f64; GLOBAL_FEATURES]);

impl GlobalFeatures {
    pub fn means(&self) -> &[f64] {
        &self.0[..BAR_FEATURES]
    }

    pub fn stds(&self) -> &[f64] {
        &self.0[BAR_FEATURES..]
    }
}

/// Metrical weight of every position of an `n`-step bar.
pub fn metrical_weights(n: usize) -> Vec<i32> {
    (0..n).map(|p| MetricClass::at(p).weight()).collect()
}

/// Unnormalized Longuet-Higgins and Lee score: each note is paired with the
/// heaviest rest before the next note (or the bar end) and scores the weight
/// difference when the rest is heavier.
pub fn lhl_raw(pattern: &[bool], weights: &[i32]) -> Result<i32> {
    if pattern.len() != weights.len() {
        return Err(Error::shape("lhl_syncopation", &[pattern.len()], &[weights.len()]));
    }
    let mut total = 0;
    let mut i = 0;
    while i < pattern.len() {
        if !pattern[i] {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        let mut heaviest = None::<i32>;
        while j < pattern.len() && !pattern[j] {
            heaviest = Some(heaviest.map_or(weights[j], |h: i32| h.max(weights[j])));
            j += 1;
        }
        if let Some(h) = heaviest {
            total += (h - weights[i]).max(0);
        }
        i = j;
    }
    Ok(total)
}

/// Largest [`lhl_raw`] over all patterns with the given weights.
pub fn lhl_max(weights: &[i32]) -> i32 {
    let n = weights.len();
    // best[i]: best score of the remainder given a note at i.
    let mut best = vec![0i32; n];
    for i in (0..n).rev() {
        let mut heaviest = None::<i32>;
        let mut value = 0;
        for j in i + 1..=n {
            let gap = heaviest.map_or(0, |h| (h - weights[i]).max(0));
            let tail = if j < n { best[j] } else { 0 };
            value = value.max(gap + tail);
            if j < n {
                heaviest = Some(heaviest.map_or(weights[j], |h| h.max(weights[j])));
            }
        }
        best[i] = value;
    }
    best.into_iter().max().unwrap_or(0)
}

/// LHL syncopation normalized by the maximum for the pattern's length, in `[0, 1]`.
pub fn lhl_syncopation(pattern: &[bool], weights: &[i32]) -> Result<f64> {
    let raw = lhl_raw(pattern, weights)?;
    let max = lhl_max(weights);
    Ok(if max == 0 { 0.0 } else { raw as f64 / max as f64 })
}

fn sounds(mask: u16, c: Component) -> bool {
    mask & (1 << c.index()) != 0
}

pub fn bar_features(masks: &[u16]) -> Result<BarFeatures> {
    let n = masks.len();
    if n == 0 {
        return Err(Error::Empty("bar"));
    }
    let onsets: usize = masks.iter().map(|m| m.count_ones() as usize).sum();
    let density = onsets as f64 / (n * Component::ALL.len()) as f64;

    let mut stream_density = [0.0; 3];
    for s in Stream::ALL {
        let comps = s.components();
        let hits: usize = masks
            .iter()
            .map(|&m| comps.iter().filter(|&&c| sounds(m, c)).count())
            .sum();
        stream_density[s.index()] = hits as f64 / (n * comps.len()) as f64;
    }

    let weak: usize = masks
        .iter()
        .enumerate()
        .filter(|(p, _)| MetricClass::at(*p).is_weak())
        .map(|(_, m)| m.count_ones() as usize)
        .sum();
    let weak_ratio = if onsets == 0 { 0.0 } else { weak as f64 / onsets as f64 };

    let half = n / 2;
    let symmetry = if half == 0 {
        1.0
    } else {
        let equal: usize = (0..half)
            .map(|i| {
                let diff = masks[i] ^ masks[n - half + i];
                Component::ALL.len() - diff.count_ones() as usize
            })
            .sum();
        equal as f64 / (half * Component::ALL.len()) as f64
    };

    let pattern: Vec<bool> = masks.iter().map(|&m| m != 0).collect();
    let syncopation = lhl_syncopation(&pattern, &metrical_weights(n))?;

    Ok(BarFeatures {
        density,
        stream_density,
        syncopation,
        weak_ratio,
        symmetry,
    })
}

/// Population mean and standard deviation of each feature across bars.
pub fn global_features(bars: &[BarFeatures]) -> Result<GlobalFeatures> {
    if bars.is_empty() {
        return Err(Error::Empty("piece has no bars"));
    }
    let n = bars.len() as f64;
    let rows: Vec<[f64; BAR_FEATURES]> = bars.iter().map(BarFeatures::to_array).collect();
    let mut out = [0.0; GLOBAL_FEATURES];
    for k in 0..BAR_FEATURES {
        let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
        out[k] = mean;
        out[BAR_FEATURES + k] = var.sqrt();
    }
    Ok(GlobalFeatures(out))
}

pub fn grid_bar_features(grid: &StepGrid) -> Result<Vec<BarFeatures>> {
    (0..grid.bars.len()).map(|b| bar_features(grid.bar_drums(b))).collect()
}

pub fn song_features(song: &Song) -> Result<GlobalFeatures> {
    global_features(&grid_bar_features(&quantize_song(song)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kick_at(steps: &[usize], n: usize) -> Vec<u16> {
        let mut m = vec![0u16; n];
        for &s in steps {
            m[s] |= 1 << Component::Kick.index();
        }
        m
    }

    #[test]
    fn silent_bar() {
        let f = bar_features(&[0; 16]).unwrap();
        assert_eq!(f.to_array(), [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn four_on_the_floor() {
        let f = bar_features(&kick_at(&[0, 4, 8, 12], 16)).unwrap();
        assert_eq!(f.weak_ratio, 0.0);
        assert_eq!(f.stream_density, [0.125, 0.0, 0.0]);
        assert_eq!(f.density, 4.0 / 144.0);
        assert_eq!(f.symmetry, 1.0);
        assert_eq!(f.syncopation, 0.0);
    }

    #[test]
    fn single_half_beat_kick_is_all_weak() {
        assert_eq!(bar_features(&kick_at(&[2], 16)).unwrap().weak_ratio, 1.0);
    }

    #[test]
    fn odd_bar_compares_prefix_and_suffix() {
        // 7 steps: prefix 0..3 against suffix 4..7; step 3 is ignored.
        let f = bar_features(&kick_at(&[0, 3, 4], 7)).unwrap();
        assert_eq!(f.symmetry, 1.0);
        let f = bar_features(&kick_at(&[1], 7)).unwrap();
        assert_eq!(f.symmetry, 26.0 / 27.0);
    }

    #[test]
    fn empty_bar_is_an_error() {
        assert!(bar_features(&[]).is_err());
    }

    #[test]
    fn on_beat_onsets_do_not_syncopate() {
        let w = metrical_weights(16);
        let mut p = vec![false; 16];
        for s in [0, 4, 8, 12] {
            p[s] = true;
        }
        assert_eq!(lhl_syncopation(&p, &w).unwrap(), 0.0);
        assert_eq!(lhl_syncopation(&[false; 16], &w).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(lhl_syncopation(&[true; 3], &metrical_weights(4)).is_err());
    }

    #[test]
    fn global_two_bars() {
        let mut a = bar_features(&[0; 4]).unwrap();
        let mut b = a;
        a.density = 0.1;
        b.density = 0.3;
        let g = global_features(&[a, b]).unwrap();
        assert!((g.means()[0] - 0.2).abs() < 1e-15);
        assert!((g.stds()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn single_bar_has_zero_spread() {
        let f = bar_features(&kick_at(&[0, 6], 16)).unwrap();
        let g = global_features(&[f]).unwrap();
        assert_eq!(g.means(), f.to_array());
        assert!(g.stds().iter().all(|&s| s == 0.0));
        assert!(global_features(&[]).is_err());
    }

    #[test]
    fn names_line_up() {
        let names = global_feature_names();
        assert_eq!(names.len(), GLOBAL_FEATURES);
        assert_eq!(names[0], "density_mean");
        assert_eq!(names[13], "symmetry_std");
    }
}
