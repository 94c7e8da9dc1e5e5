//! Exact t-SNE for small point sets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    /// Allowed absolute error of each point's calibrated perplexity.
    pub perplexity_tolerance: f64,
    pub max_search_steps: usize,
    pub init_std: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 5.0,
            iterations: 500,
            learning_rate: 100.0,
            exaggeration: 4.0,
            exaggeration_iterations: 50,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            perplexity_tolerance: 1e-3,
            max_search_steps: 50,
            init_std: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: Vec<[f64; 2]>,
    pub perplexity: f64,
    pub iterations: usize,
    /// KL(P || Q) after the last iteration.
    pub kl: f64,
    /// KL(P || Q) after every iteration.
    pub kl_history: Vec<f64>,
    /// Perplexity actually reached by each point's bandwidth search.
    pub achieved_perplexity: Vec<f64>,
    /// Conditional affinities `P(j | i)`, row per point.
    pub conditional: Vec<Vec<f64>>,
}

/// Z-scores each column with the population std; constant columns are dropped.
pub fn standardize(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = vectors.len();
    if n == 0 {
        return Err(Error::Empty("feature vectors"));
    }
    let d = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::shape("standardize", &[d], &[bad.len()]));
    }
    let mut out = vec![Vec::new(); n];
    for k in 0..d {
        let mean = vectors.iter().map(|v| v[k]).sum::<f64>() / n as f64;
        let std = (vectors.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if std <= 1e-12 * mean.abs().max(1.0) {
            continue;
        }
        for (row, v) in out.iter_mut().zip(vectors) {
            row.push((v[k] - mean) / std);
        }
    }
    Ok(out)
}

fn squared_distances(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum();
            d[i][j] = s;
            d[j][i] = s;
        }
    }
    d
}

/// Row `i` of the conditional affinities for precision `beta`, with its
/// Shannon entropy in nats.
fn affinity_row(dist: &[f64], i: usize, beta: f64) -> (Vec<f64>, f64) {
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut row: Vec<f64> = dist
        .iter()
        .enumerate()
        .map(|(j, &d)| if j == i { 0.0 } else { (-beta * (d - min)).exp() })
        .collect();
    let z: f64 = row.iter().sum();
    let mut entropy = 0.0;
    for p in &mut row {
        *p /= z;
        if *p > 0.0 {
            entropy -= *p * p.ln();
        }
    }
    (row, entropy)
}

/// Bandwidth search for each point; returns the conditional rows and the
/// perplexity reached for each.
pub fn conditional_affinities(points: &[Vec<f64>], config: &TsneConfig) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dist = squared_distances(points);
    let target = config.perplexity;
    let mut rows = Vec::with_capacity(points.len());
    let mut achieved = Vec::with_capacity(points.len());
    for (i, d) in dist.iter().enumerate() {
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0;
        let (mut row, mut h) = affinity_row(d, i, beta);
        for _ in 0..config.max_search_steps {
            if (h.exp() - target).abs() <= config.perplexity_tolerance {
                break;
            }
            // Larger beta narrows the kernel and lowers the perplexity.
            if h.exp() > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            (row, h) = affinity_row(d, i, beta);
        }
        rows.push(row);
        achieved.push(h.exp());
    }
    (rows, achieved)
}

/// Symmetrized joint affinities `(P(j|i) + P(i|j)) / 2n`.
pub fn joint_affinities(conditional: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = conditional.len();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            p[i][j] = (conditional[i][j] + conditional[j][i]) / (2.0 * n as f64);
        }
    }
    p
}

/// Initial layout: each point draws from a generator keyed by the run seed
/// and its own feature values, so reordering the inputs reorders the output.
fn initial_coords(points: &[Vec<f64>], seed: u64, std: f64) -> Vec<[f64; 2]> {
    let normal = Normal::new(0.0, std).expect("positive std");
    points
        .iter()
        .map(|v| {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            for x in v {
                h.update(x.to_bits().to_le_bytes());
            }
            let key: [u8; 32] = h.finalize().into();
            let mut rng = ChaCha8Rng::from_seed(key);
            [normal.sample(&mut rng), normal.sample(&mut rng)]
        })
        .collect()
}

fn kl_divergence(p: &[Vec<f64>], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let mut num = vec![vec![0.0; n]; n];
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = (y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2);
                num[i][j] = 1.0 / (1.0 + d);
                z += num[i][j];
            }
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && p[i][j] > 0.0 {
                let q = (num[i][j] / z).max(1e-12);
                kl += p[i][j] * (p[i][j] / q).ln();
            }
        }
    }
    kl
}

/// Standardizes `vectors` and embeds them in the plane.
pub fn tsne_embed(vectors: &[Vec<f64>], config: &TsneConfig, seed: u64) -> Result<Embedding> {
    let n = vectors.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("t-SNE needs at least 3 points, got {n}")));
    }
    if !(config.perplexity > 0.0) || config.perplexity >= n as f64 {
        return Err(Error::InvalidArgument(format!(
            "perplexity {} must be positive and below the point count {n}",
            config.perplexity
        )));
    }
    let points = standardize(vectors)?;
    let init = initial_coords(&points, seed, config.init_std);
    tsne_from(&points, init, config)
}

/// Runs the optimization on already standardized `points` from `init`.
pub fn tsne_from(points: &[Vec<f64>], init: Vec<[f64; 2]>, config: &TsneConfig) -> Result<Embedding> {
    let n = points.len();
    if init.len() != n {
        return Err(Error::shape("tsne_from", &[n], &[init.len()]));
    }
    let (conditional, achieved) = conditional_affinities(points, config);
    let p = joint_affinities(&conditional);

    let mut y = init;
    let mut velocity = vec![[0.0; 2]; n];
    let mut kl_history = Vec::with_capacity(config.iterations);
    let mut num = vec![vec![0.0; n]; n];
    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations { config.exaggeration } else { 1.0 };
        let momentum = if iter < config.momentum_switch { config.momentum } else { config.final_momentum };
        let mut z = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let d = (y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2);
                    num[i][j] = 1.0 / (1.0 + d);
                    z += num[i][j];
                }
            }
        }
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let coeff = 4.0 * (exaggeration * p[i][j] - num[i][j] / z) * num[i][j];
                g[0] += coeff * (y[i][0] - y[j][0]);
                g[1] += coeff * (y[i][1] - y[j][1]);
            }
            for k in 0..2 {
                velocity[i][k] = momentum * velocity[i][k] - config.learning_rate * g[k];
            }
        }
        for (yi, vi) in y.iter_mut().zip(&velocity) {
            yi[0] += vi[0];
            yi[1] += vi[1];
        }
        let centre = [
            y.iter().map(|c| c[0]).sum::<f64>() / n as f64,
            y.iter().map(|c| c[1]).sum::<f64>() / n as f64,
        ];
        for yi in &mut y {
            yi[0] -= centre[0];
            yi[1] -= centre[1];
        }
        let kl = kl_divergence(&p, &y);
        if !kl.is_finite() {
            return Err(Error::InvalidArgument(format!("t-SNE diverged at iteration {iter}")));
        }
        kl_history.push(kl);
    }
    let kl = kl_history.last().copied().unwrap_or_else(|| kl_divergence(&p, &y));
    Ok(Embedding {
        coords: y,
        perplexity: config.perplexity,
        iterations: config.iterations,
        kl,
        kl_history,
        achieved_perplexity: achieved,
        conditional,
    })
}
