//! Retained-draw storage and posterior summaries.
//!
//! An [`ArrayStore`] holds draws of one fixed-size array either in full or
//! compressed to running moments plus streaming quantile sketches.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Quantile levels every sketch tracks.
pub const SKETCH_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n−1)p`). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Streaming estimate of one quantile with five markers.
#[derive(Debug, Clone, PartialEq)]
pub struct P2Quantile {
    p: f64,
    heights: [f64; 5],
    pos: [f64; 5],
    desired: [f64; 5],
    step: [f64; 5],
    count: usize,
}

impl P2Quantile {
    pub fn new(p: f64) -> Self {
        P2Quantile {
            p,
            heights: [0.0; 5],
            pos: [1.0, 2.0, 3.0, 4.0, 5.0],
            desired: [1.0, 1.0 + 2.0 * p, 1.0 + 4.0 * p, 3.0 + 2.0 * p, 5.0],
            step: [0.0, p / 2.0, p, (1.0 + p) / 2.0, 1.0],
            count: 0,
        }
    }

    pub fn push(&mut self, x: f64) {
        if self.count < 5 {
            self.heights[self.count] = x;
            self.count += 1;
            if self.count == 5 {
                self.heights.sort_by(f64::total_cmp);
            }
            return;
        }
        self.count += 1;
        let h = &mut self.heights;
        let k = if x < h[0] {
            h[0] = x;
            0
        } else if x >= h[4] {
            h[4] = x;
            3
        } else {
            (0..4).find(|&i| x < h[i + 1]).unwrap_or(3)
        };
        for i in k + 1..5 {
            self.pos[i] += 1.0;
        }
        for i in 0..5 {
            self.desired[i] += self.step[i];
        }
        for i in 1..4 {
            let d = self.desired[i] - self.pos[i];
            if (d >= 1.0 && self.pos[i + 1] - self.pos[i] > 1.0) || (d <= -1.0 && self.pos[i - 1] - self.pos[i] < -1.0) {
                let s = d.signum();
                let cand = self.parabolic(i, s);
                self.heights[i] = if self.heights[i - 1] < cand && cand < self.heights[i + 1] {
                    cand
                } else {
                    self.linear(i, s)
                };
                self.pos[i] += s;
            }
        }
    }

    fn parabolic(&self, i: usize, s: f64) -> f64 {
        let (q, n) = (&self.heights, &self.pos);
        q[i] + s / (n[i + 1] - n[i - 1])
            * ((n[i] - n[i - 1] + s) * (q[i + 1] - q[i]) / (n[i + 1] - n[i])
                + (n[i + 1] - n[i] - s) * (q[i] - q[i - 1]) / (n[i] - n[i - 1]))
    }

    fn linear(&self, i: usize, s: f64) -> f64 {
        let j = if s > 0.0 { i + 1 } else { i - 1 };
        self.heights[i] + s * (self.heights[j] - self.heights[i]) / (self.pos[j] - self.pos[i])
    }

    pub fn estimate(&self) -> f64 {
        if self.count >= 5 {
            return self.heights[2];
        }
        let mut v = self.heights[..self.count].to_vec();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            f64::NAN
        } else {
            quantile_sorted(&v, self.p)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageMode {
    Full,
    Summary,
}

#[derive(Debug, Clone)]
pub struct ArrayStore {
    dim: usize,
    mode: StorageMode,
    count: usize,
    /// Full mode: draw-major flat buffer.
    draws: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
    sketches: Vec<[P2Quantile; 5]>,
}

impl ArrayStore {
    pub fn new(dim: usize, mode: StorageMode) -> Self {
        let summary = mode == StorageMode::Summary;
        ArrayStore {
            dim,
            mode,
            count: 0,
            draws: Vec::new(),
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            sketches: if summary {
                (0..dim).map(|_| SKETCH_LEVELS.map(P2Quantile::new)).collect()
            } else {
                Vec::new()
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mode(&self) -> StorageMode {
        self.mode
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!("store expects {} values, got {}", self.dim, x.len())));
        }
        if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical("storage", format!("non-finite value at element {bad}")));
        }
        self.count += 1;
        let n = self.count as f64;
        for (j, &v) in x.iter().enumerate() {
            let d = v - self.mean[j];
            self.mean[j] += d / n;
            self.m2[j] += d * (v - self.mean[j]);
        }
        match self.mode {
            StorageMode::Full => self.draws.extend_from_slice(x),
            StorageMode::Summary => {
                for (sk, &v) in self.sketches.iter_mut().zip(x) {
                    for q in sk.iter_mut() {
                        q.push(v);
                    }
                }
            }
        }
        Ok(())
    }

    /// Draw `i` in full mode.
    pub fn draw(&self, i: usize) -> Option<&[f64]> {
        (self.mode == StorageMode::Full && i < self.count).then(|| &self.draws[i * self.dim..(i + 1) * self.dim])
    }

    /// All draws of element `j` in full mode.
    pub fn trace(&self, j: usize) -> Option<Vec<f64>> {
        (self.mode == StorageMode::Full).then(|| (0..self.count).map(|i| self.draws[i * self.dim + j]).collect())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> Vec<f64> {
        let d = (self.count as f64 - 1.0).max(1.0);
        self.m2.iter().map(|v| v / d).collect()
    }

    /// Per-element quantile. Summary mode supports only [`SKETCH_LEVELS`].
    pub fn quantiles(&self, p: f64) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::Data("no retained draws".into()));
        }
        match self.mode {
            StorageMode::Full => Ok((0..self.dim)
                .map(|j| quantile(&self.trace(j).expect("full mode"), p))
                .collect()),
            StorageMode::Summary => {
                let idx = SKETCH_LEVELS
                    .iter()
                    .position(|&l| (l - p).abs() < 1e-12)
                    .ok_or_else(|| Error::Config(format!("summary storage does not track quantile {p}")))?;
                Ok(self.sketches.iter().map(|s| s[idx].estimate()).collect())
            }
        }
    }
}

/// Per-element posterior summary of one array.
#[derive(Debug, Clone, Serialize)]
pub struct ArraySummary {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub q05: Vec<f64>,
    pub q25: Vec<f64>,
    pub median: Vec<f64>,
    pub q75: Vec<f64>,
    pub q95: Vec<f64>,
}

impl ArraySummary {
    pub fn from_store(store: &ArrayStore) -> Result<Self> {
        let q = |p| store.quantiles(p);
        Ok(ArraySummary {
            mean: store.mean().to_vec(),
            sd: store.variance().iter().map(|v| v.sqrt()).collect(),
            q05: q(0.05)?,
            q25: q(0.25)?,
            median: q(0.5)?,
            q75: q(0.75)?,
            q95: q(0.95)?,
        })
    }

    pub fn iqr(&self) -> Vec<f64> {
        self.q75.iter().zip(&self.q25).map(|(a, b)| a - b).collect()
    }
}

/// Effective sample size by Geyer's initial positive sequence.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        (0..n - lag).map(|t| (xs[t] - mean) * (xs[t + lag] - mean)).sum::<f64>() / (n as f64 * c0)
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64 * (n as f64).log10().max(1.0))
}
