use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::rng::rng_from_seed;

/// Discrete concept vocabulary: `M` centroids of dimension `d_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptCodebook {
    entries: Vec<Vec<f64>>,
}

/// k-means stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
            seed: 0,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(entries: &[Vec<f64>], patch: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, e) in entries.iter().enumerate() {
        let d = sq_dist(e, patch);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

impl ConceptCodebook {
    pub fn from_entries(entries: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = entries.first() else {
            bail!(Data, "codebook needs at least one entry");
        };
        let dim = first.len();
        if entries.iter().any(|e| e.len() != dim) {
            bail!(Data, "codebook entries differ in dimension");
        }
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            bail!(Numeric, "codebook entry is not finite");
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn order(&self) -> usize {
        self.entries.len()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].len()
    }

    /// `log2(M)`; fractional when `M` is not a power of two.
    pub fn bits_per_symbol(&self) -> f64 {
        libm::log2(self.order() as f64)
    }

    /// Nearest entry by squared Euclidean distance, ties to the lowest index.
    pub fn quantize(&self, patch: &[f64]) -> Result<u32> {
        if patch.len() != self.dim() {
            bail!(
                Data,
                "patch dimension {} differs from codebook {}",
                patch.len(),
                self.dim()
            );
        }
        Ok(nearest(&self.entries, patch).0 as u32)
    }
}

fn count_distinct(patches: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = patches
        .iter()
        .map(|p| p.iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Lloyd's k-means with k-means++ seeding.
///
/// Stops when no centroid moves more than `tol` or after `max_iters` rounds.
/// An empty cluster is reseeded at the point farthest from its assigned
/// centroid.
pub fn train_codebook(
    patches: &[Vec<f64>],
    order: usize,
    cfg: &KMeansConfig,
) -> Result<ConceptCodebook> {
    if order == 0 {
        bail!(Config, "codebook order must be positive");
    }
    let Some(first) = patches.first() else {
        bail!(Data, "no patches to train on");
    };
    let dim = first.len();
    if patches.iter().any(|p| p.len() != dim) {
        bail!(Data, "patches differ in dimension");
    }
    if patches.iter().flatten().any(|v| !v.is_finite()) {
        bail!(Numeric, "patch contains a non-finite value");
    }
    let distinct = count_distinct(patches);
    if distinct < order {
        bail!(Data, "{distinct} distinct patches, need at least {order}");
    }

    let mut rng = rng_from_seed(cfg.seed);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(order);
    centroids.push(patches[rng.random_range(0..patches.len())].clone());
    let mut d2: Vec<f64> = patches.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < order {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = 0;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                chosen = i;
                if target < w {
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            0
        };
        let c = patches[pick].clone();
        for (d, p) in d2.iter_mut().zip(patches) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }

    let mut assignment = vec![0usize; patches.len()];
    let mut distances = vec![0.0f64; patches.len()];
    for _ in 0..cfg.max_iters {
        for (i, p) in patches.iter().enumerate() {
            let (k, d) = nearest(&centroids, p);
            assignment[i] = k;
            distances[i] = d;
        }
        let mut sums = vec![vec![0.0; dim]; order];
        let mut counts = vec![0usize; order];
        for (p, &k) in patches.iter().zip(&assignment) {
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut moved = 0.0f64;
        for k in 0..order {
            let next = if counts[k] > 0 {
                let n = counts[k] as f64;
                sums[k].iter().map(|s| s / n).collect()
            } else {
                let far = distances
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &d)| {
                        if d > best.1 {
                            (i, d)
                        } else {
                            best
                        }
                    })
                    .0;
                distances[far] = 0.0;
                patches[far].clone()
            };
            moved = moved.max(libm::sqrt(sq_dist(&next, &centroids[k])));
            centroids[k] = next;
        }
        if moved < cfg.tol {
            break;
        }
    }
    ConceptCodebook::from_entries(centroids)
}
