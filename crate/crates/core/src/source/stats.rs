use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ConceptGrid;
use crate::error::{bail, Result};
use crate::SCI_EPSILON;

/// Per-symbol importance and pairwise co-occurrence of a source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceStatistics {
    /// Mean SCI per symbol, `Ī_i`.
    pub avg_sci: Vec<f64>,
    /// Row-major `M x M` co-occurrence probabilities `P(i, j)`.
    pub cooccurrence: Vec<f64>,
    pub mean_sci: f64,
    pub delta: f64,
    pub gamma: f64,
    pub usage_counts: Vec<u64>,
}

impl SourceStatistics {
    /// Builds statistics from given `Ī` and `P`, deriving `μ`, `δ`, `γ`.
    /// Shape and finiteness are checked; symmetry is left to the consumer.
    pub fn from_parts(avg_sci: Vec<f64>, cooccurrence: Vec<f64>) -> Result<Self> {
        let m = avg_sci.len();
        if m == 0 {
            bail!(Data, "statistics need at least one symbol");
        }
        if cooccurrence.len() != m * m {
            bail!(
                Consistency,
                "co-occurrence has {} entries for M = {m}",
                cooccurrence.len()
            );
        }
        if avg_sci.iter().chain(&cooccurrence).any(|v| !v.is_finite()) {
            bail!(Numeric, "statistics contain a non-finite value");
        }
        let mean_sci = avg_sci.iter().sum::<f64>() / m as f64;
        let delta = avg_sci.iter().map(|v| v - mean_sci).fold(0.0, f64::max);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    lo = lo.min(cooccurrence[i * m + j]);
                    hi = hi.max(cooccurrence[i * m + j]);
                }
            }
        }
        let gamma = if m > 1 { hi - lo } else { 0.0 };
        Ok(Self {
            avg_sci,
            cooccurrence,
            mean_sci,
            delta,
            gamma,
            usage_counts: vec![0; m],
        })
    }

    pub fn order(&self) -> usize {
        self.avg_sci.len()
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.cooccurrence[i * self.order() + j]
    }

    /// Symbols with above-average importance (`δ_i > 0`).
    pub fn top_set(&self) -> Vec<usize> {
        (0..self.order())
            .filter(|&i| self.avg_sci[i] > self.mean_sci)
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let m = self.order();
        (0..m).all(|i| (0..i).all(|j| (self.p(i, j) - self.p(j, i)).abs() <= tol))
    }
}

/// Mean per-symbol SCI and set-based co-occurrence over full-grid payloads.
///
/// Each grid contributes one count to every unordered pair of distinct symbols
/// present in it. Counts are symmetrized and normalized to unit off-diagonal
/// mass. Symbols never observed get `Ī_i = SCI_EPSILON`.
pub fn compute_statistics(grids: &[ConceptGrid], order: usize) -> Result<SourceStatistics> {
    if grids.is_empty() {
        bail!(Data, "no grids to compute statistics from");
    }
    let mut sci_sum = vec![0.0; order];
    let mut usage = vec![0u64; order];
    let mut pair_counts = vec![0u64; order * order];
    let mut present = vec![false; order];
    let mut members = Vec::new();
    for grid in grids {
        if grid.indices.len() != grid.per_slot_sci.len() {
            bail!(Consistency, "grid has mismatched index and SCI lengths");
        }
        members.clear();
        for (&c, &sci) in grid.indices.iter().zip(&grid.per_slot_sci) {
            let c = c as usize;
            if c >= order {
                bail!(Consistency, "concept {c} outside order {order}");
            }
            sci_sum[c] += sci;
            usage[c] += 1;
            if !present[c] {
                present[c] = true;
                members.push(c);
            }
        }
        members.sort_unstable();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                pair_counts[i * order + j] += 1;
            }
            present[i] = false;
        }
    }
    let avg_sci: Vec<f64> = sci_sum
        .iter()
        .zip(&usage)
        .map(|(&s, &n)| if n > 0 { s / n as f64 } else { SCI_EPSILON })
        .collect();
    let total: u64 = pair_counts.iter().sum();
    let mut cooccurrence = vec![0.0; order * order];
    if total > 0 {
        let norm = 2.0 * total as f64;
        for i in 0..order {
            for j in i + 1..order {
                let p = pair_counts[i * order + j] as f64 / norm;
                cooccurrence[i * order + j] = p;
                cooccurrence[j * order + i] = p;
            }
        }
    }
    let mut stats = SourceStatistics::from_parts(avg_sci, cooccurrence)?;
    stats.usage_counts = usage;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(indices: &[u32], sci: f64) -> ConceptGrid {
        ConceptGrid {
            indices: indices.to_vec(),
            per_slot_sci: vec![sci; indices.len()],
        }
    }

    #[test]
    fn pair_counts_by_hand() {
        let stats = compute_statistics(&[grid(&[0, 1], 0.5), grid(&[0, 2], 0.5)], 3).unwrap();
        let expected = [0.0, 0.25, 0.25, 0.25, 0.0, 0.0, 0.25, 0.0, 0.0];
        assert_eq!(stats.cooccurrence, expected);
        assert_eq!(stats.delta, 0.0);
        assert_eq!(stats.usage_counts, vec![2, 1, 1]);
    }

    #[test]
    fn concentration_and_top_set() {
        let stats = SourceStatistics::from_parts(vec![0.9, 0.1, 0.1, 0.1], vec![0.0; 16]).unwrap();
        assert!((stats.mean_sci - 0.3).abs() < 1e-15);
        assert!((stats.delta - 0.6).abs() < 1e-15);
        assert_eq!(stats.top_set(), vec![0]);
        assert_eq!(stats.gamma, 0.0);
    }

    #[test]
    fn unobserved_symbols_get_epsilon() {
        let stats = compute_statistics(&[grid(&[0, 0, 1], 0.4)], 4).unwrap();
        assert_eq!(stats.avg_sci[2], SCI_EPSILON);
        assert_eq!(stats.avg_sci[3], SCI_EPSILON);
        assert!((stats.avg_sci[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn no_pairs_gives_zero_matrix() {
        let stats = compute_statistics(&[grid(&[1, 1], 0.3)], 2).unwrap();
        assert!(stats.cooccurrence.iter().all(|&p| p == 0.0));
    }

    proptest! {
        #[test]
        fn statistics_invariants(
            grids in proptest::collection::vec(proptest::collection::vec((0u32..8, 0.01f64..0.99), 1..10), 1..20)
        ) {
            let grids: Vec<ConceptGrid> = grids
                .into_iter()
                .map(|g| ConceptGrid {
                    indices: g.iter().map(|p| p.0).collect(),
                    per_slot_sci: g.iter().map(|p| p.1).collect(),
                })
                .collect();
            let s = compute_statistics(&grids, 8).unwrap();
            prop_assert!(s.is_symmetric(0.0));
            let mut off = 0.0;
            for i in 0..8 {
                prop_assert_eq!(s.p(i, i), 0.0);
                for j in 0..8 {
                    if i != j { off += s.p(i, j); }
                }
            }
            prop_assert!(off == 0.0 || (off - 1.0).abs() < 1e-12);
            prop_assert!(s.delta >= 0.0 && s.gamma >= 0.0);
        }
    }
}
