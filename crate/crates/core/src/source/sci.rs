//! Statistical task-relevance (SCI) estimator.
//!
//! Each occurrence of concept `c` at slot `s` is scored by the product of the
//! slot's relevance (mutual information between the slot's concept and the
//! label) and the concept's informativeness (one minus the normalized label
//! entropy given the concept). Both factors are max-normalized and the product
//! is clamped into `(SCI_EPSILON, 1 - SCI_EPSILON)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::SCI_EPSILON;

/// Concept indices of one image (one per slot) and the SCI of each occurrence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptGrid {
    pub indices: Vec<u32>,
    pub per_slot_sci: Vec<f64>,
}

/// Fitted relevance factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SciModel {
    /// Per-slot relevance `r_s`, max-normalized.
    pub slot_relevance: Vec<f64>,
    /// Per-concept informativeness `g_c`, max-normalized.
    pub concept_informativeness: Vec<f64>,
}

impl SciModel {
    pub fn score(&self, slot: usize, concept: u32) -> f64 {
        let raw = self.slot_relevance[slot] * self.concept_informativeness[concept as usize];
        raw.clamp(SCI_EPSILON, 1.0 - SCI_EPSILON)
    }

    /// Attaches per-occurrence scores to a slot-ordered index vector.
    pub fn grid(&self, indices: Vec<u32>) -> Result<ConceptGrid> {
        if indices.len() != self.slot_relevance.len() {
            bail!(
                Consistency,
                "{} indices for {} slots",
                indices.len(),
                self.slot_relevance.len()
            );
        }
        if let Some(bad) = indices
            .iter()
            .find(|&&c| c as usize >= self.concept_informativeness.len())
        {
            bail!(Consistency, "concept {bad} outside the vocabulary");
        }
        let per_slot_sci = indices
            .iter()
            .enumerate()
            .map(|(s, &c)| self.score(s, c))
            .collect();
        Ok(ConceptGrid {
            indices,
            per_slot_sci,
        })
    }
}

/// Mutual information (nats) of a joint count table `rows x cols` after adding
/// `smoothing` to every cell.
pub fn mutual_information(joint: &[f64], rows: usize, cols: usize, smoothing: f64) -> f64 {
    let total: f64 = joint.iter().sum::<f64>() + smoothing * (rows * cols) as f64;
    if total <= 0.0 {
        return 0.0;
    }
    let mut row_sum = vec![0.0; rows];
    let mut col_sum = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = joint[r * cols + c] + smoothing;
            row_sum[r] += v;
            col_sum[c] += v;
        }
    }
    let mut mi = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let v = joint[r * cols + c] + smoothing;
            if v > 0.0 {
                mi += v / total * libm::log(v * total / (row_sum[r] * col_sum[c]));
            }
        }
    }
    mi.max(0.0)
}

/// Entropy (nats) of a count vector after adding `smoothing` to every cell.
pub fn entropy(counts: &[f64], smoothing: f64) -> f64 {
    let total: f64 = counts.iter().sum::<f64>() + smoothing * counts.len() as f64;
    if total <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .map(|&c| (c + smoothing) / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * libm::log(p))
        .sum()
}

fn max_normalize(v: &mut [f64]) {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        v.iter_mut().for_each(|x| *x /= max);
    }
}

/// Raw (unnormalized) slot relevance: `I(Z_s; Y)` with add-one smoothing.
pub fn slot_mutual_information(
    grids: &[Vec<u32>],
    labels: &[u32],
    order: usize,
    slots: usize,
    classes: usize,
) -> Vec<f64> {
    let mut joint = vec![0.0; order * classes];
    (0..slots)
        .map(|s| {
            joint.iter_mut().for_each(|v| *v = 0.0);
            for (g, &y) in grids.iter().zip(labels) {
                joint[g[s] as usize * classes + y as usize] += 1.0;
            }
            mutual_information(&joint, order, classes, 1.0)
        })
        .collect()
}

/// Raw concept informativeness: `1 - H(Y | code = c) / ln |Y|`, add-one smoothed.
pub fn concept_purity(
    grids: &[Vec<u32>],
    labels: &[u32],
    order: usize,
    classes: usize,
) -> Vec<f64> {
    let mut counts = vec![vec![0.0; classes]; order];
    for (g, &y) in grids.iter().zip(labels) {
        for &c in g {
            counts[c as usize][y as usize] += 1.0;
        }
    }
    let norm = libm::log(classes as f64);
    counts
        .iter()
        .map(|row| (1.0 - entropy(row, 1.0) / norm).max(0.0))
        .collect()
}

/// Fits the SCI surrogate from quantized grids and labels.
pub fn estimate_sci(
    grids: &[Vec<u32>],
    labels: &[u32],
    order: usize,
    slots: usize,
    classes: usize,
) -> Result<SciModel> {
    if grids.is_empty() {
        bail!(Data, "no grids to estimate SCI from");
    }
    if grids.len() != labels.len() {
        bail!(
            Consistency,
            "{} grids but {} labels",
            grids.len(),
            labels.len()
        );
    }
    if order == 0 || slots == 0 || classes < 2 {
        bail!(Data, "need order >= 1, slots >= 1 and at least two classes");
    }
    if grids.iter().any(|g| g.len() != slots) {
        bail!(Consistency, "grid length differs from {slots} slots");
    }
    if grids.iter().flatten().any(|&c| c as usize >= order) {
        bail!(Consistency, "concept index outside order {order}");
    }
    if let Some(bad) = labels.iter().find(|&&y| y as usize >= classes) {
        bail!(Consistency, "label {bad} outside {classes} classes");
    }
    let mut slot_relevance = slot_mutual_information(grids, labels, order, slots, classes);
    let mut concept_informativeness = concept_purity(grids, labels, order, classes);
    max_normalize(&mut slot_relevance);
    max_normalize(&mut concept_informativeness);
    Ok(SciModel {
        slot_relevance,
        concept_informativeness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    #[test]
    fn deterministic_mapping_has_ln2_information() {
        // joint table [[2,0],[0,2]] over 4 samples
        let joint = [2.0, 0.0, 0.0, 2.0];
        assert!((mutual_information(&joint, 2, 2, 0.0) - LN_2).abs() < 1e-15);
        // add-one: [[3,1],[1,3]] / 8 with uniform marginals
        let oracle = 2.0 * (3.0 / 8.0) * libm::log(1.5) + 2.0 * (1.0 / 8.0) * libm::log(0.5);
        assert!((mutual_information(&joint, 2, 2, 1.0) - oracle).abs() < 1e-15);
    }

    #[test]
    fn independent_slot_has_no_information() {
        // slot 0 follows the label, slot 1 is balanced across labels
        let grids = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        let labels = [0, 0, 1, 1];
        let raw = slot_mutual_information(&grids, &labels, 2, 2, 2);
        assert!(raw[1].abs() < 1e-15);
        assert!(raw[0] > 0.0);
    }

    #[test]
    fn single_label_concept_is_pure() {
        let counts = [5.0, 0.0];
        assert_eq!(entropy(&counts, 0.0), 0.0);
        let grids = vec![vec![0, 1], vec![0, 1], vec![1, 1]];
        let labels = [0, 0, 1];
        let g = concept_purity(&grids, &labels, 2, 2);
        assert!(g[0] > g[1]);
    }

    #[test]
    fn scores_stay_inside_open_interval() {
        let grids = vec![vec![0, 2, 1], vec![1, 2, 0], vec![0, 2, 3], vec![3, 2, 1]];
        let labels = [0, 1, 0, 1];
        let model = estimate_sci(&grids, &labels, 4, 3, 2).unwrap();
        for g in &grids {
            let grid = model.grid(g.clone()).unwrap();
            assert!(grid.per_slot_sci.iter().all(|&v| v > 0.0 && v < 1.0));
        }
        assert!(model
            .slot_relevance
            .iter()
            .all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(
            estimate_sci(&[], &[], 4, 3, 2),
            Err(crate::Error::Data(_))
        ));
    }
}
