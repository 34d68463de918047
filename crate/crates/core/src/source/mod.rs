//! Concept vocabulary, relevance scoring, source statistics, Top-K payload
//! selection and receiver-side reconstruction.

mod codebook;
mod sci;
mod stats;

use alloc::vec;
use alloc::vec::Vec;

pub use codebook::{train_codebook, ConceptCodebook, KMeansConfig};
pub use sci::{
    concept_purity, entropy, estimate_sci, mutual_information, slot_mutual_information,
    ConceptGrid, SciModel,
};
pub use stats::{compute_statistics, SourceStatistics};

use crate::error::{bail, Result};
use crate::ingest::{patchify, unpatchify, PatchGeometry};

/// Quantizes every slot of an image.
pub fn quantize_image(
    codebook: &ConceptCodebook,
    image: &[f64],
    geometry: &PatchGeometry,
) -> Result<Vec<u32>> {
    patchify(image, geometry)?
        .patches
        .iter()
        .map(|p| codebook.quantize(p))
        .collect()
}

/// Positions of the `k` highest scores, ties to the lower slot, sorted ascending.
pub fn top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        bail!(Config, "K = {k} outside [1, {}]", scores.len());
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    Ok(order)
}

/// Scatters received `(slot, concept)` pairs into an `N`-slot grid, zero-fills
/// the rest, and reassembles the image.
pub fn reconstruct(
    codebook: &ConceptCodebook,
    received: &[(usize, u32)],
    geometry: &PatchGeometry,
) -> Result<Vec<f64>> {
    let n = geometry.num_slots();
    if codebook.dim() != geometry.patch_dim() {
        bail!(
            Consistency,
            "codebook dimension {} vs patch {}",
            codebook.dim(),
            geometry.patch_dim()
        );
    }
    let mut patches = vec![vec![0.0; geometry.patch_dim()]; n];
    let mut filled = vec![false; n];
    for &(slot, concept) in received {
        if slot >= n {
            bail!(Consistency, "slot {slot} outside {n}");
        }
        if filled[slot] {
            bail!(Consistency, "duplicate slot {slot}");
        }
        let Some(entry) = codebook.entries().get(concept as usize) else {
            bail!(Consistency, "concept {concept} outside the codebook");
        };
        filled[slot] = true;
        patches[slot].copy_from_slice(entry);
    }
    unpatchify(&patches, geometry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_setup() -> (ConceptCodebook, PatchGeometry) {
        let g = PatchGeometry::new(4, 4, 4, 2).unwrap();
        let cb = ConceptCodebook::from_entries(vec![
            vec![0.0; 4],
            vec![1.0; 4],
            vec![0.5, 0.0, 0.0, 0.5],
            vec![0.2; 4],
        ])
        .unwrap();
        (cb, g)
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k(&[0.9, 0.2, 0.5], 2).unwrap(), vec![0, 2]);
        assert_eq!(top_k(&[0.9, 0.2, 0.5], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(top_k(&[0.5, 0.5, 0.5], 2).unwrap(), vec![0, 1]);
        assert!(matches!(top_k(&[0.1], 0), Err(crate::Error::Config(_))));
        assert!(matches!(top_k(&[0.1], 2), Err(crate::Error::Config(_))));
    }

    #[test]
    fn full_payload_equals_quantized_image() {
        let (cb, g) = small_setup();
        let img: Vec<f64> = (0..16)
            .map(|i| if i % 3 == 0 { 0.9 } else { 0.1 })
            .collect();
        let idx = quantize_image(&cb, &img, &g).unwrap();
        let received: Vec<(usize, u32)> = idx.iter().copied().enumerate().collect();
        let rec = reconstruct(&cb, &received, &g).unwrap();
        let patches: Vec<Vec<f64>> = idx
            .iter()
            .map(|&c| cb.entries()[c as usize].clone())
            .collect();
        assert_eq!(rec, unpatchify(&patches, &g).unwrap());
    }

    #[test]
    fn empty_payload_is_black() {
        let (cb, g) = small_setup();
        assert_eq!(reconstruct(&cb, &[], &g).unwrap(), vec![0.0; 16]);
    }

    #[test]
    fn duplicate_slot_rejected() {
        let (cb, g) = small_setup();
        assert!(matches!(
            reconstruct(&cb, &[(1, 1), (1, 2)], &g),
            Err(crate::Error::Consistency(_))
        ));
    }

    #[test]
    fn half_payload_masks_unselected_slots() {
        let g = PatchGeometry::new(28, 28, 32, 4).unwrap();
        let entries: Vec<Vec<f64>> = (0..16).map(|k| vec![(k as f64 + 1.0) / 16.0; 16]).collect();
        let cb = ConceptCodebook::from_entries(entries).unwrap();
        let slots: Vec<usize> = (0..64).filter(|s| s % 2 == 1).collect();
        let received: Vec<(usize, u32)> = slots.iter().map(|&s| (s, (s % 16) as u32)).collect();
        let rec = reconstruct(&cb, &received, &g).unwrap();
        // slot-mask oracle: every pixel reads the centroid of its slot or zero
        for row in 0..28 {
            for col in 0..28 {
                let (slot, _) = g.locate(row, col);
                let expected = if slot % 2 == 1 {
                    ((slot % 16) as f64 + 1.0) / 16.0
                } else {
                    0.0
                };
                assert_eq!(rec[row * 28 + col], expected);
            }
        }
    }

    proptest! {
        #[test]
        fn top_k_matches_sort_and_is_scale_invariant(
            scores in proptest::collection::vec(0.0f64..1.0, 5..40),
            exponent in -20i32..20,
        ) {
            let k = 5;
            let picked = top_k(&scores, k).unwrap();
            let mut sorted: Vec<(f64, usize)> = scores.iter().copied().zip(0..).collect();
            sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let mut oracle: Vec<usize> = sorted[..k].iter().map(|p| p.1).collect();
            oracle.sort_unstable();
            prop_assert_eq!(&picked, &oracle);
            // power-of-two factors rescale exactly
            let scale = libm::ldexp(1.0, exponent);
            let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
            prop_assert_eq!(top_k(&scaled, k).unwrap(), picked);
        }
    }
}
