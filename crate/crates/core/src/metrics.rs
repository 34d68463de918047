//! Semantic symbol vulnerability (SSV), its SCI-weighted mean, and the
//! semantic protection probability (SPP).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{bail, Result};
use crate::source::SourceStatistics;

fn check(constellation: &Constellation, stats: &SourceStatistics) -> Result<()> {
    if constellation.order() != stats.order() {
        bail!(
            Consistency,
            "constellation has {} points, statistics {} symbols",
            constellation.order(),
            stats.order()
        );
    }
    Ok(())
}

/// `S_i = M² Σ_{j≠i} P(i,j) exp(-|x_i - x_j|²)`, distances taken between the
/// points assigned to concepts `i` and `j`.
pub fn ssv_per_symbol(constellation: &Constellation, stats: &SourceStatistics) -> Result<Vec<f64>> {
    check(constellation, stats)?;
    let m = stats.order();
    let scale = (m * m) as f64;
    let points: Vec<_> = (0..m as u32).map(|c| constellation.point_of(c)).collect();
    Ok((0..m)
        .map(|i| {
            let row = &stats.cooccurrence[i * m..(i + 1) * m];
            let sum: f64 = row
                .iter()
                .enumerate()
                .filter(|&(j, &p)| j != i && p != 0.0)
                .map(|(j, &p)| p * libm::exp(-(points[i] - points[j]).norm_sqr()))
                .sum();
            scale * sum
        })
        .collect())
}

fn weighted_mean(ssv: &[f64], stats: &SourceStatistics) -> f64 {
    ssv.iter()
        .zip(&stats.avg_sci)
        .map(|(s, i)| s * i)
        .sum::<f64>()
        / ssv.len() as f64
}

/// `S_w = (1/M) Σ_i Ī_i S_i`.
pub fn weighted_ssv(constellation: &Constellation, stats: &SourceStatistics) -> Result<f64> {
    Ok(weighted_mean(&ssv_per_symbol(constellation, stats)?, stats))
}

fn protection(ssv: &[f64], stats: &SourceStatistics) -> Option<f64> {
    let top = stats.top_set();
    if top.is_empty() {
        return None;
    }
    let mu = ssv.iter().sum::<f64>() / ssv.len() as f64;
    let protected = top.iter().filter(|&&i| ssv[i] < mu).count();
    Some(protected as f64 / top.len() as f64)
}

/// Fraction of above-average-SCI symbols whose `S_i` is strictly below the
/// mean `S_i`; `None` when no symbol is above average.
pub fn spp(constellation: &Constellation, stats: &SourceStatistics) -> Result<Option<f64>> {
    Ok(protection(&ssv_per_symbol(constellation, stats)?, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityReport {
    pub per_symbol_ssv: Vec<f64>,
    pub weighted_ssv: f64,
    pub spp: Option<f64>,
    pub mean_vulnerability: f64,
    pub top_set: Vec<usize>,
    pub delta: f64,
    pub gamma: f64,
}

pub fn vulnerability_report(
    constellation: &Constellation,
    stats: &SourceStatistics,
) -> Result<VulnerabilityReport> {
    let ssv = ssv_per_symbol(constellation, stats)?;
    Ok(VulnerabilityReport {
        weighted_ssv: weighted_mean(&ssv, stats),
        spp: protection(&ssv, stats),
        mean_vulnerability: ssv.iter().sum::<f64>() / ssv.len() as f64,
        top_set: stats.top_set(),
        delta: stats.delta,
        gamma: stats.gamma,
        per_symbol_ssv: ssv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use num_complex::Complex64;

    fn pair(avg: [f64; 2]) -> (Constellation, SourceStatistics) {
        let c = Constellation::identity(
            vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            1.0,
        )
        .unwrap();
        let s = SourceStatistics::from_parts(avg.to_vec(), vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        (c, s)
    }

    #[test]
    fn two_point_values() {
        let (c, s) = pair([0.5, 0.5]);
        let ssv = ssv_per_symbol(&c, &s).unwrap();
        let e4 = libm::exp(-4.0);
        for v in &ssv {
            assert!((v - 2.0 * e4).abs() < 1e-15);
            assert!((v - 0.0366313).abs() < 1e-7);
        }
        let w = weighted_ssv(&c, &s).unwrap();
        assert!((w - e4).abs() < 1e-15);
        assert!((w - 0.0183156).abs() < 1e-7);
    }

    #[test]
    fn linear_in_importance_and_zero_without_pairs() {
        let (c, s) = pair([0.3, 0.6]);
        let (_, s3) = pair([0.9, 1.8]);
        let a = weighted_ssv(&c, &s).unwrap();
        let b = weighted_ssv(&c, &s3).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-15);
        let z = SourceStatistics::from_parts(vec![0.5, 0.5], vec![0.0; 4]).unwrap();
        assert_eq!(weighted_ssv(&c, &z).unwrap(), 0.0);
        assert_eq!(ssv_per_symbol(&c, &z).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn protection_examples() {
        let stats = SourceStatistics::from_parts(vec![0.9, 0.1, 0.1, 0.1], vec![0.0; 16]).unwrap();
        assert_eq!(protection(&[0.1, 0.5, 0.5, 0.5], &stats), Some(1.0));
        // a top symbol exactly at the mean is not protected
        assert_eq!(protection(&[0.4, 0.4, 0.4, 0.4], &stats), Some(0.0));
        let flat = SourceStatistics::from_parts(vec![0.2; 4], vec![0.0; 16]).unwrap();
        assert_eq!(protection(&[0.1, 0.5, 0.5, 0.5], &flat), None);
    }

    #[test]
    fn order_mismatch() {
        let (c, _) = pair([0.5, 0.5]);
        let s = SourceStatistics::from_parts(vec![0.5; 3], vec![0.0; 9]).unwrap();
        assert!(matches!(
            ssv_per_symbol(&c, &s),
            Err(crate::Error::Consistency(_))
        ));
    }
}
