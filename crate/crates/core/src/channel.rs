//! AWGN link: modulation, noise, minimum-distance demapping and error counts.
//!
//! SNR is `E_s/N_0 = P / σ²` per complex symbol; each noise component has
//! variance `σ² / 2`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constellation::{noise_level, Constellation};
use crate::error::{bail, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub seed: u64,
}

/// Error accounting of one simulated transmission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkResult {
    pub symbols_sent: u64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
    pub bits_per_symbol: u32,
    /// Row-major `M x M` counts, sent concept by decoded concept.
    pub confusion: Vec<u64>,
}

impl LinkResult {
    pub fn empty(order: usize) -> Self {
        Self {
            symbols_sent: 0,
            symbol_errors: 0,
            bit_errors: 0,
            bits_per_symbol: bits_for(order),
            confusion: vec![0; order * order],
        }
    }

    pub fn order(&self) -> usize {
        libm::sqrt(self.confusion.len() as f64) as usize
    }

    pub fn record(&mut self, sent: u32, decoded: u32) {
        let m = self.order();
        self.symbols_sent += 1;
        if sent != decoded {
            self.symbol_errors += 1;
            self.bit_errors += u64::from((sent ^ decoded).count_ones());
        }
        self.confusion[sent as usize * m + decoded as usize] += 1;
    }

    pub fn merge(&mut self, other: &LinkResult) {
        self.symbols_sent += other.symbols_sent;
        self.symbol_errors += other.symbol_errors;
        self.bit_errors += other.bit_errors;
        for (a, b) in self.confusion.iter_mut().zip(&other.confusion) {
            *a += b;
        }
    }

    pub fn ser(&self) -> f64 {
        if self.symbols_sent == 0 {
            return 0.0;
        }
        self.symbol_errors as f64 / self.symbols_sent as f64
    }

    pub fn ber(&self) -> f64 {
        if self.symbols_sent == 0 || self.bits_per_symbol == 0 {
            return 0.0;
        }
        self.bit_errors as f64 / (self.bits_per_symbol as f64 * self.symbols_sent as f64)
    }
}

fn bits_for(order: usize) -> u32 {
    if order <= 1 {
        0
    } else {
        usize::BITS - (order - 1).leading_zeros()
    }
}

/// Adds complex Gaussian noise of total variance `P / 10^(snr/10)`.
pub fn awgn(symbols: &[Complex64], snr_db: f64, power: f64, seed: u64) -> Vec<Complex64> {
    let sigma = libm::sqrt(noise_level(power, snr_db) / 2.0);
    let mut rng = rng_from_seed(seed);
    symbols
        .iter()
        .map(|&s| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            s + Complex64::new(re * sigma, im * sigma)
        })
        .collect()
}

/// Nearest point by Euclidean distance (ties to the lower point index),
/// mapped back to its concept.
pub fn demap(constellation: &Constellation, received: Complex64) -> Result<u32> {
    if !received.re.is_finite() || !received.im.is_finite() {
        bail!(Numeric, "received symbol is not finite");
    }
    Ok(constellation.concept_at(nearest_point(constellation.points(), received)))
}

pub(crate) fn nearest_point(points: &[Complex64], received: Complex64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (received - p).norm_sqr();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Modulates concepts, passes them through AWGN and demaps; returns the
/// decoded concepts in order.
pub fn transmit(
    constellation: &Constellation,
    concepts: &[u32],
    cfg: &ChannelConfig,
) -> Result<Vec<u32>> {
    let m = constellation.order();
    if let Some(bad) = concepts.iter().find(|&&c| c as usize >= m) {
        bail!(Consistency, "concept {bad} outside order {m}");
    }
    if !cfg.snr_db.is_finite() {
        bail!(Numeric, "SNR must be finite");
    }
    let tx: Vec<Complex64> = concepts
        .iter()
        .map(|&c| constellation.point_of(c))
        .collect();
    awgn(&tx, cfg.snr_db, constellation.power(), cfg.seed)
        .into_iter()
        .map(|y| demap(constellation, y))
        .collect()
}

/// [`transmit`] plus error counting. Bit errors are Hamming distances between
/// sent and decoded concept indices.
pub fn simulate_link(
    constellation: &Constellation,
    concepts: &[u32],
    cfg: &ChannelConfig,
) -> Result<LinkResult> {
    let decoded = transmit(constellation, concepts, cfg)?;
    let mut result = LinkResult::empty(constellation.order());
    for (&sent, &got) in concepts.iter().zip(&decoded) {
        result.record(sent, got);
    }
    Ok(result)
}
