//! Gray-coded square QAM baselines and the SCI-weighted learned constellation.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::square_qam_bits;

/// `M` complex points under an average-power budget, plus the concept-to-point
/// labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstellationRepr", into = "ConstellationRepr")]
pub struct Constellation {
    points: Vec<Complex64>,
    power: f64,
    labeling: Vec<u32>,
    inverse: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct ConstellationRepr {
    points: Vec<[f64; 2]>,
    power: f64,
    labeling: Vec<u32>,
}

impl TryFrom<ConstellationRepr> for Constellation {
    type Error = Error;

    fn try_from(r: ConstellationRepr) -> Result<Self> {
        let points = r
            .points
            .iter()
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        Constellation::new(points, r.power, r.labeling)
    }
}

impl From<Constellation> for ConstellationRepr {
    fn from(c: Constellation) -> Self {
        Self {
            points: c.points.iter().map(|p| [p.re, p.im]).collect(),
            power: c.power,
            labeling: c.labeling,
        }
    }
}

impl Constellation {
    pub fn new(points: Vec<Complex64>, power: f64, labeling: Vec<u32>) -> Result<Self> {
        let m = points.len();
        if m == 0 {
            bail!(Data, "constellation needs at least one point");
        }
        if labeling.len() != m {
            bail!(
                Consistency,
                "labeling has {} entries for {m} points",
                labeling.len()
            );
        }
        if points
            .iter()
            .any(|p| !p.re.is_finite() || !p.im.is_finite())
            || !power.is_finite()
        {
            bail!(Numeric, "non-finite constellation coordinate");
        }
        let mut inverse = vec![u32::MAX; m];
        for (concept, &point) in labeling.iter().enumerate() {
            let slot = inverse
                .get_mut(point as usize)
                .ok_or_else(|| Error::Consistency(alloc::format!("point {point} outside {m}")))?;
            if *slot != u32::MAX {
                bail!(Consistency, "labeling maps two concepts to point {point}");
            }
            *slot = concept as u32;
        }
        Ok(Self {
            points,
            power,
            labeling,
            inverse,
        })
    }

    /// Points with the identity labeling.
    pub fn identity(points: Vec<Complex64>, power: f64) -> Result<Self> {
        let m = points.len() as u32;
        Self::new(points, power, (0..m).collect())
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn labeling(&self) -> &[u32] {
        &self.labeling
    }

    /// Point assigned to a concept.
    pub fn point_of(&self, concept: u32) -> Complex64 {
        self.points[self.labeling[concept as usize] as usize]
    }

    /// Concept carried by a point.
    pub fn concept_at(&self, point: usize) -> u32 {
        self.inverse[point]
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order() as f64
    }

    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.min((a - b).norm_sqr());
            }
        }
        libm::sqrt(best)
    }

    /// Same labeling, new coordinates.
    pub fn with_points(&self, points: Vec<Complex64>) -> Result<Self> {
        if points.len() != self.order() {
            bail!(
                Consistency,
                "{} points for order {}",
                points.len(),
                self.order()
            );
        }
        Self::new(points, self.power, self.labeling.clone())
    }
}

/// Binary-reflected Gray code.
pub fn gray_encode(v: u32) -> u32 {
    v ^ (v >> 1)
}

pub fn gray_decode(mut g: u32) -> u32 {
    let mut v = 0;
    while g != 0 {
        v ^= g;
        g >>= 1;
    }
    v
}

/// Square Gray-coded `M`-QAM with mean power exactly `power`.
///
/// Point `r * side + c` sits at in-phase level `c` and quadrature level `r`
/// on the odd-integer grid. The high half of a concept's bits selects the row
/// and the low half the column, each through the Gray code.
pub fn gray_qam(order: usize, power: f64) -> Result<Constellation> {
    let Some(bits) = square_qam_bits(order) else {
        bail!(Config, "unsupported QAM order {order}");
    };
    if !(power > 0.0) {
        bail!(Config, "power budget must be positive");
    }
    let half = bits / 2;
    let side = 1usize << half;
    let level = |k: usize| 2.0 * k as f64 - (side as f64 - 1.0);
    // mean of squared odd levels per axis is (side^2 - 1) / 3
    let scale = libm::sqrt(power / (2.0 * (side * side - 1) as f64 / 3.0));
    let mut points = Vec::with_capacity(order);
    for r in 0..side {
        for c in 0..side {
            points.push(Complex64::new(level(c) * scale, level(r) * scale));
        }
    }
    let mask = (1u32 << half) - 1;
    let labeling = (0..order as u32)
        .map(|concept| {
            let row = gray_decode(concept >> half) as usize;
            let col = gray_decode(concept & mask) as usize;
            (row * side + col) as u32
        })
        .collect();
    Constellation::new(points, power, labeling)
}

/// Outcome of [`normalize_power`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerStatus {
    Normalized,
    /// All points coincide; they were returned unchanged.
    Degenerate,
}

/// Centers points at zero mean and scales them to mean power `power`.
pub fn normalize_power(points: &mut [Complex64], power: f64) -> Result<PowerStatus> {
    if points.is_empty() {
        bail!(Data, "no points to normalize");
    }
    if points
        .iter()
        .any(|p| !p.re.is_finite() || !p.im.is_finite())
    {
        bail!(Numeric, "non-finite coordinate");
    }
    let m = points.len() as f64;
    let mean = points.iter().sum::<Complex64>() / m;
    let energy = points.iter().map(|p| (p - mean).norm_sqr()).sum::<f64>() / m;
    if energy == 0.0 {
        return Ok(PowerStatus::Degenerate);
    }
    let scale = libm::sqrt(power / energy);
    for p in points.iter_mut() {
        *p = (*p - mean) * scale;
    }
    Ok(PowerStatus::Normalized)
}

/// One transmission seen by the loss: the sent concept, what arrived, the
/// noise level it arrived under and its importance weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub concept: u32,
    pub received: Complex64,
    pub n0: f64,
    pub weight: f64,
}

fn check_observations(constellation: &Constellation, obs: &[Observation]) -> Result<()> {
    if obs.is_empty() {
        bail!(Data, "no observations");
    }
    for o in obs {
        if !(o.n0 > 0.0) {
            bail!(Config, "noise level N0 must be positive, got {}", o.n0);
        }
        if o.concept as usize >= constellation.order() {
            bail!(
                Consistency,
                "concept {} outside order {}",
                o.concept,
                constellation.order()
            );
        }
        if !(o.weight >= 0.0) {
            bail!(Config, "weights must be nonnegative");
        }
    }
    Ok(())
}

/// Per-point softmax over `-|y - x_i|^2 / N0` and the log-probability of the
/// sent point.
fn posterior(
    points: &[Complex64],
    received: Complex64,
    n0: f64,
    sent: usize,
    probs: &mut [f64],
) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (p, x) in probs.iter_mut().zip(points) {
        *p = -(received - x).norm_sqr() / n0;
        max = max.max(*p);
    }
    let logit_sent = probs[sent];
    let mut sum = 0.0;
    for p in probs.iter_mut() {
        *p = libm::exp(*p - max);
        sum += *p;
    }
    probs.iter_mut().for_each(|p| *p /= sum);
    logit_sent - max - libm::log(sum)
}

/// SCI-weighted cross-entropy of minimum-distance soft decisions, each
/// observation carrying its own `N0`.
pub fn weighted_cross_entropy(constellation: &Constellation, obs: &[Observation]) -> Result<f64> {
    check_observations(constellation, obs)?;
    let mut probs = vec![0.0; constellation.order()];
    let total: f64 = obs
        .iter()
        .map(|o| {
            let sent = constellation.labeling[o.concept as usize] as usize;
            -o.weight * posterior(&constellation.points, o.received, o.n0, sent, &mut probs)
        })
        .sum();
    Ok(total / obs.len() as f64)
}

/// Gradient of [`weighted_cross_entropy`] with respect to every point
/// coordinate (received symbols held fixed), indexed by point.
pub fn weighted_cross_entropy_gradient(
    constellation: &Constellation,
    obs: &[Observation],
) -> Result<Vec<Complex64>> {
    check_observations(constellation, obs)?;
    let m = constellation.order();
    let mut grad = vec![Complex64::new(0.0, 0.0); m];
    let mut probs = vec![0.0; m];
    let norm = 1.0 / obs.len() as f64;
    for o in obs {
        if o.weight == 0.0 {
            continue;
        }
        let sent = constellation.labeling[o.concept as usize] as usize;
        posterior(&constellation.points, o.received, o.n0, sent, &mut probs);
        let scale = o.weight * 2.0 / o.n0 * norm;
        for (i, (g, x)) in grad.iter_mut().zip(&constellation.points).enumerate() {
            let indicator = if i == sent { 1.0 } else { 0.0 };
            *g += (x - o.received) * (scale * (indicator - probs[i]));
        }
    }
    Ok(grad)
}

/// A symbol sent through the channel: the received value is the sent point
/// plus `noise`, so it moves with the point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub concept: u32,
    pub noise: Complex64,
    pub n0: f64,
    pub weight: f64,
}

fn received_observations(constellation: &Constellation, tx: &[Transmission]) -> Vec<Observation> {
    tx.iter()
        .map(|t| Observation {
            concept: t.concept,
            received: constellation.point_of(t.concept) + t.noise,
            n0: t.n0,
            weight: t.weight,
        })
        .collect()
}

/// [`weighted_cross_entropy`] of symbols passed through the channel with
/// fixed noise draws.
pub fn transmission_loss(constellation: &Constellation, tx: &[Transmission]) -> Result<f64> {
    weighted_cross_entropy(constellation, &received_observations(constellation, tx))
}

/// Gradient of [`transmission_loss`] with respect to every point coordinate,
/// differentiating through the received symbols as well. Indexed by point.
pub fn transmission_loss_gradient(
    constellation: &Constellation,
    tx: &[Transmission],
) -> Result<Vec<Complex64>> {
    let obs = received_observations(constellation, tx);
    check_observations(constellation, &obs)?;
    let m = constellation.order();
    let mut grad = vec![Complex64::new(0.0, 0.0); m];
    let mut probs = vec![0.0; m];
    let norm = 1.0 / obs.len() as f64;
    for o in &obs {
        if o.weight == 0.0 {
            continue;
        }
        let sent = constellation.labeling[o.concept as usize] as usize;
        posterior(&constellation.points, o.received, o.n0, sent, &mut probs);
        let scale = o.weight * 2.0 / o.n0 * norm;
        let mut pull = Complex64::new(0.0, 0.0);
        for ((i, g), x) in grad.iter_mut().enumerate().zip(&constellation.points) {
            if i != sent {
                let term = (x - o.received) * (scale * probs[i]);
                *g -= term;
                pull += term;
            }
        }
        grad[sent] += pull;
    }
    Ok(grad)
}

fn observations(
    sent: &[u32],
    received: &[Complex64],
    n0: f64,
    weights: &[f64],
) -> Result<Vec<Observation>> {
    if sent.len() != received.len() || sent.len() != weights.len() {
        bail!(
            Consistency,
            "{} sent, {} received, {} weights",
            sent.len(),
            received.len(),
            weights.len()
        );
    }
    if !(n0 > 0.0) {
        bail!(Config, "noise level N0 must be positive, got {n0}");
    }
    Ok(sent
        .iter()
        .zip(received)
        .zip(weights)
        .map(|((&concept, &received), &weight)| Observation {
            concept,
            received,
            n0,
            weight,
        })
        .collect())
}

/// `-(1/N) Σ_j I_j log softmax_j` with softmax over `-|ŷ_j - x_i|^2 / N0`.
pub fn qam_loss(
    constellation: &Constellation,
    sent: &[u32],
    received: &[Complex64],
    n0: f64,
    weights: &[f64],
) -> Result<f64> {
    weighted_cross_entropy(constellation, &observations(sent, received, n0, weights)?)
}

/// Exact gradient of [`qam_loss`] with respect to the point coordinates.
pub fn qam_loss_gradient(
    constellation: &Constellation,
    sent: &[u32],
    received: &[Complex64],
    n0: f64,
    weights: &[f64],
) -> Result<Vec<Complex64>> {
    weighted_cross_entropy_gradient(constellation, &observations(sent, received, n0, weights)?)
}

/// Adam moments over complex coordinates (real and imaginary parts independent).
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: Vec<Complex64>,
    second: Vec<Complex64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            first: vec![Complex64::new(0.0, 0.0); len],
            second: vec![Complex64::new(0.0, 0.0); len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Complex64], grad: &[Complex64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        let update = |m: &mut f64, v: &mut f64, g: f64, p: &mut f64| {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / c1) / (libm::sqrt(*v / c2) + self.epsilon);
        };
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            update(&mut m.re, &mut v.re, g.re, &mut p.re);
            update(&mut m.im, &mut v.im, g.im, &mut p.im);
        }
    }
}

/// Optimizer settings for [`train_constellation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub validation_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 4000,
            learning_rate: 1e-3,
            snr_min_db: -10.0,
            snr_max_db: 20.0,
            batch_size: 128,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            checkpoint_every: 200,
            validation_size: 1024,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.snr_min_db <= self.snr_max_db) {
            bail!(Config, "snr_min_db must not exceed snr_max_db");
        }
        if self.batch_size == 0 || self.checkpoint_every == 0 || self.validation_size == 0 {
            bail!(
                Config,
                "batch, checkpoint interval and validation size must be positive"
            );
        }
        if !(self.learning_rate > 0.0) {
            bail!(Config, "learning rate must be positive");
        }
        Ok(())
    }
}

/// Noise spectral density for an `E_s/N_0` in dB at power `power`.
pub fn noise_level(power: f64, snr_db: f64) -> f64 {
    power / libm::pow(10.0, snr_db / 10.0)
}

fn complex_noise(rng: &mut Rng, n0: f64) -> Complex64 {
    let s = libm::sqrt(n0 / 2.0);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

fn draw_batch(samples: &[(u32, f64)], size: usize, rng: &mut Rng) -> (Vec<u32>, Vec<f64>) {
    let mut concepts = Vec::with_capacity(size);
    let mut weights = Vec::with_capacity(size);
    for _ in 0..size {
        let (c, w) = samples[rng.random_range(0..samples.len())];
        concepts.push(c);
        weights.push(w);
    }
    let mean = weights.iter().sum::<f64>() / size as f64;
    if mean > 0.0 {
        weights.iter_mut().for_each(|w| *w /= mean);
    }
    (concepts, weights)
}

/// Fixed validation observations spread evenly over the training SNR range.
fn validation_set(
    constellation: &Constellation,
    samples: &[(u32, f64)],
    cfg: &TrainConfig,
) -> Vec<(u32, f64, f64, Complex64)> {
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &[1]));
    let (concepts, weights) = draw_batch(samples, cfg.validation_size, &mut rng);
    let span = cfg.snr_max_db - cfg.snr_min_db;
    (0..cfg.validation_size)
        .map(|k| {
            let frac = if cfg.validation_size > 1 {
                k as f64 / (cfg.validation_size - 1) as f64
            } else {
                0.5
            };
            let n0 = noise_level(constellation.power(), cfg.snr_min_db + frac * span);
            // unit-power noise draw, rescaled per constellation later
            let unit = complex_noise(&mut rng, 1.0);
            (concepts[k], weights[k], n0, unit)
        })
        .collect()
}

fn validation_loss(
    constellation: &Constellation,
    set: &[(u32, f64, f64, Complex64)],
) -> Result<f64> {
    let obs: Vec<Observation> = set
        .iter()
        .map(|&(concept, weight, n0, unit)| Observation {
            concept,
            received: constellation.point_of(concept) + unit * libm::sqrt(n0),
            n0,
            weight,
        })
        .collect();
    weighted_cross_entropy(constellation, &obs)
}

/// Trains point coordinates under the SCI-weighted loss.
///
/// Starts from the Gray grid with the identity labeling: point `c` sits where
/// Gray QAM places concept `c`. Each step draws a batch of `(concept, sci)`
/// samples, a uniform SNR in the configured range, transmits the batch over
/// AWGN, takes one Adam step on [`transmission_loss_gradient`] and renormalizes
/// power. The checkpoint with the lowest loss on a fixed validation batch is
/// returned.
pub fn train_constellation(
    samples: &[(u32, f64)],
    order: usize,
    power: f64,
    cfg: &TrainConfig,
) -> Result<Constellation> {
    cfg.validate()?;
    let init = gray_qam(order, power)?;
    let start = (0..order as u32).map(|c| init.point_of(c)).collect();
    let mut current = Constellation::identity(start, power)?;
    if cfg.steps == 0 {
        return Ok(current);
    }
    if samples.is_empty() {
        bail!(Data, "no training samples");
    }
    if let Some(bad) = samples.iter().find(|s| s.0 as usize >= order) {
        bail!(Consistency, "concept {} outside order {order}", bad.0);
    }
    let validation = validation_set(&current, samples, cfg);
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &[0]));
    let mut adam = Adam::new(order, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut points = current.points().to_vec();
    let mut best: Option<(f64, Constellation)> = None;
    for step in 1..=cfg.steps {
        let (concepts, weights) = draw_batch(samples, cfg.batch_size, &mut rng);
        let snr = rng.random_range(cfg.snr_min_db..=cfg.snr_max_db);
        let n0 = noise_level(power, snr);
        let tx: Vec<Transmission> = concepts
            .iter()
            .zip(&weights)
            .map(|(&concept, &weight)| Transmission {
                concept,
                noise: complex_noise(&mut rng, n0),
                n0,
                weight,
            })
            .collect();
        let grad = transmission_loss_gradient(&current, &tx)?;
        adam.step(&mut points, &grad);
        normalize_power(&mut points, power)?;
        current = current.with_points(points.clone())?;
        if step % cfg.checkpoint_every == 0 || step == cfg.steps {
            let loss = validation_loss(&current, &validation)?;
            if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                best = Some((loss, current.clone()));
            }
        }
    }
    Ok(best.map(|(_, c)| c).unwrap_or(current))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gray_four_qam() {
        let q = gray_qam(4, 1.0).unwrap();
        let a = core::f64::consts::FRAC_1_SQRT_2;
        for p in q.points() {
            assert!((p.re.abs() - a).abs() < 1e-15 && (p.im.abs() - a).abs() < 1e-15);
        }
        assert!((q.mean_power() - 1.0).abs() < 1e-15);
        assert!((q.min_distance() - libm::sqrt(2.0)).abs() < 1e-15);
    }

    #[test]
    fn gray_sixteen_qam_levels() {
        let q = gray_qam(16, 1.0).unwrap();
        let s = 1.0 / libm::sqrt(10.0);
        let mut levels: Vec<f64> = q.points().iter().map(|p| p.re / s).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(levels.len(), 4);
        for (l, e) in levels.iter().zip([-3.0, -1.0, 1.0, 3.0]) {
            assert!((l - e).abs() < 1e-12);
        }
        assert!((s - 0.316228).abs() < 1e-6);
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        for m in crate::SQUARE_QAM_ORDERS {
            let q = gray_qam(m, 1.0).unwrap();
            assert!((q.mean_power() - 1.0).abs() < 1e-12);
            let d = q.min_distance();
            // exhaustive pair scan over concepts
            for a in 0..m as u32 {
                for b in a + 1..m as u32 {
                    if ((q.point_of(a) - q.point_of(b)).norm() - d).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "M={m} concepts {a},{b}");
                    }
                }
            }
        }
        assert!(matches!(gray_qam(8, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn gray_code_round_trip() {
        for v in 0..1024 {
            assert_eq!(gray_decode(gray_encode(v)), v);
            assert_eq!((gray_encode(v) ^ gray_encode(v + 1)).count_ones(), 1);
        }
    }

    #[test]
    fn normalize_examples() {
        let mut pts = vec![c(2.0, 0.0), c(-2.0, 0.0)];
        assert_eq!(
            normalize_power(&mut pts, 1.0).unwrap(),
            PowerStatus::Normalized
        );
        assert_eq!(pts, vec![c(1.0, 0.0), c(-1.0, 0.0)]);

        let q = gray_qam(4, 1.0).unwrap();
        let mut pts = q.points().to_vec();
        normalize_power(&mut pts, 1.0).unwrap();
        for (a, b) in pts.iter().zip(q.points()) {
            assert!((a - b).norm() < 1e-15);
        }

        let mut zeros = vec![c(0.0, 0.0); 3];
        assert_eq!(
            normalize_power(&mut zeros, 1.0).unwrap(),
            PowerStatus::Degenerate
        );
        assert_eq!(zeros, vec![c(0.0, 0.0); 3]);

        let mut bad = vec![c(f64::NAN, 0.0)];
        assert!(matches!(
            normalize_power(&mut bad, 1.0),
            Err(Error::Numeric(_))
        ));
    }

    proptest! {
        #[test]
        fn normalize_hits_power(coords in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..40), power in 0.1f64..10.0) {
            let mut pts: Vec<Complex64> = coords.iter().map(|&(a, b)| c(a, b)).collect();
            if normalize_power(&mut pts, power).unwrap() == PowerStatus::Normalized {
                let mean = pts.iter().sum::<Complex64>() / pts.len() as f64;
                let p = pts.iter().map(|z| z.norm_sqr()).sum::<f64>() / pts.len() as f64;
                prop_assert!((p - power).abs() < 1e-9 * power.max(1.0));
                prop_assert!(mean.norm() < 1e-9);
            }
        }
    }

    fn two_points() -> Constellation {
        Constellation::identity(vec![c(1.0, 0.0), c(-1.0, 0.0)], 1.0).unwrap()
    }

    #[test]
    fn loss_by_hand() {
        let q = two_points();
        let loss = qam_loss(&q, &[0], &[c(1.0, 0.0)], 1.0, &[1.0]).unwrap();
        let expected = -libm::log(1.0 / (1.0 + libm::exp(-4.0)));
        assert!((loss - expected).abs() < 1e-15);
        assert!((loss - 0.018150).abs() < 1e-6);
        assert_eq!(
            qam_loss(&q, &[0], &[c(-1.0, 0.0)], 1.0, &[0.0]).unwrap(),
            0.0
        );
        assert!(matches!(
            qam_loss(&q, &[0], &[c(1.0, 0.0)], 0.0, &[1.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn loss_is_linear_in_weights() {
        let q = gray_qam(16, 1.0).unwrap();
        let sent = [1, 5, 9];
        let rx = [c(0.1, 0.2), c(-0.3, 0.5), c(0.7, -0.7)];
        let w = [0.3, 1.2, 0.8];
        let w2: Vec<f64> = w.iter().map(|v| v * 2.0).collect();
        let a = qam_loss(&q, &sent, &rx, 0.5, &w).unwrap();
        let b = qam_loss(&q, &sent, &rx, 0.5, &w2).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-14);
    }

    #[test]
    fn loss_is_rotation_invariant() {
        let q = gray_qam(16, 1.0).unwrap();
        let rot = Complex64::from_polar(1.0, 0.7);
        let qr = q
            .with_points(q.points().iter().map(|p| p * rot).collect())
            .unwrap();
        let sent = [0, 3, 12];
        let rx = [c(0.1, 0.2), c(-0.3, 0.5), c(0.7, -0.7)];
        let rxr: Vec<Complex64> = rx.iter().map(|p| p * rot).collect();
        let a = qam_loss(&q, &sent, &rx, 0.3, &[1.0; 3]).unwrap();
        let b = qam_loss(&qr, &sent, &rxr, 0.3, &[1.0; 3]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn saturated_and_zero_weight_gradients() {
        let q = Constellation::identity(vec![c(5.0, 0.0), c(-5.0, 0.0)], 25.0).unwrap();
        let g = qam_loss_gradient(&q, &[0], &[c(5.0, 0.0)], 1.0, &[1.0]).unwrap();
        // the competing point carries softmax weight e^-100; its pull is 2*10*e^-100
        assert!(g.iter().all(|v| v.norm() <= libm::exp(-4.0) * 20.0));
        assert!(g[0].norm() == 0.0);
        let z = qam_loss_gradient(
            &gray_qam(16, 1.0).unwrap(),
            &[2, 7],
            &[c(0.1, 0.1), c(0.4, -0.9)],
            0.2,
            &[0.0, 0.0],
        )
        .unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn training_with_zero_steps_returns_gray_geometry() {
        let cfg = TrainConfig {
            steps: 0,
            ..Default::default()
        };
        let t = train_constellation(&[(0, 0.5)], 16, 1.0, &cfg).unwrap();
        let g = gray_qam(16, 1.0).unwrap();
        assert_eq!(t.labeling(), &(0..16).collect::<Vec<u32>>()[..]);
        for c in 0..16 {
            assert_eq!(t.point_of(c), g.point_of(c));
        }
    }

    #[test]
    fn training_is_deterministic_and_keeps_power() {
        let samples: Vec<(u32, f64)> = (0..64)
            .map(|i| (i % 16, if i % 16 == 3 { 0.9 } else { 0.1 }))
            .collect();
        let cfg = TrainConfig {
            steps: 300,
            seed: 12,
            validation_size: 128,
            ..Default::default()
        };
        let a = train_constellation(&samples, 16, 1.0, &cfg).unwrap();
        let b = train_constellation(&samples, 16, 1.0, &cfg).unwrap();
        assert_eq!(a, b);
        assert!((a.mean_power() - 1.0).abs() < 1e-9);
    }
}
