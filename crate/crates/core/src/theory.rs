//! Stationarity, protection-gap and BER-paradox checks for importance-aware
//! constellations.
//!
//! With `w_ij = (Ī_i + Ī_j) P(i,j) exp(-|x_i - x_j|²)` and the force
//! `F_i = Σ_j w_ij (x_i - x_j)`, the weighted SSV has gradient `-2M F_i` at
//! the point of concept `i`. A power-constrained minimizer balances that force
//! against a single multiplier `ζ`: `(2ζ/M) x_i = 2 F_i`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::channel::{simulate_link, ChannelConfig, LinkResult};
use crate::constellation::{normalize_power, Constellation};
use crate::error::{bail, Result};
use crate::metrics::weighted_ssv;
use crate::rng::{derive_seed, rng_from_seed};
use crate::source::SourceStatistics;

const SYMMETRY_TOL: f64 = 1e-12;

fn check(constellation: &Constellation, stats: &SourceStatistics) -> Result<()> {
    if constellation.order() != stats.order() {
        bail!(
            Consistency,
            "constellation has {} points, statistics {} symbols",
            constellation.order(),
            stats.order()
        );
    }
    if !stats.is_symmetric(SYMMETRY_TOL) {
        bail!(Consistency, "co-occurrence matrix is not symmetric");
    }
    Ok(())
}

fn concept_points(constellation: &Constellation) -> Vec<Complex64> {
    (0..constellation.order() as u32)
        .map(|c| constellation.point_of(c))
        .collect()
}

/// Pairwise contribution of concept `j` to the SSV gradient at concept `i`:
/// `-2M (Ī_i + Ī_j) P(i,j) exp(-|x_i - x_j|²) (x_i - x_j)`.
pub fn pairwise_gradient_term(
    constellation: &Constellation,
    stats: &SourceStatistics,
    i: usize,
    j: usize,
) -> Complex64 {
    let m = stats.order();
    let xi = constellation.point_of(i as u32);
    let xj = constellation.point_of(j as u32);
    let w =
        (stats.avg_sci[i] + stats.avg_sci[j]) * stats.p(i, j) * libm::exp(-(xi - xj).norm_sqr());
    (xi - xj) * (-2.0 * m as f64 * w)
}

/// Forces `F_i` indexed by concept.
fn forces(points: &[Complex64], stats: &SourceStatistics) -> Vec<Complex64> {
    let m = points.len();
    (0..m)
        .map(|i| {
            let mut f = Complex64::new(0.0, 0.0);
            for j in 0..m {
                let p = stats.p(i, j);
                if j == i || p == 0.0 {
                    continue;
                }
                let d = points[i] - points[j];
                f += d * ((stats.avg_sci[i] + stats.avg_sci[j]) * p * libm::exp(-d.norm_sqr()));
            }
            f
        })
        .collect()
}

/// Gradient of the weighted SSV, indexed by point.
pub fn ssv_gradient(
    constellation: &Constellation,
    stats: &SourceStatistics,
) -> Result<Vec<Complex64>> {
    check(constellation, stats)?;
    let m = stats.order();
    let f = forces(&concept_points(constellation), stats);
    let mut grad = vec![Complex64::new(0.0, 0.0); m];
    for (concept, fi) in f.iter().enumerate() {
        grad[constellation.labeling()[concept] as usize] = fi * (-2.0 * m as f64);
    }
    Ok(grad)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

fn norm(a: &[Complex64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Removes the component of `grad` along the power-constraint normal `points`.
pub fn project_out(grad: &[Complex64], points: &[Complex64]) -> Vec<Complex64> {
    let pp = dot(points, points);
    if pp == 0.0 {
        return grad.to_vec();
    }
    let k = dot(grad, points) / pp;
    grad.iter().zip(points).map(|(g, x)| g - x * k).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub zeta_star: f64,
    pub kkt_residual_max: f64,
    pub kkt_residual_mean: f64,
    pub projected_gradient_norm: f64,
    pub is_stationary: bool,
}

/// Residual of the force-balance condition with a least-squares multiplier.
pub fn kkt_residual(
    constellation: &Constellation,
    stats: &SourceStatistics,
    tol: f64,
) -> Result<StationarityReport> {
    check(constellation, stats)?;
    let m = stats.order() as f64;
    let x = concept_points(constellation);
    let energy = dot(&x, &x);
    if energy == 0.0 {
        bail!(Degenerate, "all points at the origin");
    }
    let f = forces(&x, stats);
    let zeta = m * dot(&x, &f) / energy;
    let residuals: Vec<f64> = x
        .iter()
        .zip(&f)
        .map(|(xi, fi)| (xi * (2.0 * zeta / m) - fi * 2.0).norm())
        .collect();
    let max = residuals.iter().copied().fold(0.0, f64::max);
    let mean = residuals.iter().sum::<f64>() / m;
    let grad = ssv_gradient(constellation, stats)?;
    let projected = norm(&project_out(&grad, constellation.points()));
    Ok(StationarityReport {
        zeta_star: zeta,
        kkt_residual_max: max,
        kkt_residual_mean: mean,
        projected_gradient_norm: projected,
        is_stationary: max <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub steps: usize,
    pub initial_step: f64,
    /// Stop once the projected gradient norm falls below this.
    pub tol: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            initial_step: 0.05,
            tol: 1e-9,
        }
    }
}

/// Projected gradient descent on the weighted SSV under the power budget,
/// with backtracking so that every accepted step decreases the objective.
pub fn minimize_ssv(
    start: &Constellation,
    stats: &SourceStatistics,
    cfg: &DescentConfig,
) -> Result<Constellation> {
    check(start, stats)?;
    let power = start.power();
    let mut current = start.clone();
    let mut value = weighted_ssv(&current, stats)?;
    let mut step = cfg.initial_step;
    for _ in 0..cfg.steps {
        let grad = ssv_gradient(&current, stats)?;
        if norm(&project_out(&grad, current.points())) < cfg.tol {
            break;
        }
        let mut accepted = false;
        while step > 1e-16 {
            let mut trial: Vec<Complex64> = current
                .points()
                .iter()
                .zip(&grad)
                .map(|(x, g)| x - g * step)
                .collect();
            normalize_power(&mut trial, power)?;
            let candidate = current.with_points(trial)?;
            let v = weighted_ssv(&candidate, stats)?;
            if v < value {
                current = candidate;
                value = v;
                accepted = true;
                step *= 1.2;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(current)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub empirical_gap: f64,
    pub bound_value: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub w_max: f64,
    pub zeta_star: f64,
    /// Whether the empirical gap meets the bound (exploratory).
    pub bound_holds: bool,
}

/// Empirical protection gap between a Gray baseline and an optimized
/// constellation, next to the theoretical lower bound
/// `δ γ M / (1 + ζ*/w_max) [exp(-d_min²) - exp(-d_max²)]`.
pub fn gap_bound(
    stats: &SourceStatistics,
    gray: &Constellation,
    optimized: &Constellation,
    power: f64,
) -> Result<GapReport> {
    if gray.order() != optimized.order() || gray.order() != stats.order() {
        bail!(Consistency, "constellations and statistics disagree on M");
    }
    let m = stats.order();
    let d_min = gray.min_distance();
    let d_max = 2.0 * libm::sqrt(m as f64 * power);
    let mut w_max: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                w_max = w_max.max((stats.avg_sci[i] + stats.avg_sci[j]) * stats.p(i, j));
            }
        }
    }
    let zeta = kkt_residual(optimized, stats, 0.0)?.zeta_star;
    let numerator = stats.delta * stats.gamma * m as f64;
    let bound_value = if numerator == 0.0 || w_max == 0.0 {
        0.0
    } else {
        numerator / (1.0 + zeta / w_max) * (libm::exp(-d_min * d_min) - libm::exp(-d_max * d_max))
    };
    let empirical_gap = weighted_ssv(gray, stats)? - weighted_ssv(optimized, stats)?;
    Ok(GapReport {
        empirical_gap,
        bound_value,
        d_min,
        d_max,
        w_max,
        zeta_star: zeta,
        bound_holds: empirical_gap >= bound_value,
    })
}

/// Link outcome of one constellation at one SNR in the BER-paradox check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParadoxSide {
    pub ber: f64,
    pub ser: f64,
    /// Share of symbol errors whose sent symbol is above-average importance.
    pub semantic_error_rate: f64,
    /// Errors on above-average-importance symbols per symbol sent.
    pub critical_error_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParadoxPoint {
    pub snr_db: f64,
    pub gray: ParadoxSide,
    pub learned: ParadoxSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadoxReport {
    pub weighted_ssv_gray: f64,
    pub weighted_ssv_learned: f64,
    pub points: Vec<ParadoxPoint>,
}

fn side(link: &LinkResult, top: &[bool]) -> ParadoxSide {
    let m = link.order();
    let mut critical = 0u64;
    for (i, &is_top) in top.iter().enumerate() {
        if is_top {
            critical += (0..m)
                .filter(|&j| j != i)
                .map(|j| link.confusion[i * m + j])
                .sum::<u64>();
        }
    }
    let frac = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    ParadoxSide {
        ber: link.ber(),
        ser: link.ser(),
        semantic_error_rate: frac(critical, link.symbol_errors),
        critical_error_rate: frac(critical, link.symbols_sent),
    }
}

/// Compares average BER and semantic errors of a Gray baseline and a learned
/// constellation over the same stream of source symbols.
///
/// `occurrences` holds the concept of every symbol occurrence in the source;
/// each SNR point draws `symbols_per_point` of them uniformly.
pub fn ber_paradox_check(
    gray: &Constellation,
    learned: &Constellation,
    stats: &SourceStatistics,
    occurrences: &[u32],
    snr_list: &[f64],
    symbols_per_point: usize,
    seed: u64,
) -> Result<ParadoxReport> {
    if gray.order() != learned.order() || gray.order() != stats.order() {
        bail!(Consistency, "constellations and statistics disagree on M");
    }
    if occurrences.is_empty() {
        bail!(Data, "no source symbols to transmit");
    }
    let mut top = vec![false; stats.order()];
    for i in stats.top_set() {
        top[i] = true;
    }
    let mut points = Vec::with_capacity(snr_list.len());
    for (k, &snr_db) in snr_list.iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(seed, &[k as u64, 0]));
        let stream: Vec<u32> = (0..symbols_per_point)
            .map(|_| occurrences[rng.random_range(0..occurrences.len())])
            .collect();
        let channel = ChannelConfig {
            snr_db,
            seed: derive_seed(seed, &[k as u64, 1]),
        };
        let g = simulate_link(gray, &stream, &channel)?;
        let l = simulate_link(learned, &stream, &channel)?;
        points.push(ParadoxPoint {
            snr_db,
            gray: side(&g, &top),
            learned: side(&l, &top),
        });
    }
    Ok(ParadoxReport {
        weighted_ssv_gray: weighted_ssv(gray, stats)?,
        weighted_ssv_learned: weighted_ssv(learned, stats)?,
        points,
    })
}
