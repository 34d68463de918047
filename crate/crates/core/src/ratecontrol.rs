//! Tabular Q-learning controller that picks the payload size `K` from the
//! binned channel SNR.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// `actions` payload sizes uniformly spaced over `[k_min, k_max]`, rounded.
pub fn action_space(k_min: usize, k_max: usize, actions: usize) -> Result<Vec<usize>> {
    if actions < 2 || k_min >= k_max {
        bail!(Config, "need at least two actions and k_min < k_max");
    }
    if actions > k_max - k_min + 1 {
        bail!(Config, "{actions} actions do not fit in [{k_min}, {k_max}]");
    }
    let span = (k_max - k_min) as f64 / (actions - 1) as f64;
    let mut ks: Vec<usize> = (0..actions)
        .map(|i| libm::round(k_min as f64 + i as f64 * span) as usize)
        .collect();
    ks.dedup();
    Ok(ks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub lambda_ber: f64,
    pub alpha: f64,
    pub quality_threshold: f64,
    pub edge_penalty: f64,
    pub adapt_coeff: f64,
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda_ber: 10.0,
            alpha: 0.2,
            quality_threshold: 0.85,
            edge_penalty: 0.1,
            adapt_coeff: 0.1,
            k_min: 5,
            k_max: 64,
        }
    }
}

/// `Q_task + B_comp + B_a - λ BER - P(K)`.
///
/// The compression bonus `α ln(N/K)` applies only above the quality
/// threshold. The adaptation bonus favors small `K` at high normalized SNR and
/// large `K` at low SNR. `P(K)` penalizes the two extreme payload sizes.
pub fn reward(
    q_task: f64,
    k: usize,
    n: usize,
    ber: f64,
    snr_norm: f64,
    cfg: &RewardConfig,
) -> Result<f64> {
    if k == 0 || k > n {
        bail!(Config, "K = {k} outside [1, {n}]");
    }
    let frac = k as f64 / n as f64;
    let compression = if q_task > cfg.quality_threshold {
        cfg.alpha * libm::log(n as f64 / k as f64)
    } else {
        0.0
    };
    let adapt = cfg.adapt_coeff * (snr_norm * (1.0 - frac) + (1.0 - snr_norm) * frac);
    let edge = if k == cfg.k_min || k == cfg.k_max {
        cfg.edge_penalty
    } else {
        0.0
    };
    Ok(q_task + compression + adapt - cfg.lambda_ber * ber - edge)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub bins: usize,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub epsilon: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    pub learning_rate: f64,
    pub discount: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            bins: 16,
            snr_min_db: -10.0,
            snr_max_db: 20.0,
            epsilon: 1.0,
            epsilon_min: 0.01,
            epsilon_decay: 0.997,
            learning_rate: 0.1,
            discount: 0.99,
        }
    }
}

/// Q-table over SNR bins and payload-size actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAgent {
    pub actions: Vec<usize>,
    /// Row-major `bins x actions`.
    pub q_values: Vec<f64>,
    pub config: AgentConfig,
    pub epsilon: f64,
}

impl QAgent {
    pub fn new(actions: Vec<usize>, config: AgentConfig) -> Result<Self> {
        if actions.is_empty() || config.bins == 0 {
            bail!(Config, "agent needs actions and at least one bin");
        }
        if !(config.snr_min_db < config.snr_max_db) {
            bail!(Config, "SNR range is empty");
        }
        if !(0.0..=1.0).contains(&config.epsilon_min)
            || config.epsilon < config.epsilon_min
            || config.epsilon > 1.0
        {
            bail!(Config, "epsilon must satisfy epsilon_min <= epsilon <= 1");
        }
        Ok(Self {
            q_values: vec![0.0; config.bins * actions.len()],
            epsilon: config.epsilon,
            actions,
            config,
        })
    }

    pub fn bins(&self) -> usize {
        self.config.bins
    }

    /// Maps dB onto `[0, 1]` over the configured range, clamped.
    pub fn normalize_snr(&self, snr_db: f64) -> f64 {
        ((snr_db - self.config.snr_min_db) / (self.config.snr_max_db - self.config.snr_min_db))
            .clamp(0.0, 1.0)
    }

    /// Bin of a normalized SNR; out-of-range values clamp to the edge bins.
    pub fn bin(&self, snr_norm: f64) -> usize {
        let b = self.bins();
        ((snr_norm.clamp(0.0, 1.0) * b as f64) as usize).min(b - 1)
    }

    /// Lower edges of the SNR bins in dB, plus the upper edge of the last.
    pub fn bin_edges_db(&self) -> Vec<f64> {
        let b = self.bins() as f64;
        let span = self.config.snr_max_db - self.config.snr_min_db;
        (0..=self.bins())
            .map(|i| self.config.snr_min_db + span * i as f64 / b)
            .collect()
    }

    pub fn row(&self, bin: usize) -> &[f64] {
        let a = self.actions.len();
        &self.q_values[bin * a..(bin + 1) * a]
    }

    /// Highest-valued action of a bin, ties to the lower index.
    pub fn greedy(&self, bin: usize) -> usize {
        crate::semantics::argmax(self.row(bin))
    }

    /// ε-greedy action index for a normalized SNR.
    pub fn act(&self, snr_norm: f64, rng: &mut Rng) -> usize {
        if rng.random::<f64>() < self.epsilon {
            rng.random_range(0..self.actions.len())
        } else {
            self.greedy(self.bin(snr_norm))
        }
    }

    /// One Q-learning backup followed by the ε decay.
    pub fn update(&mut self, state: usize, action: usize, reward: f64, next_state: usize) {
        let a = self.actions.len();
        let target = reward
            + self.config.discount
                * self
                    .row(next_state)
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
        let q = &mut self.q_values[state * a + action];
        *q += self.config.learning_rate * (target - *q);
        self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_min);
    }
}

/// Result of one environment evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub q_task: f64,
    pub ber: f64,
}

/// Trains an agent against an environment callback `(K, snr_db, seed)`.
///
/// SNR is drawn uniformly over the agent's range each episode; the next state
/// is the following episode's independent draw. Returns the per-episode reward.
pub fn train_agent<F>(
    mut agent: QAgent,
    slots: usize,
    episodes: usize,
    reward_cfg: &RewardConfig,
    seed: u64,
    mut evaluate: F,
) -> Result<(QAgent, Vec<f64>)>
where
    F: FnMut(usize, f64, u64) -> Result<Evaluation>,
{
    let mut rng = rng_from_seed(seed);
    let (lo, hi) = (agent.config.snr_min_db, agent.config.snr_max_db);
    let mut curve = Vec::with_capacity(episodes);
    let mut snr = rng.random_range(lo..=hi);
    for episode in 0..episodes {
        let snr_norm = agent.normalize_snr(snr);
        let state = agent.bin(snr_norm);
        let action = agent.act(snr_norm, &mut rng);
        let k = agent.actions[action];
        let eval = evaluate(k, snr, derive_seed(seed, &[episode as u64]))?;
        let r = reward(eval.q_task, k, slots, eval.ber, snr_norm, reward_cfg)?;
        let next_snr = rng.random_range(lo..=hi);
        let next_state = agent.bin(agent.normalize_snr(next_snr));
        agent.update(state, action, r, next_state);
        curve.push(r);
        snr = next_snr;
    }
    Ok((agent, curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_action_space() {
        let ks = action_space(5, 64, 12).unwrap();
        assert_eq!(ks, vec![5, 10, 16, 21, 26, 32, 37, 43, 48, 53, 59, 64]);
        assert_eq!(action_space(5, 64, 2).unwrap(), vec![5, 64]);
        assert!(matches!(
            action_space(5, 8, 5),
            Err(crate::Error::Config(_))
        ));
    }

    #[test]
    fn action_spaces_increase_strictly() {
        for lo in 1..10 {
            for hi in lo + 1..30 {
                for a in 2..=(hi - lo + 1) {
                    let ks = action_space(lo, hi, a).unwrap();
                    assert_eq!(ks.len(), a);
                    assert!(ks.windows(2).all(|w| w[0] < w[1]));
                    assert_eq!((ks[0], ks[a - 1]), (lo, hi));
                }
            }
        }
    }

    #[test]
    fn reward_terms() {
        let cfg = RewardConfig::default();
        let with = reward(0.9, 32, 64, 0.0, 0.5, &cfg).unwrap();
        let without = reward(0.85, 32, 64, 0.0, 0.5, &cfg).unwrap();
        let adapt = 0.1 * (0.5 * 0.5 + 0.5 * 0.5);
        assert!((with - (0.9 + 0.2 * libm::log(2.0) + adapt)).abs() < 1e-15);
        assert!((0.2 * libm::log(2.0) - 0.138629).abs() < 1e-6);
        assert!((without - (0.85 + adapt)).abs() < 1e-15);
        let edge = reward(0.5, 5, 64, 0.0, 0.0, &cfg).unwrap();
        assert!((edge - (0.5 + 0.1 * 5.0 / 64.0 - 0.1)).abs() < 1e-15);
        assert!(matches!(
            reward(0.5, 0, 64, 0.0, 0.0, &cfg),
            Err(crate::Error::Config(_))
        ));
    }

    #[test]
    fn reward_slope_in_ber() {
        let cfg = RewardConfig::default();
        let a = reward(0.7, 20, 64, 0.01, 0.3, &cfg).unwrap();
        let b = reward(0.7, 20, 64, 0.02, 0.3, &cfg).unwrap();
        assert!(b < a);
        assert!(((a - b) - 0.1).abs() < 1e-12);
    }

    fn agent() -> QAgent {
        QAgent::new(vec![5, 10, 20], AgentConfig::default()).unwrap()
    }

    #[test]
    fn greedy_when_epsilon_zero() {
        let mut a = agent();
        a.epsilon = 0.0;
        a.q_values[3 * 3 + 2] = 1.0;
        let mut rng = rng_from_seed(1);
        let bin3 = 3.5 / 16.0;
        for _ in 0..10 {
            assert_eq!(a.act(bin3, &mut rng), 2);
        }
        assert_eq!(a.bin(-0.5), 0);
        assert_eq!(a.bin(1.7), 15);
        assert_eq!(a.bin(1.0), 15);
    }

    #[test]
    fn uniform_exploration() {
        let a = agent();
        let mut rng = rng_from_seed(2);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[a.act(0.4, &mut rng)] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = libm::sqrt(n as f64 * p * (1.0 - p));
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn update_rules() {
        let mut cfg = AgentConfig {
            learning_rate: 1.0,
            discount: 0.0,
            ..Default::default()
        };
        let mut a = QAgent::new(vec![5, 10], cfg.clone()).unwrap();
        a.update(2, 1, 2.0, 4);
        assert_eq!(a.row(2)[1], 2.0);
        assert!((a.epsilon - 0.997).abs() < 1e-15);

        cfg.learning_rate = 0.0;
        let mut frozen = QAgent::new(vec![5, 10], cfg.clone()).unwrap();
        let before = frozen.q_values.clone();
        frozen.update(0, 0, 5.0, 0);
        assert_eq!(frozen.q_values, before);

        // fixed-point iteration oracle: q <- q + 0.5 (r + g q - q)
        cfg.learning_rate = 0.5;
        cfg.discount = 0.5;
        let mut a = QAgent::new(vec![5], cfg).unwrap();
        let mut oracle = 0.0;
        for _ in 0..120 {
            a.update(1, 0, 1.0, 1);
            oracle += 0.5 * (1.0 + 0.5 * oracle - oracle);
            assert!((a.row(1)[0] - oracle).abs() < 1e-12);
        }
        assert!((a.row(1)[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn epsilon_floors_at_minimum() {
        let mut a = agent();
        for _ in 0..5000 {
            a.update(0, 0, 0.0, 0);
        }
        assert_eq!(a.epsilon, a.config.epsilon_min);
    }

    #[test]
    fn zero_episodes_and_determinism() {
        let cfg = RewardConfig::default();
        let env = |k: usize, snr: f64, _seed: u64| {
            Ok(Evaluation {
                q_task: if snr > 5.0 {
                    0.9
                } else {
                    0.3 + k as f64 / 200.0
                },
                ber: 0.0,
            })
        };
        let (a, curve) = train_agent(agent(), 64, 0, &cfg, 3, env).unwrap();
        assert!(curve.is_empty() && a.q_values.iter().all(|&q| q == 0.0));
        let (a1, c1) = train_agent(agent(), 64, 500, &cfg, 3, env).unwrap();
        let (a2, c2) = train_agent(agent(), 64, 500, &cfg, 3, env).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(a1, a2);
        assert!(a1.q_values.iter().all(|q| q.is_finite()));
    }
}
