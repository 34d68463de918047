//! Experiment configuration, loaded from JSON. Every field has a default, so
//! `{}` is a valid config.

use std::path::{Path, PathBuf};

use semqam_core::constellation::TrainConfig;
use semqam_core::ratecontrol::{AgentConfig, RewardConfig};
use semqam_core::semantics::ClassifierConfig;
use semqam_core::source::KMeansConfig;
use semqam_core::SQUARE_QAM_ORDERS;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Procedural digits generated from the master seed.
    Synthetic,
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Csv {
        path: PathBuf,
        height: usize,
        width: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    pub train_size: usize,
    pub test_size: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DatasetSource::Synthetic,
            train_size: 5000,
            test_size: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub target_side: usize,
    pub patch_side: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            target_side: 32,
            patch_side: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookSettings {
    pub max_iters: usize,
    pub tol: f64,
    /// Patches sampled from the training images for k-means.
    pub sample_patches: usize,
}

impl Default for CodebookSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
            sample_patches: 60_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        let d = ClassifierConfig::default();
        Self {
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationSettings {
    pub steps: usize,
    pub learning_rate: f64,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub batch_size: usize,
    pub checkpoint_every: usize,
    pub validation_size: usize,
}

impl Default for ConstellationSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            steps: d.steps,
            learning_rate: 1e-2,
            snr_min_db: d.snr_min_db,
            snr_max_db: d.snr_max_db,
            batch_size: 1024,
            checkpoint_every: d.checkpoint_every,
            validation_size: d.validation_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSettings {
    pub k_min: usize,
    pub k_max: usize,
    pub actions: usize,
    pub episodes: usize,
    /// Training images evaluated per episode.
    pub eval_images: usize,
    pub bins: usize,
    pub epsilon: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    pub learning_rate: f64,
    pub discount: f64,
    pub lambda_ber: f64,
    pub alpha: f64,
    pub quality_threshold: f64,
    pub edge_penalty: f64,
    pub adapt_coeff: f64,
}

impl Default for AgentSettings {
    fn default() -> Self {
        let a = AgentConfig::default();
        let r = RewardConfig::default();
        Self {
            k_min: r.k_min,
            k_max: r.k_max,
            actions: 12,
            episodes: 3000,
            eval_images: 100,
            bins: a.bins,
            epsilon: a.epsilon,
            epsilon_min: a.epsilon_min,
            epsilon_decay: a.epsilon_decay,
            learning_rate: 0.5,
            discount: 0.0,
            lambda_ber: 1.0,
            alpha: r.alpha,
            quality_threshold: r.quality_threshold,
            edge_penalty: r.edge_penalty,
            adapt_coeff: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySettings {
    pub paradox_snr_db: Vec<f64>,
    /// Orders whose BER-paradox checks decide the exit code; others are
    /// reported only.
    pub paradox_orders: Vec<usize>,
    pub symbols_per_point: usize,
    pub descent_steps: usize,
    pub kkt_tol: f64,
}

impl Default for TheorySettings {
    fn default() -> Self {
        Self {
            paradox_snr_db: vec![10.0, 15.0, 20.0],
            paradox_orders: vec![16],
            symbols_per_point: 2_000_000,
            descent_steps: 3000,
            kkt_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub orders: Vec<usize>,
    /// Adds M = 1024 to the sweep.
    pub include_1024: bool,
    pub power: f64,
    pub geometry: GeometryConfig,
    pub snr_grid_db: Vec<f64>,
    /// Channel realizations per sweep point.
    pub trials: usize,
    pub codebook: CodebookSettings,
    pub classifier: ClassifierSettings,
    pub constellation: ConstellationSettings,
    pub agent: AgentSettings,
    pub theory: TheorySettings,
    /// Read from config files but never written, so it stays out of the hash
    /// and of report provenance.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            dataset: DatasetConfig::default(),
            orders: vec![4, 16, 64, 256],
            include_1024: false,
            power: 1.0,
            geometry: GeometryConfig::default(),
            snr_grid_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            trials: 1,
            codebook: CodebookSettings::default(),
            classifier: ClassifierSettings::default(),
            constellation: ConstellationSettings::default(),
            agent: AgentSettings::default(),
            theory: TheorySettings::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Orders in sweep order, with 1024 appended when enabled.
    pub fn sweep_orders(&self) -> Vec<usize> {
        let mut orders = self.orders.clone();
        if self.include_1024 && !orders.contains(&1024) {
            orders.push(1024);
        }
        orders
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() {
            return Err(invalid("SNR grid is empty"));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(invalid("SNR grid values must be finite"));
        }
        if self.orders.is_empty() && !self.include_1024 {
            return Err(invalid("no modulation orders"));
        }
        if let Some(m) = self.orders.iter().find(|m| !SQUARE_QAM_ORDERS.contains(m)) {
            return Err(invalid(format!(
                "order {m} is not one of {SQUARE_QAM_ORDERS:?}"
            )));
        }
        if !(self.power > 0.0) {
            return Err(invalid("power must be positive"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.dataset.train_size == 0 || self.dataset.test_size == 0 {
            return Err(invalid("train and test sizes must be positive"));
        }
        let g = self.geometry;
        if g.patch_side == 0 || !g.target_side.is_multiple_of(g.patch_side) {
            return Err(invalid("patch_side must divide target_side"));
        }
        let slots = (g.target_side / g.patch_side).pow(2);
        let a = &self.agent;
        if a.k_min == 0 || a.k_min >= a.k_max || a.k_max > slots {
            return Err(invalid(format!("need 1 <= k_min < k_max <= {slots} slots")));
        }
        if a.eval_images == 0 || a.bins == 0 {
            return Err(invalid("agent needs eval_images and bins"));
        }
        let reward_terms = [
            a.lambda_ber,
            a.alpha,
            a.quality_threshold,
            a.edge_penalty,
            a.adapt_coeff,
        ];
        if reward_terms.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("reward parameters must be nonnegative"));
        }
        match &self.dataset.source {
            DatasetSource::Synthetic => {}
            DatasetSource::Idx { images, labels } => {
                for p in [images, labels] {
                    if !p.exists() {
                        return Err(invalid(format!("{} does not exist", p.display())));
                    }
                }
            }
            DatasetSource::Csv { path, .. } => {
                if !path.exists() {
                    return Err(invalid(format!("{} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn kmeans(&self, seed: u64) -> KMeansConfig {
        KMeansConfig {
            max_iters: self.codebook.max_iters,
            tol: self.codebook.tol,
            seed,
        }
    }

    pub fn classifier_config(&self, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            epochs: self.classifier.epochs,
            learning_rate: self.classifier.learning_rate,
            batch_size: self.classifier.batch_size,
            seed,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let c = &self.constellation;
        TrainConfig {
            steps: c.steps,
            learning_rate: c.learning_rate,
            snr_min_db: c.snr_min_db,
            snr_max_db: c.snr_max_db,
            batch_size: c.batch_size,
            checkpoint_every: c.checkpoint_every,
            validation_size: c.validation_size,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        let a = &self.agent;
        AgentConfig {
            bins: a.bins,
            snr_min_db: self
                .snr_grid_db
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
            snr_max_db: self
                .snr_grid_db
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            epsilon: a.epsilon,
            epsilon_min: a.epsilon_min,
            epsilon_decay: a.epsilon_decay,
            learning_rate: a.learning_rate,
            discount: a.discount,
        }
    }

    pub fn reward_config(&self) -> RewardConfig {
        let a = &self.agent;
        RewardConfig {
            lambda_ber: a.lambda_ber,
            alpha: a.alpha,
            quality_threshold: a.quality_threshold,
            edge_penalty: a.edge_penalty,
            adapt_coeff: a.adapt_coeff,
            k_min: a.k_min,
            k_max: a.k_max,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ExperimentConfig::default();
        cfg.snr_grid_db.clear();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let cfg = ExperimentConfig {
            orders: vec![8],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
        let missing =
            r#"{"dataset": {"source": {"format": "idx", "images": "/nope", "labels": "/nope"}}}"#;
        let cfg: ExperimentConfig = serde_json::from_str(missing).unwrap();
        assert!(cfg.validate().is_err());
    }
}
