//! Sweep report: per-SNR curve rows, per-order vulnerability and theory
//! summaries, provenance. Serialized as JSON and as a flat CSV.

use std::fmt;
use std::path::Path;

use semqam_core::metrics::VulnerabilityReport;
use serde::{Deserialize, Serialize};

use crate::artifacts::write_file;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::verify::OrderTheory;

pub const SCHEMA_VERSION: u32 = 1;

/// Raw 28x28 8-bit image sent as 10-bit symbols: 6272 bits over 10, rounded up.
pub const RAW_BASELINE_SYMBOLS: usize = 628;
/// The same count truncated instead of rounded up.
pub const RAW_BASELINE_SYMBOLS_TRUNCATED: usize = 627;

pub const CSV_COLUMNS: [&str; 14] = [
    "order",
    "variant",
    "policy",
    "snr_db",
    "q_sem",
    "q_task",
    "p_c",
    "s_dist",
    "ber",
    "ser",
    "mean_k",
    "symbols_per_image",
    "compression_ratio",
    "trials",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Gray,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Payload size chosen by the trained rate controller.
    Agent,
    /// Every slot sent, K = N.
    Fixed,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Gray => "gray",
            Variant::Learned => "learned",
        })
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Agent => "agent",
            Policy::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub order: usize,
    pub variant: Variant,
    pub policy: Policy,
    pub snr_db: f64,
    pub q_sem: f64,
    pub q_task: f64,
    pub p_c: f64,
    pub s_dist: f64,
    pub ber: f64,
    pub ser: f64,
    pub mean_k: f64,
    pub symbols_per_image: f64,
    pub compression_ratio: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyPoint {
    pub snr_db: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub order: usize,
    pub gray: VulnerabilityReport,
    pub learned: VulnerabilityReport,
    pub theory: OrderTheory,
    /// Greedy payload size at each grid SNR.
    pub agent_policy: Vec<PolicyPoint>,
    /// Mean reward over the last tenth of training episodes.
    pub agent_final_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub config: ExperimentConfig,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawBaseline {
    pub symbols: usize,
    pub symbols_truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Partial { failure: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub status: RunStatus,
    pub provenance: Provenance,
    pub raw_baseline: RawBaseline,
    pub snr_grid_db: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub orders: Vec<OrderReport>,
}

impl ExperimentReport {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            status: RunStatus::Complete,
            provenance: Provenance::of(cfg),
            raw_baseline: RawBaseline {
                symbols: RAW_BASELINE_SYMBOLS,
                symbols_truncated: RAW_BASELINE_SYMBOLS_TRUNCATED,
            },
            snr_grid_db: cfg.snr_grid_db.clone(),
            rows: Vec::new(),
            orders: Vec::new(),
        }
    }

    /// Rows of one curve, in grid order.
    pub fn series(&self, order: usize, variant: Variant, policy: Policy) -> Vec<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.order == order && r.variant == variant && r.policy == policy)
            .collect()
    }

    pub fn row(
        &self,
        order: usize,
        variant: Variant,
        policy: Policy,
        snr_db: f64,
    ) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            r.order == order && r.variant == variant && r.policy == policy && r.snr_db == snr_db
        })
    }

    pub fn order(&self, order: usize) -> Option<&OrderReport> {
        self.orders.iter().find(|o| o.order == order)
    }

    /// Transmitted symbols per image averaged over the agent rows of the
    /// learned variant.
    pub fn mean_symbols_per_image(&self) -> Option<f64> {
        let ks: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.variant == Variant::Learned && r.policy == Policy::Agent)
            .map(|r| r.symbols_per_image)
            .collect();
        (!ks.is_empty()).then(|| ks.iter().sum::<f64>() / ks.len() as f64)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.order.to_string(),
                r.variant.to_string(),
                r.policy.to_string(),
                r.snr_db.to_string(),
                r.q_sem.to_string(),
                r.q_task.to_string(),
                r.p_c.to_string(),
                r.s_dist.to_string(),
                r.ber.to_string(),
                r.ser.to_string(),
                r.mean_k.to_string(),
                r.symbols_per_image.to_string(),
                r.compression_ratio.to_string(),
                r.trials.to_string(),
            ])?;
        }
        w.into_inner()
            .map_err(|e| CliError::Artifact(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let report: Self = serde_json::from_slice(&bytes)?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(CliError::Artifact(format!(
                "{}: report schema {} is not supported",
                path.display(),
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Writes `report.json` and `curves.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("report.json"), &self.to_json()?)?;
        write_file(&dir.join("curves.csv"), &self.to_csv()?)
    }
}
