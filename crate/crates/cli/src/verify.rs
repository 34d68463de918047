//! Strict-suboptimality and BER-paradox checks against the fitted sources.

use std::fmt;

use semqam_core::constellation::{gray_qam, Constellation};
use semqam_core::metrics::weighted_ssv;
use semqam_core::rng::derive_seed;
use semqam_core::source::{ConceptGrid, SourceStatistics};
use semqam_core::theory::{
    ber_paradox_check, gap_bound, kkt_residual, minimize_ssv, DescentConfig, GapReport,
    ParadoxReport, StationarityReport,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::pipeline::stage;
use crate::report::Provenance;

/// Projected-gradient norm above which Gray counts as non-stationary.
pub const NONSTATIONARY_THRESHOLD: f64 = 1e-3;

/// Gray versus the direct `S_w` descent from Gray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSummary {
    pub order: usize,
    pub delta: f64,
    pub gamma: f64,
    pub precondition_met: bool,
    pub weighted_ssv_gray: f64,
    pub weighted_ssv_optimized: f64,
    pub stationarity_gray: StationarityReport,
    pub stationarity_optimized: StationarityReport,
    pub gap: GapReport,
}

pub fn descent_config(cfg: &ExperimentConfig) -> DescentConfig {
    DescentConfig {
        steps: cfg.theory.descent_steps,
        ..DescentConfig::default()
    }
}

pub fn theorem_summary(
    stats: &SourceStatistics,
    power: f64,
    descent: &DescentConfig,
    kkt_tol: f64,
) -> Result<(TheoremSummary, Constellation)> {
    let gray = gray_qam(stats.order(), power)?;
    let optimized = minimize_ssv(&gray, stats, descent)?;
    let summary = TheoremSummary {
        order: stats.order(),
        delta: stats.delta,
        gamma: stats.gamma,
        precondition_met: stats.delta > 0.0 && stats.gamma > 0.0,
        weighted_ssv_gray: weighted_ssv(&gray, stats)?,
        weighted_ssv_optimized: weighted_ssv(&optimized, stats)?,
        stationarity_gray: kkt_residual(&gray, stats, kkt_tol)?,
        stationarity_optimized: kkt_residual(&optimized, stats, kkt_tol)?,
        gap: gap_bound(stats, &gray, &optimized, power)?,
    };
    Ok((summary, optimized))
}

/// Theory results for one order of the desk source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTheory {
    pub theorem: TheoremSummary,
    pub weighted_ssv_learned: f64,
    pub stationarity_learned: StationarityReport,
    pub paradox: ParadoxReport,
}

pub fn order_theory(
    cfg: &ExperimentConfig,
    stats: &SourceStatistics,
    gray: &Constellation,
    learned: &Constellation,
    train_grids: &[ConceptGrid],
) -> Result<OrderTheory> {
    let t = &cfg.theory;
    let (theorem, _) = theorem_summary(stats, cfg.power, &descent_config(cfg), t.kkt_tol)?;
    let occurrences: Vec<u32> = train_grids
        .iter()
        .flat_map(|g| g.indices.iter().copied())
        .collect();
    let seed = derive_seed(cfg.seed, &[stage::PARADOX, stats.order() as u64]);
    let paradox = ber_paradox_check(
        gray,
        learned,
        stats,
        &occurrences,
        &t.paradox_snr_db,
        t.symbols_per_point,
        seed,
    )?;
    Ok(OrderTheory {
        theorem,
        weighted_ssv_learned: weighted_ssv(learned, stats)?,
        stationarity_learned: kkt_residual(learned, stats, t.kkt_tol)?,
        paradox,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    PreconditionNotMet,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::PreconditionNotMet => "precondition not met",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub source: String,
    pub name: String,
    pub status: CheckStatus,
    /// Only gated checks decide the exit code.
    pub gated: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.gated { "" } else { " (informational)" };
        write!(
            f,
            "{:<12} {:<26} {}{tag}: {}",
            self.source, self.name, self.status, self.detail
        )
    }
}

fn status(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

pub fn theorem_checks(source: &str, s: &TheoremSummary) -> Vec<Check> {
    let gate = |ok: bool| {
        if s.precondition_met {
            status(ok)
        } else {
            CheckStatus::PreconditionNotMet
        }
    };
    let pg = s.stationarity_gray.projected_gradient_norm;
    vec![
        Check {
            source: source.into(),
            name: "strict-suboptimality".into(),
            status: gate(s.gap.empirical_gap > 0.0),
            gated: true,
            detail: format!(
                "delta {:.4}, gamma {:.3e}, S_w gray {:.6e}, optimized {:.6e}, gap {:.3e} (bound {:.3e})",
                s.delta, s.gamma, s.weighted_ssv_gray, s.weighted_ssv_optimized, s.gap.empirical_gap, s.gap.bound_value
            ),
        },
        Check {
            source: source.into(),
            name: "gray-nonstationary".into(),
            status: gate(pg > NONSTATIONARY_THRESHOLD),
            gated: true,
            detail: format!("projected gradient norm {pg:.3e}"),
        },
    ]
}

pub fn order_checks(theory: &OrderTheory, paradox_gated: bool) -> Vec<Check> {
    let s = &theory.theorem;
    let source = format!("desk M={}", s.order);
    let mut checks = theorem_checks(&source, s);
    let gate = |ok: bool| {
        if s.precondition_met {
            status(ok)
        } else {
            CheckStatus::PreconditionNotMet
        }
    };
    checks.push(Check {
        source: source.clone(),
        name: "learned-improves".into(),
        status: gate(theory.weighted_ssv_learned < s.weighted_ssv_gray),
        gated: true,
        detail: format!(
            "S_w learned {:.6e}, gray {:.6e}",
            theory.weighted_ssv_learned, s.weighted_ssv_gray
        ),
    });
    let p = &theory.paradox;
    for pt in &p.points {
        let ok = pt.learned.ber >= pt.gray.ber
            && p.weighted_ssv_learned < p.weighted_ssv_gray
            && pt.learned.semantic_error_rate < pt.gray.semantic_error_rate;
        checks.push(Check {
            source: source.clone(),
            name: format!("ber-paradox {} dB", pt.snr_db),
            status: gate(ok),
            gated: paradox_gated,
            detail: format!(
                "BER gray {:.3e} learned {:.3e}; semantic error share gray {:.4} learned {:.4}",
                pt.gray.ber,
                pt.learned.ber,
                pt.gray.semantic_error_rate,
                pt.learned.semantic_error_rate
            ),
        });
    }
    checks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub provenance: Provenance,
    pub orders: Vec<OrderTheory>,
    pub checks: Vec<Check>,
}

impl TheoryReport {
    pub fn new(cfg: &ExperimentConfig, orders: Vec<OrderTheory>) -> Self {
        let checks = orders
            .iter()
            .flat_map(|o| order_checks(o, cfg.theory.paradox_orders.contains(&o.theorem.order)))
            .collect();
        Self {
            provenance: Provenance::of(cfg),
            orders,
            checks,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks
            .iter()
            .all(|c| !c.gated || c.status != CheckStatus::Fail)
    }
}
