//! Full sweep: every order, both constellations, agent and full-payload
//! policies, every grid SNR.

use semqam_core::channel::LinkResult;
use semqam_core::metrics::vulnerability_report;
use semqam_core::rng::derive_seed;
use semqam_core::semantics::SemanticQuality;

use crate::artifacts::Store;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::pipeline::{
    agent_k, build_order, prepare_stored, run_pipeline, stage, EvalSet, GridCache, OrderArtifacts,
    Prepared,
};
use crate::report::{
    ExperimentReport, OrderReport, Policy, PolicyPoint, RunStatus, SweepRow, Variant,
    RAW_BASELINE_SYMBOLS,
};
use crate::verify::order_theory;

fn mean_quality(qs: &[SemanticQuality]) -> SemanticQuality {
    let n = qs.len() as f64;
    let avg = |f: fn(&SemanticQuality) -> f64| qs.iter().map(f).sum::<f64>() / n;
    SemanticQuality {
        q_sem: avg(|q| q.q_sem),
        q_task: avg(|q| q.q_task),
        p_c: avg(|q| q.p_c),
        s_dist: avg(|q| q.s_dist),
    }
}

/// Curve rows of one order. Both variants see the same channel seeds.
pub fn evaluate_order(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    art: &OrderArtifacts,
    cache: &GridCache,
) -> Result<Vec<SweepRow>> {
    let set = EvalSet::test(prep, cache);
    let slots = prep.geometry.num_slots();
    let mut rows = Vec::new();
    for (variant, constellation) in [(Variant::Gray, &art.gray), (Variant::Learned, &art.learned)] {
        for policy in [Policy::Agent, Policy::Fixed] {
            for (s, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
                let k = match policy {
                    Policy::Agent => agent_k(&art.agent, snr_db),
                    Policy::Fixed => slots,
                };
                let mut qualities = Vec::with_capacity(cfg.trials);
                let mut link = LinkResult::empty(art.order);
                for trial in 0..cfg.trials {
                    let seed = derive_seed(
                        cfg.seed,
                        &[stage::SWEEP, art.order as u64, s as u64, trial as u64],
                    );
                    let out = run_pipeline(
                        &prep.classifier,
                        &art.codebook,
                        &prep.geometry,
                        constellation,
                        set,
                        k,
                        snr_db,
                        seed,
                    )?;
                    qualities.push(out.quality);
                    link.merge(&out.link);
                }
                let q = mean_quality(&qualities);
                rows.push(SweepRow {
                    order: art.order,
                    variant,
                    policy,
                    snr_db,
                    q_sem: q.q_sem,
                    q_task: q.q_task,
                    p_c: q.p_c,
                    s_dist: q.s_dist,
                    ber: link.ber(),
                    ser: link.ser(),
                    mean_k: k as f64,
                    symbols_per_image: k as f64,
                    compression_ratio: RAW_BASELINE_SYMBOLS as f64 / k as f64,
                    trials: cfg.trials,
                });
            }
        }
    }
    Ok(rows)
}

pub fn order_report(
    cfg: &ExperimentConfig,
    art: &OrderArtifacts,
    cache: &GridCache,
) -> Result<OrderReport> {
    let tail = art.agent_curve.len() / 10;
    let agent_final_reward = (tail > 0).then(|| {
        art.agent_curve[art.agent_curve.len() - tail..]
            .iter()
            .sum::<f64>()
            / tail as f64
    });
    Ok(OrderReport {
        order: art.order,
        gray: vulnerability_report(&art.gray, &art.stats)?,
        learned: vulnerability_report(&art.learned, &art.stats)?,
        theory: order_theory(cfg, &art.stats, &art.gray, &art.learned, &cache.train)?,
        agent_policy: cfg
            .snr_grid_db
            .iter()
            .map(|&snr_db| PolicyPoint {
                snr_db,
                k: agent_k(&art.agent, snr_db),
            })
            .collect(),
        agent_final_reward,
    })
}

/// Runs the sweep, returning whatever was completed together with the error
/// that stopped it, if any.
pub fn run_sweep_partial(
    cfg: &ExperimentConfig,
    store: Option<&Store>,
) -> (ExperimentReport, Option<CliError>) {
    let mut report = ExperimentReport::new(cfg);
    let result = (|| -> Result<()> {
        cfg.validate()?;
        let prep = prepare_stored(cfg, store)?;
        for order in cfg.sweep_orders() {
            let (art, cache) = build_order(cfg, &prep, order, store)?;
            let rows = evaluate_order(cfg, &prep, &art, &cache)?;
            let summary = order_report(cfg, &art, &cache)?;
            report.rows.extend(rows);
            report.orders.push(summary);
        }
        Ok(())
    })();
    match result {
        Ok(()) => (report, None),
        Err(e) => {
            report.status = RunStatus::Partial {
                failure: e.to_string(),
            };
            (report, Some(e))
        }
    }
}

pub fn run_sweep(cfg: &ExperimentConfig, store: Option<&Store>) -> Result<ExperimentReport> {
    match run_sweep_partial(cfg, store) {
        (report, None) => Ok(report),
        (_, Some(e)) => Err(e),
    }
}
