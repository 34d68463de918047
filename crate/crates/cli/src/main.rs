use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semqam::artifacts::{write_file, Store};
use semqam::config::ExperimentConfig;
use semqam::pipeline::{
    agent_k, agent_stage, codebook_stage, constellation_stage, prepare_stored, stats_stage,
    Prepared,
};
use semqam::plot::render_plots;
use semqam::report::ExperimentReport;
use semqam::sweep::run_sweep_partial;
use semqam::verify::{order_theory, TheoryReport};
use semqam::Result;
use semqam_core::ingest::{encode_idx, write_csv};
use semqam_core::metrics::vulnerability_report;

#[derive(Debug, Parser)]
#[command(name = "semqam", version, about = "Importance-aware M-QAM experiments")]
struct Cli {
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the dataset and write the train/test split as IDX and CSV.
    Ingest,
    /// Train the frozen task classifier.
    TrainClassifier,
    /// Train one concept codebook per modulation order.
    TrainCodebook,
    /// Estimate concept importance and source statistics.
    Stats,
    /// Train the learned constellations.
    TrainConstellation,
    /// Train the payload-size controller.
    RlTrain,
    /// Run the full sweep and write report.json, curves.csv and plots.
    Sweep,
    /// Check strict suboptimality of Gray and the BER paradox.
    VerifyTheory,
    /// Render plots from an existing report.
    Plot {
        /// Report to plot; defaults to report.json in the output directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ingest(cfg: &ExperimentConfig) -> Result<()> {
    let (train, test) = semqam::pipeline::load_dataset(cfg)?;
    let dir = cfg.output_dir.join("data");
    for (name, set) in [("train", &train), ("test", &test)] {
        let (images, labels) = encode_idx(set);
        write_file(&dir.join(format!("{name}-images.idx")), &images)?;
        write_file(&dir.join(format!("{name}-labels.idx")), &labels)?;
        write_file(&dir.join(format!("{name}.csv")), write_csv(set).as_bytes())?;
        println!(
            "{name}: {} images of {}x{}, {} classes",
            set.len(),
            set.height,
            set.width,
            set.num_classes
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn per_order<F>(cfg: &ExperimentConfig, store: &Store, mut f: F) -> Result<()>
where
    F: FnMut(&Prepared, usize) -> Result<()>,
{
    let prep = prepare_stored(cfg, Some(store))?;
    for order in cfg.sweep_orders() {
        f(&prep, order)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    let store = Store::new(&cfg.output_dir, cfg.hash());
    match &cli.command {
        Command::Ingest => ingest(&cfg)?,
        Command::TrainClassifier => {
            let prep = prepare_stored(&cfg, Some(&store))?;
            println!(
                "classifier: train accuracy {:.4}, test accuracy {:.4}",
                prep.classifier.accuracy(&prep.train)?,
                prep.classifier.accuracy(&prep.test)?
            );
        }
        Command::TrainCodebook => per_order(&cfg, &store, |prep, order| {
            let cb = codebook_stage(&cfg, prep, order, Some(&store))?;
            println!(
                "M={order}: {} centroids of dimension {}",
                cb.order(),
                cb.dim()
            );
            Ok(())
        })?,
        Command::Stats => per_order(&cfg, &store, |prep, order| {
            let cb = codebook_stage(&cfg, prep, order, Some(&store))?;
            let (fitted, _) = stats_stage(prep, &cb, Some(&store))?;
            let s = &fitted.stats;
            println!(
                "M={order}: delta {:.4}, gamma {:.4e}, {} above-average symbols",
                s.delta,
                s.gamma,
                s.top_set().len()
            );
            Ok(())
        })?,
        Command::TrainConstellation => per_order(&cfg, &store, |prep, order| {
            let cb = codebook_stage(&cfg, prep, order, Some(&store))?;
            let (fitted, cache) = stats_stage(prep, &cb, Some(&store))?;
            let c = constellation_stage(&cfg, &cache, order, Some(&store))?;
            let g = vulnerability_report(&c.gray, &fitted.stats)?;
            let l = vulnerability_report(&c.learned, &fitted.stats)?;
            println!(
                "M={order}: S_w gray {:.5e} learned {:.5e}; S_p gray {:?} learned {:?}",
                g.weighted_ssv, l.weighted_ssv, g.spp, l.spp
            );
            Ok(())
        })?,
        Command::RlTrain => per_order(&cfg, &store, |prep, order| {
            let cb = codebook_stage(&cfg, prep, order, Some(&store))?;
            let (_, cache) = stats_stage(prep, &cb, Some(&store))?;
            let c = constellation_stage(&cfg, &cache, order, Some(&store))?;
            let a = agent_stage(&cfg, prep, &cache, &cb, &c.learned, Some(&store))?;
            let policy: Vec<String> = cfg
                .snr_grid_db
                .iter()
                .map(|&s| format!("{s} dB: K={}", agent_k(&a.agent, s)))
                .collect();
            println!("M={order}: {}", policy.join(", "));
            Ok(())
        })?,
        Command::Sweep => {
            let (report, failure) = run_sweep_partial(&cfg, Some(&store));
            report.write(&cfg.output_dir)?;
            if let Some(e) = failure {
                return Err(e);
            }
            render_plots(&report, &cfg.output_dir)?;
            for o in &report.orders {
                println!(
                    "M={}: S_w gray {:.5e} learned {:.5e}; S_p gray {:?} learned {:?}",
                    o.order, o.gray.weighted_ssv, o.learned.weighted_ssv, o.gray.spp, o.learned.spp
                );
            }
            if let Some(k) = report.mean_symbols_per_image() {
                println!(
                    "mean symbols per image {k:.2}, compression {:.2}:1 against {} raw symbols",
                    report.raw_baseline.symbols as f64 / k,
                    report.raw_baseline.symbols
                );
            }
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::VerifyTheory => {
            let mut orders = Vec::new();
            per_order(&cfg, &store, |prep, order| {
                let cb = codebook_stage(&cfg, prep, order, Some(&store))?;
                let (fitted, cache) = stats_stage(prep, &cb, Some(&store))?;
                let c = constellation_stage(&cfg, &cache, order, Some(&store))?;
                orders.push(order_theory(
                    &cfg,
                    &fitted.stats,
                    &c.gray,
                    &c.learned,
                    &cache.train,
                )?);
                Ok(())
            })?;
            let report = TheoryReport::new(&cfg, orders);
            for c in &report.checks {
                println!("{c}");
            }
            let mut json = serde_json::to_vec_pretty(&report)?;
            json.push(b'\n');
            write_file(&cfg.output_dir.join("theory.json"), &json)?;
            if !report.passed() {
                println!("theory checks failed");
                return Ok(ExitCode::from(1));
            }
            println!("all theory checks passed");
        }
        Command::Plot { report } => {
            let path = report
                .clone()
                .unwrap_or_else(|| cfg.output_dir.join("report.json"));
            let report = ExperimentReport::load(&path)?;
            for p in render_plots(&report, &cfg.output_dir)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
