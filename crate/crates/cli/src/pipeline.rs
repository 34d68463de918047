//! End-to-end chain: quantize, select Top-K, modulate, AWGN, demap,
//! reconstruct, classify.

use rand::Rng as _;
use rayon::prelude::*;
use semqam_core::channel::{transmit, ChannelConfig, LinkResult};
use semqam_core::constellation::{gray_qam, train_constellation, Constellation};
use semqam_core::ingest::{parse_csv, parse_idx, patchify, ImageDataset, PatchGeometry};
use semqam_core::ratecontrol::{action_space, train_agent, Evaluation, QAgent};
use semqam_core::rng::{derive_seed, rng_from_seed};
use semqam_core::semantics::{
    train_classifier, QualityAccumulator, SemanticQuality, TaskClassifier,
};
use semqam_core::source::{
    compute_statistics, estimate_sci, quantize_image, reconstruct, top_k, train_codebook,
    ConceptCodebook, ConceptGrid, SciModel, SourceStatistics,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::artifacts::Store;
use crate::config::{DatasetSource, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::synth::synthetic_digits;

/// Seed-derivation tags, one per pipeline stage.
pub mod stage {
    pub const DATA: u64 = 1;
    pub const CLASSIFIER: u64 = 2;
    pub const CODEBOOK: u64 = 3;
    pub const CONSTELLATION: u64 = 4;
    pub const AGENT: u64 = 5;
    pub const SWEEP: u64 = 6;
    pub const PARADOX: u64 = 7;
}

const CHUNK: usize = 50;

fn read(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Loads the configured dataset and splits it into train and test sets.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<(ImageDataset, ImageDataset)> {
    let d = &cfg.dataset;
    let wanted = d.train_size + d.test_size;
    let mut all = match &d.source {
        DatasetSource::Synthetic => synthetic_digits(wanted, derive_seed(cfg.seed, &[stage::DATA])),
        DatasetSource::Idx { images, labels } => parse_idx(&read(images)?, &read(labels)?)?,
        DatasetSource::Csv {
            path,
            height,
            width,
        } => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            parse_csv(&text, *height, *width)?
        }
    };
    if all.len() < wanted {
        return Err(CliError::Config(format!(
            "dataset has {} samples, split needs {wanted}",
            all.len()
        )));
    }
    let train = all.take_front(d.train_size);
    let test = all.take_front(d.test_size);
    Ok((train, test))
}

/// Order-independent state: data, slot geometry and the frozen classifier.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub geometry: PatchGeometry,
    pub train: ImageDataset,
    pub test: ImageDataset,
    pub classifier: TaskClassifier,
    pub train_probs: Vec<Vec<f64>>,
    pub test_probs: Vec<Vec<f64>>,
}

fn classify_all(classifier: &TaskClassifier, images: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(images
        .par_iter()
        .map(|x| classifier.classify(x))
        .collect::<semqam_core::Result<_>>()?)
}

pub fn prepare_with(
    cfg: &ExperimentConfig,
    train: ImageDataset,
    test: ImageDataset,
    classifier: TaskClassifier,
) -> Result<Prepared> {
    let g = cfg.geometry;
    let geometry = PatchGeometry::new(train.height, train.width, g.target_side, g.patch_side)?;
    let train_probs = classify_all(&classifier, &train.images)?;
    let test_probs = classify_all(&classifier, &test.images)?;
    Ok(Prepared {
        geometry,
        train,
        test,
        classifier,
        train_probs,
        test_probs,
    })
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    prepare_stored(cfg, None)
}

/// Trains a codebook on patches sampled uniformly from the training images.
pub fn fit_codebook(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    order: usize,
) -> Result<ConceptCodebook> {
    let seed = derive_seed(cfg.seed, &[stage::CODEBOOK, order as u64]);
    let mut rng = rng_from_seed(derive_seed(seed, &[0]));
    let slots = prep.geometry.num_slots();
    let mut patches = Vec::with_capacity(cfg.codebook.sample_patches);
    let grids: Vec<_> = prep
        .train
        .images
        .iter()
        .map(|img| patchify(img, &prep.geometry))
        .collect::<semqam_core::Result<_>>()?;
    let total = grids.len() * slots;
    if cfg.codebook.sample_patches >= total {
        patches.extend(grids.into_iter().flat_map(|g| g.patches));
    } else {
        for _ in 0..cfg.codebook.sample_patches {
            let k = rng.random_range(0..total);
            patches.push(grids[k / slots].patches[k % slots].clone());
        }
    }
    Ok(train_codebook(
        &patches,
        order,
        &cfg.kmeans(derive_seed(seed, &[1])),
    )?)
}

fn quantize_all(
    codebook: &ConceptCodebook,
    images: &[Vec<f64>],
    geometry: &PatchGeometry,
) -> Result<Vec<Vec<u32>>> {
    Ok(images
        .par_iter()
        .map(|img| quantize_image(codebook, img, geometry))
        .collect::<semqam_core::Result<_>>()?)
}

/// Everything fitted for one modulation order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderArtifacts {
    pub order: usize,
    pub codebook: ConceptCodebook,
    pub sci: SciModel,
    pub stats: SourceStatistics,
    pub gray: Constellation,
    pub learned: Constellation,
    pub agent: QAgent,
    pub agent_curve: Vec<f64>,
}

/// Quantized views of the train and test sets under one codebook.
#[derive(Debug, Clone)]
pub struct GridCache {
    pub train: Vec<ConceptGrid>,
    pub test: Vec<ConceptGrid>,
}

impl GridCache {
    pub fn build(prep: &Prepared, codebook: &ConceptCodebook, sci: &SciModel) -> Result<Self> {
        let attach = |grids: Vec<Vec<u32>>| -> Result<Vec<ConceptGrid>> {
            Ok(grids
                .into_iter()
                .map(|g| sci.grid(g))
                .collect::<semqam_core::Result<_>>()?)
        };
        Ok(Self {
            train: attach(quantize_all(codebook, &prep.train.images, &prep.geometry)?)?,
            test: attach(quantize_all(codebook, &prep.test.images, &prep.geometry)?)?,
        })
    }
}

/// Images with cached classifier outputs and concept grids.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    pub images: &'a [Vec<f64>],
    pub labels: &'a [u32],
    pub probs: &'a [Vec<f64>],
    pub grids: &'a [ConceptGrid],
}

impl<'a> EvalSet<'a> {
    pub fn test(prep: &'a Prepared, cache: &'a GridCache) -> Self {
        Self {
            images: &prep.test.images,
            labels: &prep.test.labels,
            probs: &prep.test_probs,
            grids: &cache.test,
        }
    }

    pub fn train(prep: &'a Prepared, cache: &'a GridCache, n: usize) -> Self {
        let n = n.min(prep.train.len());
        Self {
            images: &prep.train.images[..n],
            labels: &prep.train.labels[..n],
            probs: &prep.train_probs[..n],
            grids: &cache.train[..n],
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub quality: SemanticQuality,
    pub link: LinkResult,
    pub symbols_per_image: f64,
}

/// Runs every image of `set` through the chain with payload size `k`.
///
/// Images are processed in fixed chunks with per-chunk channel seeds, so the
/// outcome does not depend on the thread count.
pub fn run_pipeline(
    classifier: &TaskClassifier,
    codebook: &ConceptCodebook,
    geometry: &PatchGeometry,
    constellation: &Constellation,
    set: EvalSet<'_>,
    k: usize,
    snr_db: f64,
    seed: u64,
) -> Result<PipelineOutcome> {
    if set.is_empty() {
        return Err(CliError::Config("no images to evaluate".into()));
    }
    let chunks: Vec<(QualityAccumulator, LinkResult)> = (0..set.len().div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let range = c * CHUNK..((c + 1) * CHUNK).min(set.len());
            let mut slots = Vec::new();
            let mut sent = Vec::new();
            for grid in &set.grids[range.clone()] {
                let chosen = top_k(&grid.per_slot_sci, k)?;
                sent.extend(chosen.iter().map(|&s| grid.indices[s]));
                slots.push(chosen);
            }
            let channel = ChannelConfig {
                snr_db,
                seed: derive_seed(seed, &[c as u64]),
            };
            let decoded = transmit(constellation, &sent, &channel)?;
            let mut link = LinkResult::empty(constellation.order());
            for (&s, &d) in sent.iter().zip(&decoded) {
                link.record(s, d);
            }
            let mut acc = QualityAccumulator::default();
            let mut offset = 0;
            for (i, chosen) in range.zip(&slots) {
                let received: Vec<(usize, u32)> = chosen
                    .iter()
                    .zip(&decoded[offset..])
                    .map(|(&s, &d)| (s, d))
                    .collect();
                offset += chosen.len();
                let image = reconstruct(codebook, &received, geometry)?;
                acc.add(&set.probs[i], &classifier.classify(&image)?, set.labels[i]);
            }
            Ok((acc, link))
        })
        .collect::<semqam_core::Result<_>>()?;
    let mut acc = QualityAccumulator::default();
    let mut link = LinkResult::empty(constellation.order());
    for (a, l) in &chunks {
        acc.merge(a);
        link.merge(l);
    }
    Ok(PipelineOutcome {
        quality: acc.finish(),
        link,
        symbols_per_image: k as f64,
    })
}

/// `(concept, SCI)` for every slot occurrence of the training set.
pub fn occurrence_samples(grids: &[ConceptGrid]) -> Vec<(u32, f64)> {
    grids
        .iter()
        .flat_map(|g| {
            g.indices
                .iter()
                .copied()
                .zip(g.per_slot_sci.iter().copied())
        })
        .collect()
}

fn staged<T, F>(store: Option<&Store>, kind: &str, name: &str, make: F) -> Result<T>
where
    T: Serialize + DeserializeOwned,
    F: FnOnce() -> Result<T>,
{
    match store {
        Some(s) => s.fetch(kind, name, make),
        None => make(),
    }
}

/// Data plus the frozen classifier, reusing a stored classifier when present.
pub fn prepare_stored(cfg: &ExperimentConfig, store: Option<&Store>) -> Result<Prepared> {
    let (train, test) = load_dataset(cfg)?;
    let classifier = staged(store, "classifier", "classifier", || {
        Ok(train_classifier(
            &train,
            &cfg.classifier_config(derive_seed(cfg.seed, &[stage::CLASSIFIER])),
        )?)
    })?;
    prepare_with(cfg, train, test, classifier)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsArtifact {
    pub sci: SciModel,
    pub stats: SourceStatistics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstellationArtifact {
    pub gray: Constellation,
    pub learned: Constellation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentArtifact {
    pub agent: QAgent,
    pub curve: Vec<f64>,
}

pub fn codebook_stage(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    order: usize,
    store: Option<&Store>,
) -> Result<ConceptCodebook> {
    staged(store, "codebook", &format!("codebook_{order}"), || {
        fit_codebook(cfg, prep, order)
    })
}

pub fn stats_stage(
    prep: &Prepared,
    codebook: &ConceptCodebook,
    store: Option<&Store>,
) -> Result<(StatsArtifact, GridCache)> {
    let order = codebook.order();
    let fitted = staged(store, "statistics", &format!("statistics_{order}"), || {
        let train_idx = quantize_all(codebook, &prep.train.images, &prep.geometry)?;
        let slots = prep.geometry.num_slots();
        let sci = estimate_sci(
            &train_idx,
            &prep.train.labels,
            order,
            slots,
            prep.train.num_classes,
        )?;
        let grids = train_idx
            .into_iter()
            .map(|g| sci.grid(g))
            .collect::<semqam_core::Result<Vec<_>>>()?;
        let stats = compute_statistics(&grids, order)?;
        Ok(StatsArtifact { sci, stats })
    })?;
    let cache = GridCache::build(prep, codebook, &fitted.sci)?;
    Ok((fitted, cache))
}

pub fn constellation_stage(
    cfg: &ExperimentConfig,
    cache: &GridCache,
    order: usize,
    store: Option<&Store>,
) -> Result<ConstellationArtifact> {
    staged(
        store,
        "constellation",
        &format!("constellation_{order}"),
        || {
            let samples = occurrence_samples(&cache.train);
            let seed = derive_seed(cfg.seed, &[stage::CONSTELLATION, order as u64]);
            Ok(ConstellationArtifact {
                gray: gray_qam(order, cfg.power)?,
                learned: train_constellation(&samples, order, cfg.power, &cfg.train_config(seed))?,
            })
        },
    )
}

pub fn agent_stage(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    cache: &GridCache,
    codebook: &ConceptCodebook,
    learned: &Constellation,
    store: Option<&Store>,
) -> Result<AgentArtifact> {
    staged(
        store,
        "agent",
        &format!("agent_{}", codebook.order()),
        || {
            let (agent, curve) = fit_agent(cfg, prep, cache, codebook, learned)?;
            Ok(AgentArtifact { agent, curve })
        },
    )
}

/// Fits codebook, SCI model, statistics, both constellations and the agent.
pub fn build_order(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    order: usize,
    store: Option<&Store>,
) -> Result<(OrderArtifacts, GridCache)> {
    let codebook = codebook_stage(cfg, prep, order, store)?;
    let (StatsArtifact { sci, stats }, cache) = stats_stage(prep, &codebook, store)?;
    let ConstellationArtifact { gray, learned } = constellation_stage(cfg, &cache, order, store)?;
    let AgentArtifact { agent, curve } =
        agent_stage(cfg, prep, &cache, &codebook, &learned, store)?;
    Ok((
        OrderArtifacts {
            order,
            codebook,
            sci,
            stats,
            gray,
            learned,
            agent,
            agent_curve: curve,
        },
        cache,
    ))
}

/// Trains the rate controller against the learned-constellation pipeline on a
/// held batch of training images.
pub fn fit_agent(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    cache: &GridCache,
    codebook: &ConceptCodebook,
    constellation: &Constellation,
) -> Result<(QAgent, Vec<f64>)> {
    let a = &cfg.agent;
    let actions = action_space(a.k_min, a.k_max, a.actions)?;
    let agent = QAgent::new(actions, cfg.agent_config())?;
    let set = EvalSet::train(prep, cache, a.eval_images);
    let slots = prep.geometry.num_slots();
    let seed = derive_seed(cfg.seed, &[stage::AGENT, codebook.order() as u64]);
    let mut failure = None;
    let result = train_agent(
        agent,
        slots,
        a.episodes,
        &cfg.reward_config(),
        seed,
        |k, snr, s| match run_pipeline(
            &prep.classifier,
            codebook,
            &prep.geometry,
            constellation,
            set,
            k,
            snr,
            s,
        ) {
            Ok(o) => Ok(Evaluation {
                q_task: o.quality.q_task,
                ber: o.link.ber(),
            }),
            Err(e) => {
                let msg = e.to_string();
                failure = Some(e);
                Err(semqam_core::Error::Data(msg))
            }
        },
    );
    match (result, failure) {
        (_, Some(e)) => Err(e),
        (r, None) => Ok(r?),
    }
}

/// Greedy payload size for an SNR.
pub fn agent_k(agent: &QAgent, snr_db: f64) -> usize {
    agent.actions[agent.greedy(agent.bin(agent.normalize_snr(snr_db)))]
}
