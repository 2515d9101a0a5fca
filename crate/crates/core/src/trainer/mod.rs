//! Training for link prediction (BCE over positives and fresh negatives) and
//! heuristic regression (MSE on normalized targets).

mod config;
mod mpnn;
mod optim;

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, EdgeSplit, Graph, Pair};
use crate::heuristics::{HeuristicKind, NormalizationSpec, NormalizationStats, PairScorer};
use crate::model::{
    checkpoint_bytes, checkpoint_digest, loss_and_grad, ForwardOptions, LossKind, ModelParams,
};
use crate::pipeline;
use crate::rng::{keyed_stream, stream, Stream};
use crate::sampler::sample_subgraph;

pub use config::{ConfigFile, DataConfig, Task, TrainConfig};
pub use mpnn::{MpnnConfig, MpnnLayer, MpnnParams};
pub use optim::AdamW;

/// `k` uniform non-edges per positive, drawn by rejection. Errors when the
/// graph is complete.
pub fn sample_negatives<R: Rng + ?Sized>(g: &Graph, positives: &[Pair], k: usize, rng: &mut R) -> Result<Vec<Pair>> {
    let n = g.num_nodes();
    if n < 2 || g.num_edges() >= n * (n - 1) / 2 {
        return Err(Error::invalid("graph has no non-edges to sample negatives from"));
    }
    let mut out = Vec::with_capacity(positives.len() * k);
    for _ in 0..positives.len() * k {
        loop {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u != v && !g.has_edge(u, v) {
                out.push(canonical(u, v));
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub loss: f64,
    pub batches: usize,
    pub examples: usize,
    pub seconds_per_batch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub config_digest: String,
    pub epochs: Vec<EpochRecord>,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_digest: Option<String>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// One JSON object per epoch followed by a summary line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).expect("record serializes"));
            out.push('\n');
        }
        let summary = serde_json::json!({
            "summary": {
                "seed": self.seed,
                "config_digest": self.config_digest,
                "epochs": self.epochs.len(),
                "final_loss": self.epochs.last().map(|e| e.loss),
                "checkpoint": self.checkpoint,
                "checkpoint_digest": self.checkpoint_digest,
                "stopped_early": self.stopped_early,
            }
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

/// Called after each epoch with the epoch index and current parameters;
/// returning `true` stops training.
pub type EpochHook<'a, M> = &'a mut dyn FnMut(usize, &M) -> Result<bool>;

/// A pair model the loop can optimize.
pub trait Trainable: Clone {
    fn batch_loss_grad(
        &self,
        prepared: &pipeline::Prepared,
        targets: &[f64],
        kind: LossKind,
        dropout: &mut dyn rand::RngCore,
    ) -> Result<(f64, Vec<(String, Array2<f64>)>)>;

    fn trainable_mut(&mut self) -> Vec<(String, &mut Array2<f64>)>;

    /// Serialized form for checkpoints, if the model has one.
    fn checkpoint(&self) -> Option<Vec<u8>> {
        None
    }
}

impl Trainable for ModelParams {
    fn batch_loss_grad(
        &self,
        prepared: &pipeline::Prepared,
        targets: &[f64],
        kind: LossKind,
        dropout: &mut dyn rand::RngCore,
    ) -> Result<(f64, Vec<(String, Array2<f64>)>)> {
        let mut opts = ForwardOptions {
            features: prepared.features.as_ref(),
            dropout_rng: Some(dropout),
            ..Default::default()
        };
        let (loss, grads) = loss_and_grad(self, &prepared.batch, &prepared.op, targets, kind, &mut opts)?;
        Ok((loss, grads.named().into_iter().map(|(n, g)| (n, g.clone())).collect()))
    }

    fn trainable_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        ModelParams::trainable_mut(self)
    }

    fn checkpoint(&self) -> Option<Vec<u8>> {
        Some(checkpoint_bytes(self))
    }
}

impl Trainable for MpnnParams {
    fn batch_loss_grad(
        &self,
        prepared: &pipeline::Prepared,
        targets: &[f64],
        kind: LossKind,
        _dropout: &mut dyn rand::RngCore,
    ) -> Result<(f64, Vec<(String, Array2<f64>)>)> {
        self.loss_and_grad(&prepared.samples, targets, kind)
    }

    fn trainable_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        self.named_mut()
    }
}

/// Supplies the `(pair, target)` examples of one epoch.
pub type ExampleSource<'a> = &'a mut dyn FnMut(usize) -> Result<Vec<(Pair, f64)>>;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn finite_grads(grads: &[(String, Array2<f64>)]) -> Result<()> {
    for (name, g) in grads {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric(name.clone(), "non-finite gradient"));
        }
    }
    Ok(())
}

/// The optimization loop shared by every task and model.
///
/// Epoch `e` shuffles its examples with a stream keyed by `e`; a fractional
/// final epoch trains on the leading share of that shuffled order. With an
/// output directory, a checkpoint is written after every epoch
/// (`epoch_<e>.ckpt`) and at the end (`final.ckpt`); on divergence the last
/// good parameters go to `last_good.ckpt` before the error is returned.
#[allow(clippy::too_many_arguments)]
pub fn fit<M: Trainable>(
    model: &mut M,
    cfg: &TrainConfig,
    graph: &Graph,
    features: Option<&Array2<f64>>,
    examples: ExampleSource<'_>,
    kind: LossKind,
    out_dir: Option<&Path>,
    hook: Option<EpochHook<'_, M>>,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut hook = hook;
    let mut opt = AdamW::new(cfg.learning_rate, cfg.weight_decay);
    let mut report = TrainReport {
        seed: cfg.seed,
        config_digest: cfg.digest(),
        epochs: Vec::new(),
        checkpoint: None,
        checkpoint_digest: None,
        stopped_early: false,
    };
    let sampler_seed = cfg.seed.wrapping_add(cfg.sampler.seed);
    let total_epochs = cfg.epochs.ceil() as usize;
    for epoch in 0..total_epochs {
        let mut data = examples(epoch)?;
        if data.is_empty() {
            return Err(Error::invalid("no training examples"));
        }
        data.shuffle(&mut keyed_stream(cfg.seed, Stream::Shuffle, epoch as u64));
        let fraction = (cfg.epochs - epoch as f64).min(1.0);
        let micro = cfg.batch_size.div_ceil(cfg.accumulation_steps).max(1);
        let all_batches = data.len().div_ceil(micro);
        let batches = ((fraction * all_batches as f64).ceil() as usize).clamp(1, all_batches);
        let mut sampler_rng = keyed_stream(sampler_seed, Stream::Sampler, epoch as u64);
        let mut dropout_rng = keyed_stream(cfg.seed, Stream::Dropout, epoch as u64);

        let started = Instant::now();
        let mut loss_sum = 0.0;
        let mut seen = 0;
        let mut pending: Option<Vec<(String, Array2<f64>)>> = None;
        let mut pending_count = 0;
        let chunks: Vec<&[(Pair, f64)]> = data.chunks(micro).take(batches).collect();
        for (i, chunk) in chunks.iter().enumerate() {
            let pairs: Vec<Pair> = chunk.iter().map(|(p, _)| *p).collect();
            let targets: Vec<f64> = chunk.iter().map(|(_, t)| *t).collect();
            let samples = pairs
                .iter()
                .map(|&(u, v)| sample_subgraph(graph, u, v, &cfg.sampler, &mut sampler_rng))
                .collect::<Result<Vec<_>>>()?;
            let prepared = pipeline::from_samples(samples, &cfg.encoder, features)?;
            let step = model
                .batch_loss_grad(&prepared, &targets, kind, &mut dropout_rng)
                .and_then(|(loss, grads)| {
                    if !loss.is_finite() {
                        return Err(Error::numeric(format!("epoch {epoch} batch {i}"), "non-finite loss"));
                    }
                    finite_grads(&grads)?;
                    Ok((loss, grads))
                });
            let (loss, grads) = match step {
                Ok(x) => x,
                Err(e) => {
                    if let (Some(dir), Some(bytes)) = (out_dir, model.checkpoint()) {
                        write_file(&dir.join("last_good.ckpt"), &bytes)?;
                    }
                    return Err(e);
                }
            };
            loss_sum += loss;
            seen += chunk.len();
            match &mut pending {
                Some(acc) => {
                    for ((_, a), (_, g)) in acc.iter_mut().zip(&grads) {
                        *a += g;
                    }
                }
                None => pending = Some(grads),
            }
            pending_count += 1;
            if pending_count == cfg.accumulation_steps || i + 1 == chunks.len() {
                let mut acc = pending.take().expect("pending gradients");
                let scale = 1.0 / pending_count as f64;
                for (_, g) in acc.iter_mut() {
                    g.mapv_inplace(|x| x * scale);
                }
                opt.step(model.trainable_mut(), &acc);
                pending_count = 0;
            }
        }
        let elapsed = started.elapsed().as_secs_f64();
        report.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / chunks.len() as f64,
            batches: chunks.len(),
            examples: seen,
            seconds_per_batch: elapsed / chunks.len() as f64,
        });
        if let (Some(dir), Some(bytes)) = (out_dir, model.checkpoint()) {
            write_file(&dir.join(format!("epoch_{epoch}.ckpt")), &bytes)?;
        }
        if let Some(h) = hook.as_mut() {
            if h(epoch, model)? {
                report.stopped_early = true;
                break;
            }
        }
    }
    if let Some(bytes) = model.checkpoint() {
        use sha2::{Digest, Sha256};
        report.checkpoint_digest = Some(crate::model::hex_digest(&Sha256::digest(&bytes)));
        if let Some(dir) = out_dir {
            let path = dir.join("final.ckpt");
            write_file(&path, &bytes)?;
            report.checkpoint = Some(path);
        }
    }
    Ok(report)
}

/// Link-prediction training on `graph` with `positives`; negatives are
/// redrawn every epoch from a stream keyed by the epoch.
pub fn train_link(
    cfg: &TrainConfig,
    graph: &Graph,
    positives: &[Pair],
    features: Option<&Array2<f64>>,
    out_dir: Option<&Path>,
    hook: Option<EpochHook<'_, ModelParams>>,
) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    let mut params = ModelParams::init(&cfg.encoder, &mut stream(cfg.seed, Stream::Init))?;
    let mut source = |epoch: usize| -> Result<Vec<(Pair, f64)>> {
        let mut rng = keyed_stream(cfg.seed, Stream::Negatives, epoch as u64);
        let negs = sample_negatives(graph, positives, cfg.negatives_per_positive, &mut rng)?;
        let mut out: Vec<(Pair, f64)> = positives.iter().map(|&p| (p, 1.0)).collect();
        out.extend(negs.into_iter().map(|p| (p, 0.0)));
        Ok(out)
    };
    let report = fit(&mut params, cfg, graph, features, &mut source, LossKind::Bce, out_dir, hook)?;
    Ok((params, report))
}

/// Normalized heuristic targets for `pairs`, with statistics fit on these
/// same pairs. SPD uses the graph's largest component diameter as `d_max`.
pub fn regression_targets(
    graph: &Graph,
    pairs: &[Pair],
    spec: &NormalizationSpec,
) -> Result<(Vec<f64>, NormalizationStats)> {
    let scorer = PairScorer::new(graph, spec.kind, spec)?;
    let raw = pairs
        .iter()
        .map(|&(u, v)| scorer.score(u, v))
        .collect::<Result<Vec<_>>>()?;
    let d_max = (spec.kind == HeuristicKind::Spd).then(|| crate::heuristics::max_component_diameter(graph));
    let stats = NormalizationStats::fit(&raw, spec, d_max)?;
    Ok((stats.apply(&raw), stats))
}

/// Heuristic regression on fixed `(pair, target)` examples.
pub fn train_regression<M: Trainable>(
    model: &mut M,
    cfg: &TrainConfig,
    graph: &Graph,
    examples: &[(Pair, f64)],
    features: Option<&Array2<f64>>,
    out_dir: Option<&Path>,
    hook: Option<EpochHook<'_, M>>,
) -> Result<TrainReport> {
    let mut source = |_epoch: usize| -> Result<Vec<(Pair, f64)>> { Ok(examples.to_vec()) };
    fit(model, cfg, graph, features, &mut source, LossKind::Mse, out_dir, hook)
}

/// Trains per `cfg.task` on the split's training edges. Regression uses the
/// training edges plus an equal number of fixed non-edges as its pair set.
pub fn train(
    cfg: &TrainConfig,
    num_nodes: usize,
    split: &EdgeSplit,
    features: Option<&Array2<f64>>,
    out_dir: Option<&Path>,
) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    split.validate(num_nodes)?;
    let graph = split.observed_graph(num_nodes, false)?;
    if cfg.epochs == 0.0 {
        let params = ModelParams::init(&cfg.encoder, &mut stream(cfg.seed, Stream::Init))?;
        let mut report = TrainReport {
            seed: cfg.seed,
            config_digest: cfg.digest(),
            epochs: Vec::new(),
            checkpoint: None,
            checkpoint_digest: Some(checkpoint_digest(&params)),
            stopped_early: false,
        };
        if let Some(dir) = out_dir {
            let path = dir.join("final.ckpt");
            write_file(&path, &checkpoint_bytes(&params))?;
            report.checkpoint = Some(path);
        }
        return Ok((params, report));
    }
    match cfg.task {
        Task::LinkBce => train_link(cfg, &graph, &split.train, features, out_dir, None),
        Task::HeuristicRegression(kind) => {
            let spec = cfg.normalization.unwrap_or_else(|| NormalizationSpec::new(kind));
            let mut rng = stream(cfg.seed, Stream::Negatives);
            let mut pairs = split.train.clone();
            pairs.extend(sample_negatives(&graph, &split.train, 1, &mut rng)?);
            let (targets, _) = regression_targets(&graph, &pairs, &spec)?;
            let examples: Vec<(Pair, f64)> = pairs.into_iter().zip(targets).collect();
            let mut params = ModelParams::init(&cfg.encoder, &mut stream(cfg.seed, Stream::Init))?;
            let report = train_regression(&mut params, cfg, &graph, &examples, features, out_dir, None)?;
            Ok((params, report))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;

    #[test]
    fn negatives_examples() {
        let mut rng = stream(1, Stream::Negatives);
        assert!(sample_negatives(&generators::complete(4), &[(0, 1)], 1, &mut rng).is_err());
        let negs = sample_negatives(&generators::path(3), &[(0, 1)], 1, &mut rng).unwrap();
        assert_eq!(negs, vec![(0, 2)]);
        let g = generators::erdos_renyi(30, 0.2, &mut rng);
        let a = sample_negatives(&g, &[(0, 1), (2, 3)], 3, &mut stream(5, Stream::Negatives)).unwrap();
        let b = sample_negatives(&g, &[(0, 1), (2, 3)], 3, &mut stream(5, Stream::Negatives)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|&(u, v)| u != v && !g.has_edge(u, v)));
    }
}
