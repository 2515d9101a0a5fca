//! Per-batch wall-clock time of training and inference steps as depth grows.

use std::time::Instant;

use linkformer_core::model::{forward, LossKind};
use linkformer_core::pipeline::{self, Prepared};
use linkformer_core::rng::{stream, Stream};
use linkformer_core::trainer::{AdamW, Trainable};
use linkformer_core::{EncoderConfig, Graph, ModelParams, SamplerConfig};
use rand::seq::IndexedRandom;
use serde::Serialize;

use crate::{BenchError, Result, Summary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardBenchConfig {
    pub layers: Vec<usize>,
    pub batch_size: usize,
    pub batches: usize,
    pub warmup: usize,
    pub sampler: SamplerConfig,
    pub hidden: usize,
    pub heads: usize,
}

impl Default for ForwardBenchConfig {
    fn default() -> Self {
        Self {
            layers: vec![3, 8],
            batch_size: 100,
            batches: 50,
            warmup: 2,
            sampler: SamplerConfig {
                depth: 1,
                fanout: 75,
                budget: 64,
                ..Default::default()
            },
            hidden: 32,
            heads: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Infer,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Train => "train",
            Mode::Infer => "infer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardRow {
    pub layers: usize,
    pub mode: Mode,
    pub batch_size: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

pub const CSV_HEADER: &str = "layers,mode,batch_size,mean_s,std_s";

impl ForwardRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:.9},{:.9}",
            self.layers, self.mode, self.batch_size, self.mean_s, self.std_s
        )
    }
}

pub fn rows_to_csv(rows: &[ForwardRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

pub fn encoder_for(cfg: &ForwardBenchConfig, layers: usize) -> EncoderConfig {
    EncoderConfig {
        hidden: cfg.hidden,
        intermediate: 2 * cfg.hidden,
        heads: cfg.heads,
        layers,
        n_max: cfg.sampler.budget,
        ..Default::default()
    }
}

/// `batches` prepared batches of edges drawn uniformly from the graph.
pub fn prepare_batches(graph: &Graph, cfg: &ForwardBenchConfig, seed: u64) -> Result<Vec<Prepared>> {
    let edges = graph.edges();
    if edges.is_empty() {
        return Err(BenchError::Setting("graph has no edges".into()));
    }
    let encoder = encoder_for(cfg, 1);
    let mut pick = stream(seed, Stream::Shuffle);
    let mut rng = stream(seed, Stream::Sampler);
    (0..cfg.batches + cfg.warmup)
        .map(|_| {
            let pairs: Vec<_> = (0..cfg.batch_size)
                .map(|_| *edges.choose(&mut pick).expect("non-empty"))
                .collect();
            Ok(pipeline::prepare(graph, &pairs, &cfg.sampler, &encoder, None, &mut rng)?)
        })
        .collect()
}

/// Mean and standard deviation of per-batch time for a training step
/// (loss, gradient and optimizer update) and for inference, per depth.
pub fn bench_forward(graph: &Graph, cfg: &ForwardBenchConfig, seed: u64) -> Result<Vec<ForwardRow>> {
    if cfg.batches == 0 || cfg.batch_size == 0 || cfg.layers.is_empty() {
        return Err(BenchError::Setting("need at least one batch, sample and depth".into()));
    }
    let prepared = prepare_batches(graph, cfg, seed)?;
    let targets = vec![1.0; cfg.batch_size];
    let mut rows = Vec::new();
    for &layers in &cfg.layers {
        let encoder = encoder_for(cfg, layers);
        let mut params = ModelParams::init(&encoder, &mut stream(seed, Stream::Init))?;
        let mut opt = AdamW::new(1e-4, 0.0);
        let mut dropout = stream(seed, Stream::Dropout);
        let mut train = Vec::new();
        let mut infer = Vec::new();
        for (i, p) in prepared.iter().enumerate() {
            let t = Instant::now();
            let (_, grads) = params.batch_loss_grad(p, &targets, LossKind::Bce, &mut dropout)?;
            opt.step(params.trainable_mut(), &grads);
            let train_s = t.elapsed().as_secs_f64();

            let t = Instant::now();
            std::hint::black_box(forward(&params, &p.batch, &p.op, None)?);
            let infer_s = t.elapsed().as_secs_f64();
            if i >= cfg.warmup {
                train.push(train_s);
                infer.push(infer_s);
            }
        }
        for (mode, times) in [(Mode::Train, train), (Mode::Infer, infer)] {
            let s = Summary::of(&times);
            rows.push(ForwardRow {
                layers,
                mode,
                batch_size: cfg.batch_size,
                mean_s: s.mean,
                std_s: s.std,
            });
        }
    }
    Ok(rows)
}
