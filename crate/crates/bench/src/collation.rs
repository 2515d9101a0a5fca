//! Two ways to build the same padded token batch.
//!
//! `pad_stack` stacks pre-encoded per-sample token matrices into a dense
//! buffer. `concat_objects` mimics the usual graph-library route: each sample
//! is a small graph object with a COO `edge_index`; a batch concatenates them
//! with node offsets, a `batch` assignment vector and `ptr` boundaries, and is
//! then densified back into per-sample adjacency rows.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use linkformer_core::tokenizer::{self, token_width, TokenMatrix};
use linkformer_core::{SubgraphSample, TokenBatch};
use serde::Serialize;

use crate::{alloc, BenchError, Result, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    PadStack,
    ConcatObjects,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::PadStack => "pad_stack",
            Backend::ConcatObjects => "concat_objects",
        })
    }
}

impl FromStr for Backend {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pad_stack" => Ok(Backend::PadStack),
            "concat_objects" => Ok(Backend::ConcatObjects),
            _ => Err(BenchError::Setting(format!("unknown backend {s:?}"))),
        }
    }
}

/// One sample as a standalone graph: directed COO edges in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphObject {
    pub num_nodes: usize,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
}

impl From<&SubgraphSample> for GraphObject {
    fn from(s: &SubgraphSample) -> Self {
        let n = s.len();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if s.has_edge(i, j) {
                    src.push(i);
                    dst.push(j);
                }
            }
        }
        GraphObject { num_nodes: n, src, dst }
    }
}

/// Disjoint union of graph objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcatBatch {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    /// Owning graph of each node.
    pub batch: Vec<usize>,
    /// `ptr[g]..ptr[g + 1]` are graph `g`'s nodes.
    pub ptr: Vec<usize>,
}

pub fn concat_objects(objs: &[GraphObject]) -> ConcatBatch {
    let nodes: usize = objs.iter().map(|o| o.num_nodes).sum();
    let edges: usize = objs.iter().map(|o| o.src.len()).sum();
    let mut out = ConcatBatch {
        src: Vec::with_capacity(edges),
        dst: Vec::with_capacity(edges),
        batch: Vec::with_capacity(nodes),
        ptr: Vec::with_capacity(objs.len() + 1),
    };
    let mut offset = 0;
    out.ptr.push(0);
    for (g, o) in objs.iter().enumerate() {
        out.src.extend(o.src.iter().map(|&i| i + offset));
        out.dst.extend(o.dst.iter().map(|&j| j + offset));
        out.batch.extend(std::iter::repeat_n(g, o.num_nodes));
        offset += o.num_nodes;
        out.ptr.push(offset);
    }
    out
}

/// Dense token batch from a concatenated batch.
pub fn densify(cb: &ConcatBatch, n_max: usize) -> Result<TokenBatch> {
    let b = cb.ptr.len().saturating_sub(1);
    if b == 0 {
        return Err(BenchError::Setting("cannot collate an empty list".into()));
    }
    let sizes: Vec<usize> = cb.ptr.windows(2).map(|w| w[1] - w[0]).collect();
    let n_b = sizes.iter().copied().max().unwrap_or(0);
    if let Some(&n) = sizes.iter().find(|&&n| n > n_max || n < 2) {
        return Err(BenchError::Setting(format!("sample of {n} nodes does not fit n_max {n_max}")));
    }
    let w = token_width(n_max);
    let per = n_b + 2;
    let mut tokens = vec![0u8; b * per * w];
    let mut mask = vec![false; b * per];
    for (e, (&s, &d)) in cb.src.iter().zip(&cb.dst).enumerate() {
        let g = cb.batch[s];
        if cb.batch[d] != g {
            return Err(BenchError::Setting(format!("edge {e} crosses graphs")));
        }
        let (ls, ld) = (s - cb.ptr[g], d - cb.ptr[g]);
        tokens[(g * per + ls) * w + n_max + ld] = 1;
    }
    for (g, &n) in sizes.iter().enumerate() {
        let base = g * per;
        for r in 0..n {
            let row = &mut tokens[(base + r) * w..(base + r + 1) * w];
            row[r] = 1;
            row[2 * n_max] = 1;
        }
        for t in 0..2 {
            let (from, to) = ((base + t) * w, (base + n_b + t) * w);
            tokens.copy_within(from + n_max..from + n_max + n, to + n_max);
            tokens[to + t] = 1;
            tokens[to + 2 * n_max + 1] = 1;
        }
        mask[base..base + n].fill(true);
        mask[base + n_b] = true;
        mask[base + n_b + 1] = true;
    }
    Ok(TokenBatch {
        b,
        n_b,
        n_max,
        tokens,
        mask,
        sizes,
        labels: None,
    })
}

pub fn collate_concat(objs: &[GraphObject], n_max: usize) -> Result<TokenBatch> {
    densify(&concat_objects(objs), n_max)
}

pub fn collate_pad_stack(mats: &[TokenMatrix]) -> Result<TokenBatch> {
    Ok(tokenizer::collate(mats, None)?)
}

/// Per-sample inputs for both backends, built once outside the timed region.
pub struct CollationInputs {
    pub n_max: usize,
    pub mats: Vec<TokenMatrix>,
    pub objs: Vec<GraphObject>,
}

impl CollationInputs {
    pub fn new(samples: &[SubgraphSample], n_max: usize) -> Result<Self> {
        Ok(CollationInputs {
            n_max,
            mats: samples
                .iter()
                .map(|s| tokenizer::encode(s, n_max))
                .collect::<linkformer_core::Result<_>>()?,
            objs: samples.iter().map(GraphObject::from).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// The first `size` samples, cycling when the pool is smaller.
    pub fn take(&self, size: usize) -> (Vec<TokenMatrix>, Vec<GraphObject>) {
        let idx = (0..size).map(|i| i % self.len());
        (
            idx.clone().map(|i| self.mats[i].clone()).collect(),
            idx.map(|i| self.objs[i].clone()).collect(),
        )
    }

    pub fn collate(&self, backend: Backend, mats: &[TokenMatrix], objs: &[GraphObject]) -> Result<TokenBatch> {
        match backend {
            Backend::PadStack => collate_pad_stack(mats),
            Backend::ConcatObjects => collate_concat(objs, self.n_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollationRow {
    pub backend: Backend,
    pub batch_size: usize,
    pub median_s: f64,
    pub p95_s: f64,
    /// Peak transient heap bytes; 0 without the tracking allocator.
    pub peak_bytes: usize,
}

pub const CSV_HEADER: &str = "backend,batch_size,median_s,p95_s,peak_bytes";

impl CollationRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{:.9},{:.9},{}",
            self.backend, self.batch_size, self.median_s, self.p95_s, self.peak_bytes
        )
    }
}

pub fn rows_to_csv(rows: &[CollationRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

/// Times both backends at each batch size. Outputs are compared before any
/// timing; a mismatch aborts the run.
pub fn bench_collation(
    inputs: &CollationInputs,
    batch_sizes: &[usize],
    reps: usize,
    warmup: usize,
) -> Result<Vec<CollationRow>> {
    if inputs.is_empty() {
        return Err(BenchError::Setting("no samples to collate".into()));
    }
    if reps == 0 {
        return Err(BenchError::Setting("reps must be positive".into()));
    }
    let mut rows = Vec::new();
    for &size in batch_sizes {
        if size == 0 {
            return Err(BenchError::Setting("batch sizes must be positive".into()));
        }
        let (mats, objs) = inputs.take(size);
        let a = collate_pad_stack(&mats)?;
        let b = collate_concat(&objs, inputs.n_max)?;
        if a != b {
            let first = (0..a.b.min(b.b)).find(|&s| a.unpadded(s) != b.unpadded(s));
            return Err(BenchError::Mismatch {
                batch_size: size,
                detail: match first {
                    Some(s) => format!("sample {s} differs"),
                    None => "batch layout differs".into(),
                },
            });
        }
        for backend in [Backend::PadStack, Backend::ConcatObjects] {
            for _ in 0..warmup {
                std::hint::black_box(inputs.collate(backend, &mats, &objs)?);
            }
            let mut times = Vec::with_capacity(reps);
            let mut peak = 0;
            for _ in 0..reps {
                let (out, bytes) = alloc::peak_during(|| {
                    let t = Instant::now();
                    let out = inputs.collate(backend, &mats, &objs);
                    (out, t.elapsed().as_secs_f64())
                });
                let (batch, secs) = out;
                std::hint::black_box(batch?);
                times.push(secs);
                peak = peak.max(bytes);
            }
            let s = Summary::of(&times);
            rows.push(CollationRow {
                backend,
                batch_size: size,
                median_s: s.median,
                p95_s: s.p95,
                peak_bytes: peak,
            });
        }
    }
    Ok(rows)
}
