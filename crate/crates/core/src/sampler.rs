//! Budgeted link-centric subgraph extraction.
//!
//! A sample is gathered by fanout-limited expansion from each query endpoint
//! (one tree per endpoint, unioned), truncated to the budget closest layers
//! first, and given canonical endpoint indices 0 and 1 with every other node
//! placed at a uniformly random index.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Pair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Expansion depth per endpoint.
    pub depth: usize,
    /// Neighbors drawn per expanded node.
    pub fanout: usize,
    /// Maximum context nodes per sample, endpoints included.
    pub budget: usize,
    /// Hide the query edge from the sample (both as a traversal edge and in
    /// the induced adjacency).
    pub exclude_query_edge: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            depth: 2,
            fanout: 20,
            budget: 32,
            exclude_query_edge: true,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 || self.fanout < 1 || self.budget < 2 {
            return Err(Error::config(format!(
                "sampler needs depth >= 1, fanout >= 1, budget >= 2 (got {}, {}, {})",
                self.depth, self.fanout, self.budget
            )));
        }
        Ok(())
    }
}

/// Sampled subgraph in local index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphSample {
    /// Global id of the node at each local index; `[0]` is the source and
    /// `[1]` the destination.
    pub nodes: Vec<usize>,
    /// Row-major `N x N` 0/1 induced adjacency, symmetric with zero diagonal.
    pub adjacency: Vec<u8>,
}

impl SubgraphSample {
    /// Induced subgraph on `nodes` (in that local order), optionally hiding
    /// one pair.
    pub fn induced(g: &Graph, nodes: Vec<usize>, hidden: Option<Pair>) -> Result<SubgraphSample> {
        if nodes.len() < 2 {
            return Err(Error::invalid("a sample holds at least the two endpoints"));
        }
        for &v in &nodes {
            g.check(v)?;
        }
        let n = nodes.len();
        let mut local: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, &v) in nodes.iter().enumerate() {
            if local.insert(v, i).is_some() {
                return Err(Error::invalid(format!("node {v} listed twice in a sample")));
            }
        }
        let hidden = hidden.map(|(a, b)| crate::graph::canonical(a, b));
        let mut adjacency = vec![0u8; n * n];
        for (i, &v) in nodes.iter().enumerate() {
            for &w in g.adj(v) {
                if hidden == Some(crate::graph::canonical(v, w)) {
                    continue;
                }
                if let Some(&j) = local.get(&w) {
                    adjacency[i * n + j] = 1;
                }
            }
        }
        Ok(SubgraphSample { nodes, adjacency })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn query(&self) -> Pair {
        (self.nodes[0], self.nodes[1])
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.len() + j] == 1
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let n = self.len();
        &self.adjacency[i * n..(i + 1) * n]
    }

    /// Local edges `(i, j)` with `i < j`.
    pub fn local_edges(&self) -> Vec<Pair> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Reorders local indices: local node `i` moves to index `order[i]`.
    /// Endpoints must stay at 0 and 1.
    pub fn reindexed(&self, order: &[usize]) -> SubgraphSample {
        let n = self.len();
        assert_eq!(order.len(), n);
        assert!(order[0] == 0 && order[1] == 1, "endpoints keep indices 0 and 1");
        let mut nodes = vec![0; n];
        let mut adjacency = vec![0u8; n * n];
        for i in 0..n {
            nodes[order[i]] = self.nodes[i];
            for j in 0..n {
                adjacency[order[i] * n + order[j]] = self.adjacency[i * n + j];
            }
        }
        SubgraphSample { nodes, adjacency }
    }
}

/// Extracts the sample for query `(u, v)`. Isolated endpoints yield a
/// two-node sample with no edges.
pub fn sample_subgraph<R: Rng + ?Sized>(
    g: &Graph,
    u: usize,
    v: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SubgraphSample> {
    cfg.validate()?;
    g.check(u)?;
    g.check(v)?;
    if u == v {
        return Err(Error::invalid(format!("query endpoints must differ, got ({u}, {u})")));
    }
    let hidden = cfg.exclude_query_edge.then(|| crate::graph::canonical(u, v));

    // layer of each reached node, minimized over both endpoint trees
    let mut layer: BTreeMap<usize, usize> = BTreeMap::new();
    for root in [u, v] {
        let tree = expand(g, root, hidden, cfg, rng);
        for (node, depth) in tree {
            layer
                .entry(node)
                .and_modify(|d| *d = (*d).min(depth))
                .or_insert(depth);
        }
    }

    let mut by_layer: Vec<Vec<usize>> = vec![Vec::new(); cfg.depth + 1];
    for (&node, &depth) in &layer {
        if node != u && node != v {
            by_layer[depth].push(node);
        }
    }

    let room = cfg.budget - 2;
    let mut kept = Vec::new();
    for mut nodes in by_layer {
        if kept.len() == room {
            break;
        }
        let free = room - kept.len();
        if nodes.len() > free {
            nodes.shuffle(rng);
            nodes.truncate(free);
        }
        kept.extend(nodes);
    }
    kept.shuffle(rng);

    let mut nodes = Vec::with_capacity(kept.len() + 2);
    nodes.push(u);
    nodes.push(v);
    nodes.extend(kept);
    SubgraphSample::induced(g, nodes, hidden)
}

// Fanout-limited breadth-first expansion from one root; returns
// (node, layer) in discovery order.
fn expand<R: Rng + ?Sized>(
    g: &Graph,
    root: usize,
    hidden: Option<Pair>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut seen = BTreeMap::new();
    seen.insert(root, 0usize);
    let mut order = vec![(root, 0)];
    let mut frontier = vec![root];
    for depth in 1..=cfg.depth {
        let mut next = Vec::new();
        for &x in &frontier {
            let candidates: Vec<usize> = g
                .adj(x)
                .iter()
                .copied()
                .filter(|&y| hidden != Some(crate::graph::canonical(x, y)))
                .collect();
            let picked: Vec<usize> = if candidates.len() <= cfg.fanout {
                candidates
            } else {
                index::sample(rng, candidates.len(), cfg.fanout)
                    .into_iter()
                    .map(|i| candidates[i])
                    .collect()
            };
            for y in picked {
                if let std::collections::btree_map::Entry::Vacant(e) = seen.entry(y) {
                    e.insert(depth);
                    order.push((y, depth));
                    next.push(y);
                }
            }
        }
        frontier = next;
    }
    order
}

/// Redraws the index assignment of non-endpoint nodes uniformly at random.
pub fn resample_indices<R: Rng + ?Sized>(sample: &SubgraphSample, rng: &mut R) -> SubgraphSample {
    let n = sample.len();
    let mut targets: Vec<usize> = (2..n).collect();
    targets.shuffle(rng);
    let mut order = vec![0, 1];
    order.extend(targets);
    sample.reindexed(&order)
}

const SAMPLE_MAGIC: &[u8; 4] = b"LFSS";
const SAMPLE_VERSION: u32 = 1;

/// Serializes samples: magic `LFSS`, u32 version, u64 count, then per
/// record u32 `N`, `N` u64 global ids and the `N x N` adjacency packed
/// row-major, least significant bit first, `ceil(N*N/8)` bytes. All integers
/// little-endian.
pub fn write_sample_cache(samples: &[SubgraphSample], mut out: impl Write) -> std::io::Result<()> {
    out.write_all(SAMPLE_MAGIC)?;
    out.write_all(&SAMPLE_VERSION.to_le_bytes())?;
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    for s in samples {
        out.write_all(&(s.len() as u32).to_le_bytes())?;
        for &id in &s.nodes {
            out.write_all(&(id as u64).to_le_bytes())?;
        }
        out.write_all(&pack_bits(&s.adjacency))?;
    }
    Ok(())
}

pub fn read_sample_cache(mut input: impl Read) -> Result<Vec<SubgraphSample>> {
    let mut buf = Vec::new();
    input
        .read_to_end(&mut buf)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut cur = ByteCursor::new(&buf);
    if cur.take(4)? != SAMPLE_MAGIC {
        return Err(Error::Format("not a sample cache (bad magic)".into()));
    }
    let version = cur.u32()?;
    if version != SAMPLE_VERSION {
        return Err(Error::Format(format!("unsupported sample cache version {version}")));
    }
    let count = cur.u64()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let n = cur.u32()? as usize;
        let nodes = (0..n).map(|_| cur.u64().map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
        let bytes = cur.take((n * n).div_ceil(8))?;
        out.push(SubgraphSample {
            nodes,
            adjacency: unpack_bits(bytes, n * n),
        });
    }
    if !cur.is_done() {
        return Err(Error::Format("trailing bytes after sample records".into()));
    }
    Ok(out)
}

pub fn save_sample_cache(samples: &[SubgraphSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_sample_cache(samples, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_sample_cache(path: impl AsRef<Path>) -> Result<Vec<SubgraphSample>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_sample_cache(std::io::BufReader::new(file))
}

pub(crate) fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

pub(crate) fn unpack_bits(bytes: &[u8], len: usize) -> Vec<u8> {
    (0..len).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()
}

pub(crate) struct ByteCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }
}
