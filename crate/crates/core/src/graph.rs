//! Undirected simple graphs in CSR form, edge splits and the text formats
//! used to exchange them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub mod generators;

/// Unordered node pair, stored as given (not normalized).
pub type Pair = (usize, usize);

/// Immutable undirected simple graph. Neighbor lists are sorted and
/// duplicate-free, there are no self-loops and adjacency is symmetric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

/// Counters for input lines that were dropped while building a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub self_loops: usize,
    pub duplicates: usize,
    /// Directed input only: arcs whose reverse arc never appeared.
    pub unpaired: usize,
}

impl BuildStats {
    pub fn dropped(&self) -> usize {
        self.self_loops + self.duplicates + self.unpaired
    }
}

impl Graph {
    /// Builds a graph from undirected edges. Self-loops and repeated pairs
    /// (in either orientation) are dropped and counted.
    pub fn from_edges(num_nodes: usize, edges: &[Pair]) -> Result<(Graph, BuildStats)> {
        let mut stats = BuildStats::default();
        let mut seen = HashSet::with_capacity(edges.len());
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            for id in [u, v] {
                if id >= num_nodes {
                    return Err(Error::NodeOutOfRange { id, num_nodes });
                }
            }
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            if !seen.insert(canonical(u, v)) {
                stats.duplicates += 1;
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        Ok((Graph::from_adjacency(adj), stats))
    }

    /// Convenience for tests and generators: panics on out-of-range ids.
    pub fn from_edge_slice(num_nodes: usize, edges: &[Pair]) -> Graph {
        Graph::from_edges(num_nodes, edges)
            .expect("edge ids must be below num_nodes")
            .0
    }

    fn from_adjacency(mut adj: Vec<Vec<usize>>) -> Graph {
        let num_nodes = adj.len();
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        Graph {
            num_nodes,
            offsets,
            targets,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> Result<&[usize]> {
        self.check(v)?;
        Ok(self.adj(v))
    }

    #[inline]
    pub(crate) fn adj(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|v| self.degree(v)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && v < self.num_nodes && self.adj(u).binary_search(&v).is_ok()
    }

    pub fn check(&self, v: usize) -> Result<()> {
        if v < self.num_nodes {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                id: v,
                num_nodes: self.num_nodes,
            })
        }
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> Vec<Pair> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_nodes {
            for &v in self.adj(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Graph on the same node set with the given edges only.
    pub fn with_edges(&self, edges: &[Pair]) -> Result<Graph> {
        Ok(Graph::from_edges(self.num_nodes, edges)?.0)
    }

    /// Relabels nodes: node `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.num_nodes {
            return Err(Error::invalid("relabeling length differs from node count"));
        }
        let edges: Vec<Pair> = self
            .edges()
            .into_iter()
            .map(|(u, v)| (perm[u], perm[v]))
            .collect();
        let (g, stats) = Graph::from_edges(self.num_nodes, &edges)?;
        if stats.dropped() > 0 {
            return Err(Error::invalid("relabeling is not a permutation"));
        }
        Ok(g)
    }

    /// Connected component id per node (ids in order of first appearance).
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.num_nodes];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.num_nodes {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            stack.push(s);
            while let Some(x) = stack.pop() {
                for &y in self.adj(x) {
                    if comp[y] == usize::MAX {
                        comp[y] = next;
                        stack.push(y);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.num_nodes == 0 || self.components().iter().all(|&c| c == 0)
    }
}

#[inline]
pub fn canonical(u: usize, v: usize) -> Pair {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Options for [`load_edge_list`].
#[derive(Debug, Clone, Copy)]
pub struct EdgeListOptions {
    /// Each line is an undirected edge. When false, lines are arcs and only
    /// pairs listed in both directions become edges.
    pub undirected: bool,
    /// Declared node count; inferred as `max id + 1` when absent.
    pub num_nodes: Option<usize>,
}

impl Default for EdgeListOptions {
    fn default() -> Self {
        Self {
            undirected: true,
            num_nodes: None,
        }
    }
}

/// Reads a whitespace-separated edge list, one `u v` pair per line. Blank
/// lines and lines starting with `#` are skipped.
pub fn load_edge_list(path: impl AsRef<Path>, opts: EdgeListOptions) -> Result<(Graph, BuildStats)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, opts)
}

pub fn parse_edge_list(text: &str, opts: EdgeListOptions) -> Result<(Graph, BuildStats)> {
    let mut pairs = Vec::new();
    let mut max_id = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (u, v) = parse_pair(line, idx + 1)?;
        if let Some(n) = opts.num_nodes {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, num_nodes: n });
                }
            }
        }
        max_id = Some(max_id.unwrap_or(0).max(u).max(v));
        pairs.push((u, v));
    }
    let num_nodes = opts.num_nodes.unwrap_or(max_id.map_or(0, |m| m + 1));

    if opts.undirected {
        return Graph::from_edges(num_nodes, &pairs);
    }

    let arcs: HashSet<Pair> = pairs.iter().copied().collect();
    let mut unpaired = 0;
    let mut kept = Vec::new();
    for &(u, v) in &pairs {
        if u != v && !arcs.contains(&(v, u)) {
            unpaired += 1;
        } else {
            kept.push((u, v));
        }
    }
    let (g, mut stats) = Graph::from_edges(num_nodes, &kept)?;
    // every reciprocated pair appears twice by construction
    stats.duplicates = stats.duplicates.saturating_sub(g.num_edges());
    stats.unpaired = unpaired;
    Ok((g, stats))
}

fn parse_pair(line: &str, line_no: usize) -> Result<Pair> {
    let mut it = line.split_whitespace();
    let mut next = |what: &str| -> Result<usize> {
        let tok = it.next().ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("missing {what} node id"),
        })?;
        tok.parse::<usize>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid node id {tok:?}"),
        })
    };
    let u = next("first")?;
    let v = next("second")?;
    if it.next().is_some() {
        return Err(Error::Parse {
            line: line_no,
            message: "expected exactly two node ids".into(),
        });
    }
    Ok((u, v))
}

pub fn format_edge_list(g: &Graph) -> String {
    let mut out = String::new();
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_edge_list(g)).map_err(|e| Error::io(path, e))
}

/// Dense relabeling of arbitrary external node tokens, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    pub external: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn get_or_insert(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.external.len();
        self.external.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn dense(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Sidecar format: one `dense_id external_token` line per node.
    pub fn to_sidecar(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.external.iter().enumerate() {
            let _ = writeln!(out, "{i} {t}");
        }
        out
    }

    pub fn from_sidecar(text: &str) -> Result<IdMap> {
        let mut map = IdMap::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (id, tok) = line.split_once(char::is_whitespace).ok_or(Error::Parse {
                line: idx + 1,
                message: "expected `dense_id token`".into(),
            })?;
            let id: usize = id.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("invalid dense id {id:?}"),
            })?;
            if id != map.external.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "dense ids must be consecutive from 0".into(),
                });
            }
            map.get_or_insert(tok.trim());
        }
        Ok(map)
    }
}

/// Reads an edge list whose node tokens are arbitrary strings, assigning
/// dense ids in first-seen order.
pub fn parse_edge_list_mapped(text: &str) -> Result<(Graph, BuildStats, IdMap)> {
    let mut map = IdMap::default();
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::Parse {
                line: idx + 1,
                message: "expected exactly two node tokens".into(),
            });
        }
        pairs.push((map.get_or_insert(toks[0]), map.get_or_insert(toks[1])));
    }
    let (g, stats) = Graph::from_edges(map.external.len(), &pairs)?;
    Ok((g, stats, map))
}

/// Train/valid/test edge partition with optional curated negatives per positive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeSplit {
    pub train: Vec<Pair>,
    pub valid: Vec<Pair>,
    pub test: Vec<Pair>,
    pub negatives: Option<BTreeMap<Pair, Vec<Pair>>>,
}

impl EdgeSplit {
    /// Checks id range and pairwise disjointness of the three splits.
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen: HashMap<Pair, &'static str> = HashMap::new();
        for (name, list) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            for &(u, v) in list {
                for id in [u, v] {
                    if id >= num_nodes {
                        return Err(Error::NodeOutOfRange { id, num_nodes });
                    }
                }
                if let Some(prev) = seen.insert(canonical(u, v), name) {
                    if prev != name {
                        return Err(Error::invalid(format!(
                            "pair ({u}, {v}) appears in both {prev} and {name}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Graph seen by samplers and heuristics: training edges, plus validation
    /// edges when `include_valid` is set.
    pub fn observed_graph(&self, num_nodes: usize, include_valid: bool) -> Result<Graph> {
        let mut edges = self.train.clone();
        if include_valid {
            edges.extend_from_slice(&self.valid);
        }
        Ok(Graph::from_edges(num_nodes, &edges)?.0)
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        for (name, list) in [("#train", &self.train), ("#valid", &self.valid), ("#test", &self.test)] {
            let _ = writeln!(out, "{name}");
            for (u, v) in list {
                let _ = writeln!(out, "{u} {v}");
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<EdgeSplit> {
        let mut split = EdgeSplit::default();
        let mut current: Option<&mut Vec<Pair>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "#train" => current = Some(&mut split.train),
                "#valid" => current = Some(&mut split.valid),
                "#test" => current = Some(&mut split.test),
                _ => {
                    let target = current.as_deref_mut().ok_or(Error::Parse {
                        line: idx + 1,
                        message: "pair before any #train/#valid/#test header".into(),
                    })?;
                    target.push(parse_pair(line, idx + 1)?);
                }
            }
        }
        Ok(split)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EdgeSplit> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EdgeSplit::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.format()).map_err(|e| Error::io(path, e))
    }
}

/// Split fractions `(train, valid, test)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        let f = Self { train, valid, test };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|x| !x.is_finite() || *x < 0.0) || self.train <= 0.0 {
            return Err(Error::config(format!("invalid split fractions {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split fractions {parts:?} do not sum to 1")));
        }
        Ok(())
    }
}

/// Seeded random partition of the edge set. Valid and test sizes are
/// `round(fraction * |E|)`; the training split absorbs the remainder.
pub fn split_edges(g: &Graph, fractions: SplitFractions, seed: u64) -> Result<EdgeSplit> {
    fractions.validate()?;
    let mut edges = g.edges();
    let m = edges.len();
    let mut rng = rng::stream(seed, Stream::Split);
    edges.shuffle(&mut rng);
    let n_valid = ((fractions.valid * m as f64).round() as usize).min(m);
    let n_test = ((fractions.test * m as f64).round() as usize).min(m - n_valid);
    let test = edges.split_off(m - n_test);
    let valid = edges.split_off(edges.len() - n_valid);
    Ok(EdgeSplit {
        train: edges,
        valid,
        test,
        negatives: None,
    })
}

/// Parses the curated-negatives format:
/// `u v : n1_u n1_v ; n2_u n2_v ; ...`, one positive per line.
pub fn parse_negatives(text: &str) -> Result<BTreeMap<Pair, Vec<Pair>>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (head, tail) = line.split_once(':').ok_or(Error::Parse {
            line: idx + 1,
            message: "expected `u v : negatives`".into(),
        })?;
        let pos = parse_pair(head.trim(), idx + 1)?;
        let mut negs = Vec::new();
        for chunk in tail.split(';') {
            let chunk = chunk.trim();
            if chunk.is_empty() {
                continue;
            }
            negs.push(parse_pair(chunk, idx + 1)?);
        }
        out.insert(pos, negs);
    }
    Ok(out)
}

pub fn format_negatives(negs: &BTreeMap<Pair, Vec<Pair>>) -> String {
    let mut out = String::new();
    for ((u, v), list) in negs {
        let body: Vec<String> = list.iter().map(|(a, b)| format!("{a} {b}")).collect();
        let _ = writeln!(out, "{u} {v} : {}", body.join(" ; "));
    }
    out
}

pub fn load_negatives(path: impl AsRef<Path>) -> Result<BTreeMap<Pair, Vec<Pair>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_negatives(&text)
}

/// Plain `u v` pair list (shared negatives, heuristic queries).
pub fn parse_pairs(text: &str) -> Result<Vec<Pair>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_pair(line, idx + 1)?);
    }
    Ok(out)
}

/// Uniformly random non-adjacent, non-self pair; `None` if the graph is complete.
pub fn random_non_edge<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Option<Pair> {
    let n = g.num_nodes();
    if n < 2 || g.num_edges() == n * (n - 1) / 2 {
        return None;
    }
    loop {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && !g.has_edge(u, v) {
            return Some((u, v));
        }
    }
}
