//! Exact full-graph pairwise heuristics and their regression-target
//! normalization.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

mod linalg;
mod normalize;

pub use normalize::{normalize_targets, percentile, NormalizationSpec, NormalizationStats};

/// Sentinel returned by [`shortest_path_distance`] for disconnected pairs.
pub const UNREACHABLE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    Cn,
    Aa,
    Ra,
    Katz,
    Spd,
    #[serde(rename = "pagerank")]
    PageRankPair,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 6] = [
        HeuristicKind::Cn,
        HeuristicKind::Aa,
        HeuristicKind::Ra,
        HeuristicKind::Katz,
        HeuristicKind::Spd,
        HeuristicKind::PageRankPair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::Cn => "cn",
            HeuristicKind::Aa => "aa",
            HeuristicKind::Ra => "ra",
            HeuristicKind::Katz => "katz",
            HeuristicKind::Spd => "spd",
            HeuristicKind::PageRankPair => "pagerank",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "cn" => HeuristicKind::Cn,
            "aa" => HeuristicKind::Aa,
            "ra" => HeuristicKind::Ra,
            "katz" => HeuristicKind::Katz,
            "spd" => HeuristicKind::Spd,
            "pagerank" | "pr" | "page_rank_pair" => HeuristicKind::PageRankPair,
            other => return Err(Error::config(format!("unknown heuristic {other:?}"))),
        })
    }
}

fn check_pair(g: &Graph, u: usize, v: usize) -> Result<()> {
    g.check(u)?;
    g.check(v)?;
    if u == v {
        return Err(Error::invalid(format!("pair heuristics need distinct nodes, got ({u}, {u})")));
    }
    Ok(())
}

// Sorted-merge walk over the shared neighbors of u and v.
fn for_each_common(g: &Graph, u: usize, v: usize, mut f: impl FnMut(usize)) {
    let (a, b) = (g.adj(u), g.adj(v));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                f(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

/// `|N(u) ∩ N(v)|`.
pub fn common_neighbors(g: &Graph, u: usize, v: usize) -> Result<usize> {
    check_pair(g, u, v)?;
    let mut count = 0;
    for_each_common(g, u, v, |_| count += 1);
    Ok(count)
}

/// Sum of `1 / ln deg(w)` over shared neighbors `w`. A shared neighbor has
/// degree at least 2, so every term is finite.
pub fn adamic_adar(g: &Graph, u: usize, v: usize) -> Result<f64> {
    check_pair(g, u, v)?;
    let mut s = 0.0;
    for_each_common(g, u, v, |w| s += 1.0 / (g.degree(w) as f64).ln());
    Ok(s)
}

/// Sum of `1 / deg(w)` over shared neighbors `w`.
pub fn resource_allocation(g: &Graph, u: usize, v: usize) -> Result<f64> {
    check_pair(g, u, v)?;
    let mut s = 0.0;
    for_each_common(g, u, v, |w| s += 1.0 / g.degree(w) as f64);
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KatzMode {
    /// Entry of `(I - βA)^{-1} - I`.
    ClosedForm,
    /// `Σ_{ℓ=1..L} β^ℓ (A^ℓ)_{uv}`.
    Truncated(usize),
}

impl KatzMode {
    /// Closed form up to 2,000 nodes, 64 walk lengths above.
    pub fn default_for(g: &Graph) -> KatzMode {
        if g.num_nodes() <= 2000 {
            KatzMode::ClosedForm
        } else {
            KatzMode::Truncated(64)
        }
    }
}

/// Rejects damping factors that do not satisfy the sufficient convergence
/// bound `β · max_degree < 1`.
pub fn check_katz_beta(g: &Graph, beta: f64) -> Result<()> {
    if !(beta > 0.0) || beta * g.max_degree() as f64 >= 1.0 {
        return Err(Error::config(format!(
            "katz beta {beta} violates beta * max_degree < 1 (max degree {})",
            g.max_degree()
        )));
    }
    Ok(())
}

/// Katz index of one pair. For many pairs use [`KatzIndex`], which reuses
/// the factorization.
pub fn katz(g: &Graph, u: usize, v: usize, beta: f64, mode: KatzMode) -> Result<f64> {
    check_pair(g, u, v)?;
    KatzIndex::new(g, beta, mode)?.score(u, v)
}

/// Katz scorer bound to a graph; caches the LU factors of `I - βA` in
/// closed-form mode and per-source columns in both modes.
pub struct KatzIndex<'g> {
    graph: &'g Graph,
    beta: f64,
    mode: KatzMode,
    lu: Option<linalg::Lu>,
    cache: std::cell::RefCell<std::collections::HashMap<usize, Vec<f64>>>,
}

impl<'g> KatzIndex<'g> {
    pub fn new(graph: &'g Graph, beta: f64, mode: KatzMode) -> Result<Self> {
        if mode == KatzMode::ClosedForm {
            check_katz_beta(graph, beta)?;
        } else if !(beta > 0.0) {
            return Err(Error::config(format!("katz beta must be positive, got {beta}")));
        }
        let lu = match mode {
            KatzMode::ClosedForm => {
                let n = graph.num_nodes();
                let mut m = vec![0.0; n * n];
                for u in 0..n {
                    m[u * n + u] = 1.0;
                    for &w in graph.adj(u) {
                        m[u * n + w] = -beta;
                    }
                }
                Some(linalg::Lu::factor(n, m).ok_or_else(|| {
                    Error::numeric("katz", "I - beta*A is singular")
                })?)
            }
            KatzMode::Truncated(_) => None,
        };
        Ok(Self {
            graph,
            beta,
            mode,
            lu,
            cache: Default::default(),
        })
    }

    /// Katz scores from `u` to every node.
    pub fn column(&self, u: usize) -> Result<Vec<f64>> {
        self.graph.check(u)?;
        if let Some(col) = self.cache.borrow().get(&u) {
            return Ok(col.clone());
        }
        let n = self.graph.num_nodes();
        let col = match (&self.lu, self.mode) {
            (Some(lu), _) => {
                let mut e = vec![0.0; n];
                e[u] = 1.0;
                let mut x = lu.solve(e);
                x[u] -= 1.0;
                x
            }
            (None, KatzMode::Truncated(len)) => {
                // walk counts by repeated neighbor summation
                let mut walks = vec![0.0; n];
                walks[u] = 1.0;
                let mut acc = vec![0.0; n];
                let mut weight = 1.0;
                for _ in 0..len {
                    let mut next = vec![0.0; n];
                    for (x, &c) in walks.iter().enumerate() {
                        if c != 0.0 {
                            for &y in self.graph.adj(x) {
                                next[y] += c;
                            }
                        }
                    }
                    weight *= self.beta;
                    for (a, w) in acc.iter_mut().zip(&next) {
                        *a += weight * w;
                    }
                    walks = next;
                }
                acc
            }
            (None, KatzMode::ClosedForm) => unreachable!("closed form always factors"),
        };
        self.cache.borrow_mut().insert(u, col.clone());
        Ok(col)
    }

    pub fn score(&self, u: usize, v: usize) -> Result<f64> {
        check_pair(self.graph, u, v)?;
        Ok(self.column(u)?[v])
    }
}

/// BFS distances from `s`; [`UNREACHABLE`] for other components.
pub fn bfs_distances(g: &Graph, s: usize) -> Vec<usize> {
    let mut dist = vec![UNREACHABLE; g.num_nodes()];
    let mut queue = VecDeque::new();
    dist[s] = 0;
    queue.push_back(s);
    while let Some(x) = queue.pop_front() {
        for &y in g.adj(x) {
            if dist[y] == UNREACHABLE {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Hop distance, or [`UNREACHABLE`].
pub fn shortest_path_distance(g: &Graph, u: usize, v: usize) -> Result<usize> {
    check_pair(g, u, v)?;
    // early-exit BFS from u
    let mut dist = vec![UNREACHABLE; g.num_nodes()];
    let mut queue = VecDeque::new();
    dist[u] = 0;
    queue.push_back(u);
    while let Some(x) = queue.pop_front() {
        for &y in g.adj(x) {
            if dist[y] == UNREACHABLE {
                dist[y] = dist[x] + 1;
                if y == v {
                    return Ok(dist[y]);
                }
                queue.push_back(y);
            }
        }
    }
    Ok(UNREACHABLE)
}

/// Largest eccentricity over all connected components (0 for edgeless graphs).
pub fn max_component_diameter(g: &Graph) -> usize {
    (0..g.num_nodes())
        .map(|s| {
            bfs_distances(g, s)
                .into_iter()
                .filter(|&d| d != UNREACHABLE)
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    pub alpha: f64,
    /// Stop when the L1 change between iterates drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            tol: 1e-14,
            max_iter: 10_000,
        }
    }
}

/// Global PageRank with uniform teleportation. Degree-0 nodes spread their
/// mass uniformly.
pub fn pagerank(g: &Graph, cfg: PageRankConfig) -> Result<Vec<f64>> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::config(format!("pagerank alpha must lie in (0, 1), got {}", cfg.alpha)));
    }
    let n = g.num_nodes();
    if n == 0 {
        return Ok(Vec::new());
    }
    let uniform = 1.0 / n as f64;
    let mut p = vec![uniform; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        next.fill(0.0);
        let mut dangling = 0.0;
        for (x, &px) in p.iter().enumerate() {
            let deg = g.degree(x);
            if deg == 0 {
                dangling += px;
            } else {
                let share = px / deg as f64;
                for &y in g.adj(x) {
                    next[y] += share;
                }
            }
        }
        let base = (1.0 - cfg.alpha) * uniform + cfg.alpha * dangling * uniform;
        residual = 0.0;
        for (px, nx) in p.iter_mut().zip(&next) {
            let val = base + cfg.alpha * nx;
            residual += (val - *px).abs();
            *px = val;
        }
        if residual < cfg.tol {
            return Ok(p);
        }
    }
    Err(Error::numeric(
        "pagerank",
        format!("no convergence after {} iterations (residual {residual:.3e})", cfg.max_iter),
    ))
}

/// Per-graph cache for scoring many pairs of one kind.
pub struct PairScorer<'g> {
    graph: &'g Graph,
    kind: HeuristicKind,
    katz: Option<KatzIndex<'g>>,
    pagerank: Option<Vec<f64>>,
}

impl<'g> PairScorer<'g> {
    pub fn new(graph: &'g Graph, kind: HeuristicKind, spec: &NormalizationSpec) -> Result<Self> {
        let katz = match kind {
            HeuristicKind::Katz => Some(KatzIndex::new(graph, spec.katz_beta, KatzMode::default_for(graph))?),
            _ => None,
        };
        let pagerank = match kind {
            HeuristicKind::PageRankPair => Some(pagerank(
                graph,
                PageRankConfig {
                    alpha: spec.pr_alpha,
                    ..Default::default()
                },
            )?),
            _ => None,
        };
        Ok(Self {
            graph,
            kind,
            katz,
            pagerank,
        })
    }

    /// Raw score. SPD reports disconnected pairs as `f64::INFINITY`.
    pub fn score(&self, u: usize, v: usize) -> Result<f64> {
        let g = self.graph;
        match self.kind {
            HeuristicKind::Cn => common_neighbors(g, u, v).map(|c| c as f64),
            HeuristicKind::Aa => adamic_adar(g, u, v),
            HeuristicKind::Ra => resource_allocation(g, u, v),
            HeuristicKind::Katz => self.katz.as_ref().expect("katz index").score(u, v),
            HeuristicKind::Spd => shortest_path_distance(g, u, v).map(|d| {
                if d == UNREACHABLE {
                    f64::INFINITY
                } else {
                    d as f64
                }
            }),
            HeuristicKind::PageRankPair => {
                check_pair(g, u, v)?;
                let p = self.pagerank.as_ref().expect("pagerank vector");
                Ok(p[u] * p[v])
            }
        }
    }
}

/// Raw score of `kind` for one pair; symmetric in `(u, v)`.
pub fn pair_score(kind: HeuristicKind, g: &Graph, u: usize, v: usize, spec: &NormalizationSpec) -> Result<f64> {
    PairScorer::new(g, kind, spec)?.score(u, v)
}
