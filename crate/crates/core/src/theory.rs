//! Executable checks of the encoder's structural guarantees: invariance of
//! the output distribution under relabeling, the common-neighbor estimator
//! behind the propagation residual, and coherence of the identity tokens.

use std::collections::BTreeSet;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, Graph, Pair};
use crate::heuristics::{bfs_distances, common_neighbors};
use crate::model::{degenerate_forward, forward, BlockMode, EncoderConfig, InitScheme, ModelParams};
use crate::pipeline::from_samples;
use crate::rng::{keyed_stream, stream, Stream};
use crate::sampler::{sample_subgraph, SamplerConfig, SubgraphSample};

/// Largest sample the exhaustive invariance mode enumerates.
pub const EXHAUSTIVE_MAX_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvarianceMode {
    /// Every endpoint-fixed index assignment of one node set.
    Exhaustive,
    /// Independent sampler draws compared with an energy-distance
    /// permutation test.
    Statistical { trials: usize, permutations: usize },
}

/// What produces a logit for an indexed sample.
#[derive(Clone, Copy)]
pub enum Predictor<'a> {
    /// The encoder as trained; node features, if any, follow the relabeling.
    Encoder {
        params: &'a ModelParams,
        features: Option<&'a Array2<f64>>,
    },
    /// Mutant: a feature channel carrying each node's raw global id, which
    /// does not move under relabeling. Needs `use_features` with
    /// `feature_dim >= 1`.
    GlobalIdFeatures(&'a ModelParams),
    /// Mutant: ignores the drawn index assignment and numbers nodes by
    /// ascending global id, turning the one-hot ids into a fixed
    /// positional code.
    SortedIndex(&'a ModelParams),
}

impl Predictor<'_> {
    fn params(&self) -> &ModelParams {
        match self {
            Predictor::Encoder { params, .. } | Predictor::GlobalIdFeatures(params) | Predictor::SortedIndex(params) => {
                params
            }
        }
    }

    // `relabel` maps original ids to the ids of `samples`' graph, when the
    // samples come from the relabeled graph.
    fn logits(&self, num_nodes: usize, samples: Vec<SubgraphSample>, relabel: Option<&[usize]>) -> Result<Vec<f64>> {
        let params = self.params();
        let feats: Option<Array2<f64>> = match self {
            Predictor::Encoder { features: Some(f), .. } => Some(match relabel {
                Some(pi) => {
                    let mut moved = Array2::zeros(f.raw_dim());
                    for (old, &new) in pi.iter().enumerate() {
                        moved.row_mut(new).assign(&f.row(old));
                    }
                    moved
                }
                None => (*f).clone(),
            }),
            Predictor::Encoder { features: None, .. } => None,
            Predictor::GlobalIdFeatures(p) => {
                if !p.config.use_features || p.config.feature_dim == 0 {
                    return Err(Error::config("the global-id mutant needs use_features with feature_dim >= 1"));
                }
                let mut f = Array2::zeros((num_nodes, p.config.feature_dim));
                for v in 0..num_nodes {
                    f[[v, 0]] = v as f64 / num_nodes as f64;
                }
                Some(f)
            }
            Predictor::SortedIndex(_) => None,
        };
        let samples = match self {
            Predictor::SortedIndex(_) => samples.into_iter().map(|s| sorted_by_id(&s)).collect(),
            _ => samples,
        };
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(crate::pipeline::SCORE_CHUNK) {
            let p = from_samples(chunk.to_vec(), &params.config, feats.as_ref())?;
            out.extend(forward(params, &p.batch, &p.op, p.features.as_ref())?);
        }
        Ok(out)
    }
}

fn sorted_by_id(s: &SubgraphSample) -> SubgraphSample {
    let n = s.len();
    let mut rest: Vec<usize> = (2..n).collect();
    rest.sort_by_key(|&i| s.nodes[i]);
    let mut order = vec![0, 1];
    order.resize(n, 0);
    for (rank, &i) in rest.iter().enumerate() {
        order[i] = rank + 2;
    }
    s.reindexed(&order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceConfig {
    pub mode: InvarianceMode,
    /// Exhaustive mode uses `depth` and `exclude_query_edge` to fix the node
    /// set (every node within `depth` hops of either endpoint); statistical
    /// mode runs the sampler as configured.
    pub sampler: SamplerConfig,
    pub seed: u64,
    /// Sorted-elementwise tolerance in exhaustive mode.
    pub tolerance: f64,
    /// Statistical mode passes when the p-value exceeds this.
    pub alpha: f64,
}

impl Default for InvarianceConfig {
    fn default() -> Self {
        Self {
            mode: InvarianceMode::Exhaustive,
            sampler: SamplerConfig {
                depth: 2,
                fanout: usize::MAX,
                budget: EXHAUSTIVE_MAX_NODES,
                ..SamplerConfig::default()
            },
            seed: 0,
            tolerance: 1e-9,
            alpha: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub mode: String,
    pub nodes: usize,
    /// Largest sorted-elementwise difference between the two multisets.
    pub max_multiset_discrepancy: f64,
    /// Energy distance and permutation p-value (statistical mode).
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub original: Vec<f64>,
    pub relabeled: Vec<f64>,
    pub pass: bool,
}

/// Every node within `depth` hops of `u` or `v`, endpoints first.
fn neighborhood(g: &Graph, u: usize, v: usize, depth: usize, hidden: Option<Pair>) -> Result<Vec<usize>> {
    let view = match hidden {
        Some(p) if g.has_edge(p.0, p.1) => {
            let edges: Vec<Pair> = g.edges().into_iter().filter(|&e| e != p).collect();
            g.with_edges(&edges)?
        }
        _ => g.clone(),
    };
    let mut set = BTreeSet::new();
    for root in [u, v] {
        for (w, d) in bfs_distances(&view, root).into_iter().enumerate() {
            if d <= depth && w != u && w != v {
                set.insert(w);
            }
        }
    }
    let mut nodes = vec![u, v];
    nodes.extend(set);
    Ok(nodes)
}

// Lexicographic successor; false after the last permutation.
fn next_permutation(xs: &mut [usize]) -> bool {
    let Some(i) = (1..xs.len()).rev().find(|&i| xs[i - 1] < xs[i]) else {
        return false;
    };
    let j = (i..xs.len()).rev().find(|&j| xs[j] > xs[i - 1]).expect("successor exists");
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}

/// All `(N - 2)!` endpoint-fixed reorderings of `sample`.
pub fn all_orders(sample: &SubgraphSample) -> Vec<SubgraphSample> {
    let n = sample.len();
    let mut tail: Vec<usize> = (2..n).collect();
    let mut out = Vec::new();
    loop {
        let mut order = vec![0, 1];
        order.extend(&tail);
        out.push(sample.reindexed(&order));
        if !next_permutation(&mut tail) {
            return out;
        }
    }
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

fn max_sorted_gap(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a.to_vec()), sorted(b.to_vec()));
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in a {
        for y in b {
            s += (x - y).abs();
        }
    }
    s / (a.len() * b.len()) as f64
}

/// One-dimensional energy distance `2E|X-Y| - E|X-X'| - E|Y-Y'|`.
pub fn energy_distance(a: &[f64], b: &[f64]) -> f64 {
    2.0 * mean_abs_diff(a, b) - mean_abs_diff(a, a) - mean_abs_diff(b, b)
}

/// Energy distance and its permutation p-value.
pub fn energy_test<R: Rng + ?Sized>(a: &[f64], b: &[f64], permutations: usize, rng: &mut R) -> (f64, f64) {
    let observed = energy_distance(a, b);
    let mut pool: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut at_least = 0;
    for _ in 0..permutations {
        pool.shuffle(rng);
        let (x, y) = pool.split_at(a.len());
        if energy_distance(x, y) >= observed - 1e-15 {
            at_least += 1;
        }
    }
    (observed, (1 + at_least) as f64 / (1 + permutations) as f64)
}

/// Compares the logit distribution for `(g, u, v)` with that for the graph
/// relabeled by `pi` (node `w` becomes `pi[w]`) and query `(pi[u], pi[v])`.
pub fn invariance_test(
    predictor: Predictor<'_>,
    g: &Graph,
    u: usize,
    v: usize,
    pi: &[usize],
    cfg: &InvarianceConfig,
) -> Result<InvarianceReport> {
    let n = g.num_nodes();
    let relabeled = g.relabel(pi)?;
    let (pu, pv) = (pi[u], pi[v]);
    match cfg.mode {
        InvarianceMode::Exhaustive => {
            let hidden = cfg.sampler.exclude_query_edge.then(|| canonical(u, v));
            let nodes = neighborhood(g, u, v, cfg.sampler.depth, hidden)?;
            if nodes.len() > EXHAUSTIVE_MAX_NODES {
                return Err(Error::invalid(format!(
                    "exhaustive invariance needs at most {EXHAUSTIVE_MAX_NODES} sampled nodes, got {}",
                    nodes.len()
                )));
            }
            let moved: Vec<usize> = nodes.iter().map(|&w| pi[w]).collect();
            let base = SubgraphSample::induced(g, nodes.clone(), hidden)?;
            let base_pi = SubgraphSample::induced(&relabeled, moved, hidden.map(|(a, b)| canonical(pi[a], pi[b])))?;
            let original = predictor.logits(n, all_orders(&base), None)?;
            let other = predictor.logits(n, all_orders(&base_pi), Some(pi))?;
            let gap = max_sorted_gap(&original, &other);
            Ok(InvarianceReport {
                mode: "exhaustive".into(),
                nodes: nodes.len(),
                max_multiset_discrepancy: gap,
                statistic: None,
                p_value: None,
                pass: gap <= cfg.tolerance,
                original: sorted(original),
                relabeled: sorted(other),
            })
        }
        InvarianceMode::Statistical { trials, permutations } => {
            if trials == 0 {
                return Err(Error::invalid("statistical invariance needs trials >= 1"));
            }
            let mut ra = keyed_stream(cfg.seed, Stream::Check, 1);
            let mut rb = keyed_stream(cfg.seed, Stream::Check, 2);
            let draw = |graph: &Graph, a: usize, b: usize, rng: &mut crate::rng::StreamRng| {
                (0..trials)
                    .map(|_| sample_subgraph(graph, a, b, &cfg.sampler, rng))
                    .collect::<Result<Vec<_>>>()
            };
            let sa = draw(g, u, v, &mut ra)?;
            let sb = draw(&relabeled, pu, pv, &mut rb)?;
            let nodes = sa.iter().map(SubgraphSample::len).max().unwrap_or(0);
            let original = predictor.logits(n, sa, None)?;
            let other = predictor.logits(n, sb, Some(pi))?;
            let (stat, p) = energy_test(&original, &other, permutations, &mut keyed_stream(cfg.seed, Stream::Check, 3));
            Ok(InvarianceReport {
                mode: "statistical".into(),
                nodes,
                max_multiset_discrepancy: max_sorted_gap(&original, &other),
                statistic: Some(stat),
                p_value: Some(p),
                pass: p > cfg.alpha,
                original: sorted(original),
                relabeled: sorted(other),
            })
        }
    }
}

/// A model whose blocks reduce to pure propagation: layer norm off,
/// unnormalized `A + I`, the first `n_max` rows of `W0` orthonormal and the
/// adjacency and role rows zero. Requires `d >= n_max`.
pub fn propagation_probe(n_max: usize, d: usize, layers: usize, seed: u64) -> Result<ModelParams> {
    if d < n_max {
        return Err(Error::config(format!("orthonormal ids need d >= n_max, got d={d}, n_max={n_max}")));
    }
    let cfg = EncoderConfig {
        hidden: d,
        intermediate: d,
        layers,
        heads: 1,
        n_max,
        layernorm_enabled: false,
        normalize_adjacency: false,
        propagation_residual: true,
        init_scheme: InitScheme::Orthogonal,
        ..EncoderConfig::default()
    };
    let mut rng = stream(seed, Stream::Check);
    let mut params = ModelParams::init(&cfg, &mut rng)?;
    let ids = crate::model::orthonormal_rows(n_max, d, &mut rng);
    params.w0.fill(0.0);
    params.w0.slice_mut(ndarray::s![..n_max, ..]).assign(&ids);
    Ok(params)
}

fn set_propagation(params: &mut ModelParams, p: &Array2<f64>) {
    for l in &mut params.layers {
        l.p.assign(p);
    }
}

// Samples covering the whole graph for every unordered pair, query edge kept.
fn all_pair_samples(g: &Graph) -> Result<Vec<SubgraphSample>> {
    let n = g.num_nodes();
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let mut nodes = vec![u, v];
            nodes.extend((0..n).filter(|&w| w != u && w != v));
            out.push(SubgraphSample::induced(g, nodes, None)?);
        }
    }
    Ok(out)
}

// Task-token hidden states at `layer` for every sample.
fn task_dots(params: &ModelParams, samples: Vec<SubgraphSample>, layer: usize) -> Result<Vec<f64>> {
    let p = from_samples(samples, &params.config, None)?;
    let (_, trace) = degenerate_forward(params, &p.batch, &p.op, BlockMode::AttentionIdentity)?;
    let h = &trace.hidden[layer];
    let nb = p.batch.n_b;
    Ok(h
        .axis_iter(Axis(0))
        .map(|s| s.row(nb).dot(&s.row(nb + 1)))
        .collect())
}

/// With orthonormal id tokens and `P = -I`, one propagation step gives
/// task states `-(A Z)_u`, whose inner product is the common-neighbor count.
/// Returns the largest absolute deviation over every pair of every graph.
pub fn cn_estimator_check(graphs: &[Graph], d: usize, seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for g in graphs {
        let n = g.num_nodes();
        if n < 2 {
            continue;
        }
        let mut params = propagation_probe(n, d, 1, seed)?;
        set_propagation(&mut params, &(-Array2::<f64>::eye(d)));
        let samples = all_pair_samples(g)?;
        let pairs: Vec<Pair> = samples.iter().map(SubgraphSample::query).collect();
        let dots = task_dots(&params, samples, 1)?;
        for ((u, v), dot) in pairs.into_iter().zip(dots) {
            worst = worst.max((dot - common_neighbors(g, u, v)? as f64).abs());
        }
    }
    Ok(worst)
}

/// Length-`len` walks from `u` to `v`, counted by explicit enumeration.
pub fn count_walks(g: &Graph, u: usize, v: usize, len: usize) -> u64 {
    if len == 0 {
        return u64::from(u == v);
    }
    g.adj(u).iter().map(|&w| count_walks(g, w, v, len - 1)).sum()
}

/// Two steps with `P = -I` give task states `(A^2 Z)_u`; their inner product
/// is the number of length-4 walks, i.e. the sum over middle nodes `w` of
/// `walks_2(u, w) * walks_2(w, v)`. Returns the largest absolute deviation.
pub fn walk_count_check(graphs: &[Graph], d: usize, seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for g in graphs {
        let n = g.num_nodes();
        if n < 2 {
            continue;
        }
        let mut params = propagation_probe(n, d, 2, seed)?;
        set_propagation(&mut params, &(-Array2::<f64>::eye(d)));
        let samples = all_pair_samples(g)?;
        let pairs: Vec<Pair> = samples.iter().map(SubgraphSample::query).collect();
        let dots = task_dots(&params, samples, 2)?;
        for ((u, v), dot) in pairs.into_iter().zip(dots) {
            let oracle: u64 = (0..n).map(|w| count_walks(g, u, w, 2) * count_walks(g, w, v, 2)).sum();
            worst = worst.max((dot - oracle as f64).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub cn: usize,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    /// `|mean - cn| <= 3 stderr`.
    pub within: bool,
}

/// Inner product of aggregated random Rademacher/sqrt(d) tokens, averaged
/// over `trials` independent draws.
pub fn cn_monte_carlo<R: Rng + ?Sized>(
    g: &Graph,
    u: usize,
    v: usize,
    d: usize,
    trials: usize,
    rng: &mut R,
) -> Result<MonteCarloReport> {
    let cn = common_neighbors(g, u, v)?;
    if trials < 2 || d == 0 {
        return Err(Error::invalid("monte carlo needs d >= 1 and at least two trials"));
    }
    let n = g.num_nodes();
    let scale = 1.0 / (d as f64).sqrt();
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let r = Array2::from_shape_simple_fn((n, d), || if rng.random::<bool>() { scale } else { -scale });
        let agg = |x: usize| {
            let mut h = ndarray::Array1::<f64>::zeros(d);
            for &w in g.adj(x) {
                h += &r.row(w);
            }
            h
        };
        values.push(agg(u).dot(&agg(v)));
    }
    let mean = values.iter().sum::<f64>() / trials as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let stderr = (var / trials as f64).sqrt();
    Ok(MonteCarloReport {
        cn,
        mean,
        stderr,
        trials,
        within: (mean - cn as f64).abs() <= 3.0 * stderr,
    })
}

/// Logits of a sum-aggregation network computed straight from the sample's
/// adjacency: `h_i <- h_i + sum_{j in N(i) + i} h_j P_k`, starting from the
/// id rows of `W0`, read out as `[h_u | h_v] w + b`.
pub fn reference_propagation(params: &ModelParams, sample: &SubgraphSample) -> f64 {
    let n = sample.len();
    let d = params.config.hidden;
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| params.w0.row(i).to_vec()).collect();
    for l in &params.layers {
        let mut next = h.clone();
        for i in 0..n {
            let mut agg = h[i].clone();
            for j in 0..n {
                if sample.has_edge(i, j) {
                    for c in 0..d {
                        agg[c] += h[j][c];
                    }
                }
            }
            for c in 0..d {
                let mut s = 0.0;
                for r in 0..d {
                    s += agg[r] * l.p[[r, c]];
                }
                next[i][c] += s;
            }
        }
        h = next;
    }
    let mut z = params.out_b[[0, 0]];
    for c in 0..d {
        z += h[0][c] * params.out_w[[c, 0]] + h[1][c] * params.out_w[[d + c, 0]];
    }
    z
}

/// Largest gap between the model in `attention_off` mode and
/// [`reference_propagation`] over `samples`.
pub fn degeneration_check(params: &ModelParams, samples: &[SubgraphSample]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for chunk in samples.chunks(crate::pipeline::SCORE_CHUNK) {
        let p = from_samples(chunk.to_vec(), &params.config, None)?;
        let (logits, _) = degenerate_forward(params, &p.batch, &p.op, BlockMode::AttentionOff)?;
        for (s, z) in chunk.iter().zip(logits) {
            worst = worst.max((z - reference_propagation(params, s)).abs());
        }
    }
    Ok(worst)
}

/// Draws `count` samples from `graph` for the degeneration check.
pub fn degeneration_samples(graph: &Graph, count: usize, sampler: &SamplerConfig, seed: u64) -> Result<Vec<SubgraphSample>> {
    let n = graph.num_nodes();
    if n < 2 {
        return Err(Error::invalid("graph needs at least two nodes"));
    }
    let mut rng = stream(seed, Stream::Check);
    (0..count)
        .map(|_| {
            let u = rng.random_range(0..n);
            let mut v = rng.random_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            sample_subgraph(graph, u, v, sampler, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub n: usize,
    pub d: usize,
    pub mu: f64,
    /// Absent when `n <= d`, where orthogonal sets exist.
    pub welch: Option<f64>,
}

/// `sqrt((n - d) / (d (n - 1)))`.
pub fn welch_bound(n: usize, d: usize) -> Result<f64> {
    if d == 0 || n <= d {
        return Err(Error::invalid(format!("welch bound needs n > d >= 1, got n={n}, d={d}")));
    }
    Ok(((n - d) as f64 / (d as f64 * (n - 1) as f64)).sqrt())
}

/// Largest `|<r_i, r_j>|` over distinct rows; rows must be unit-norm.
pub fn mutual_coherence(vectors: &Array2<f64>) -> Result<f64> {
    for (i, r) in vectors.axis_iter(Axis(0)).enumerate() {
        let norm = r.dot(&r).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("vector {i} has norm {norm}, expected 1")));
        }
    }
    let g = vectors.dot(&vectors.t());
    let n = vectors.nrows();
    let mut mu: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            mu = mu.max(g[[i, j]].abs());
        }
    }
    Ok(mu)
}

/// Rows scaled to unit norm; zero rows are an error.
pub fn normalize_rows(m: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = m.clone();
    for (i, mut r) in out.axis_iter_mut(Axis(0)).enumerate() {
        let norm = r.dot(&r).sqrt();
        if norm == 0.0 {
            return Err(Error::invalid(format!("row {i} is zero")));
        }
        r.mapv_inplace(|x| x / norm);
    }
    Ok(out)
}

pub fn coherence_report(vectors: &Array2<f64>) -> Result<CoherenceReport> {
    let (n, d) = vectors.dim();
    Ok(CoherenceReport {
        n,
        d,
        mu: mutual_coherence(vectors)?,
        welch: (n > d && d > 0).then(|| welch_bound(n, d)).transpose()?,
    })
}

/// Coherence of the (normalized) id rows an init scheme produces: `n` rows
/// of a `W0` with width `d`.
pub fn init_coherence(scheme: InitScheme, n: usize, d: usize, seed: u64) -> Result<CoherenceReport> {
    let cfg = EncoderConfig {
        hidden: d,
        intermediate: d,
        heads: 1,
        layers: 0,
        n_max: n,
        init_scheme: scheme,
        ..EncoderConfig::default()
    };
    let params = ModelParams::init(&cfg, &mut stream(seed, Stream::Init))?;
    let ids = params.w0.slice(ndarray::s![..n, ..]).to_owned();
    coherence_report(&normalize_rows(&ids)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;

    #[test]
    fn welch_values() {
        assert_eq!(welch_bound(3, 2).unwrap(), 0.5);
        assert!((welch_bound(4, 2).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(welch_bound(5, 2).unwrap() > welch_bound(4, 2).unwrap());
        assert!(welch_bound(2, 2).is_err());
        assert!(welch_bound(3, 0).is_err());
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(mutual_coherence(&Array2::eye(4)).unwrap(), 0.0);
        let mut dup = Array2::eye(3);
        let first = dup.row(0).to_owned();
        dup.row_mut(2).assign(&first);
        assert_eq!(mutual_coherence(&dup).unwrap(), 1.0);
        assert!(mutual_coherence(&Array2::from_elem((2, 2), 1.0)).is_err());
    }

    #[test]
    fn permutations_enumerated() {
        let g = generators::path(5);
        let s = SubgraphSample::induced(&g, vec![0, 1, 2, 3, 4], None).unwrap();
        let orders = all_orders(&s);
        assert_eq!(orders.len(), 6);
        let distinct: BTreeSet<Vec<usize>> = orders.iter().map(|o| o.nodes.clone()).collect();
        assert_eq!(distinct.len(), 6);
    }

    #[test]
    fn walk_enumeration() {
        let t = generators::triangle();
        assert_eq!(count_walks(&t, 0, 0, 2), 2);
        assert_eq!(count_walks(&t, 0, 1, 2), 1);
        assert_eq!(count_walks(&generators::path(3), 0, 2, 2), 1);
    }

    #[test]
    fn energy_distance_of_identical_sets_is_zero() {
        let a = [0.1, 0.5, 0.9];
        assert!(energy_distance(&a, &a).abs() < 1e-15);
        assert!(energy_distance(&a, &[5.0, 6.0, 7.0]) > 1.0);
    }

    #[test]
    fn triangle_estimators() {
        let t = generators::triangle();
        assert!(cn_estimator_check(std::slice::from_ref(&t), 8, 0).unwrap() < 1e-10);
        let mc = cn_monte_carlo(&t, 0, 1, 64, 2000, &mut stream(1, Stream::Check)).unwrap();
        assert_eq!(mc.cn, 1);
        assert!(mc.within, "{mc:?}");
    }
}
