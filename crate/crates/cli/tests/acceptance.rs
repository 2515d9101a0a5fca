//! End-to-end acceptance suite. Every check prints one `PASS` or `FAIL`
//! line with its measured numbers, then asserts.
//!
//! Run with `cargo test -p linkformer-cli --test acceptance`.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::io::Write;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use linkformer_bench::alloc::TrackingAllocator;
use linkformer_bench::collation::{bench_collation, Backend, CollationInputs};
use linkformer_bench::workload::{collab_like, edge_samples};
use linkformer_core::evaluator::{auc, rmse};
use linkformer_core::graph::{canonical, generators, split_edges, SplitFractions};
use linkformer_core::heuristics::{KatzIndex, KatzMode, PairScorer};
use linkformer_core::model::{finite_difference_check, forward, LossKind};
use linkformer_core::pipeline::{prepare_keyed, score_pairs};
use linkformer_core::rng::{stream, Stream, StreamRng};
use linkformer_core::sampler::{sample_subgraph, SubgraphSample};
use linkformer_core::theory::{
    cn_estimator_check, degeneration_check, degeneration_samples, init_coherence, invariance_test, propagation_probe,
    walk_count_check, welch_bound, InvarianceConfig, Predictor,
};
use linkformer_core::tokenizer::{collate_samples, encode, reconstruct_adjacency};
use linkformer_core::trainer::{
    regression_targets, sample_negatives, train_link, train_regression, MpnnConfig, MpnnParams, Task,
};
use linkformer_core::{
    EncoderConfig, Graph, HeuristicKind, InitScheme, ModelParams, NormalizationSpec, Pair, SamplerConfig, TrainConfig,
};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

// Checks run one at a time.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(name: &str, started: Instant, result: Result<String, String>) {
    let secs = started.elapsed().as_secs_f64();
    let line = match &result {
        Ok(detail) => format!("PASS {name}: {detail} ({secs:.1}s)"),
        Err(detail) => format!("FAIL {name}: {detail} ({secs:.1}s)"),
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
    if let Err(detail) = result {
        panic!("{name}: {detail}");
    }
}

fn rng(seed: u64) -> StreamRng {
    stream(seed, Stream::Check)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * b.abs().max(1.0)
}

// ---------------------------------------------------------------------------

fn heuristics_against_oracles(g: &Graph, beta: f64) -> Result<usize, String> {
    const TOL: f64 = 1e-9;
    let n = g.num_nodes();
    let mut spec = NormalizationSpec::new(HeuristicKind::Katz);
    spec.katz_beta = beta;
    let scorers: Vec<(HeuristicKind, PairScorer<'_>)> = HeuristicKind::ALL
        .iter()
        .map(|&k| PairScorer::new(g, k, &spec).map(|s| (k, s)).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let katz = oracles::katz_closed(g, beta);
    let truncated = KatzIndex::new(g, beta, KatzMode::Truncated(6)).map_err(|e| e.to_string())?;
    let small = n <= 8;
    let powers = (!small).then(|| oracles::katz_powers(g, beta, 6));
    let dist = oracles::distances(g);
    let pr = oracles::pagerank(g, spec.pr_alpha);
    let mut compared = 0;
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            for (kind, s) in &scorers {
                let got = s.score(u, v).map_err(|e| e.to_string())?;
                let want = match kind {
                    HeuristicKind::Cn => oracles::cn(g, u, v),
                    HeuristicKind::Aa => oracles::aa(g, u, v),
                    HeuristicKind::Ra => oracles::ra(g, u, v),
                    HeuristicKind::Katz => katz[(u, v)],
                    HeuristicKind::Spd => dist[u][v].map_or(f64::INFINITY, |d| d as f64),
                    HeuristicKind::PageRankPair => pr[u] * pr[v],
                };
                ensure(close(got, want, TOL), || format!("{kind} ({u},{v}) on {:?}: {got} vs {want}", g.edges()))?;
                compared += 1;
            }
            let t = truncated.score(u, v).map_err(|e| e.to_string())?;
            let want = match &powers {
                None => oracles::katz_walks(g, u, v, beta, 6),
                Some(p) => p[(u, v)],
            };
            ensure(close(t, want, TOL), || format!("truncated katz ({u},{v}): {t} vs {want}"))?;
            compared += 1;
        }
    }
    Ok(compared)
}

#[test]
fn heuristic_oracle_equivalence() {
    let _g = serial();
    let t = Instant::now();
    let result = (|| {
        let mut small = 0;
        let mut values = 0;
        for n in 2..=7 {
            for g in generators::nonisomorphic(n).into_iter().filter(Graph::is_connected) {
                values += heuristics_against_oracles(&g, 0.1)?;
                small += 1;
            }
        }
        ensure(small == 995, || format!("enumerated {small} connected graphs, expected 995"))?;
        let mut r = rng(101);
        for i in 0..1000 {
            let p = [0.04, 0.08, 0.15, 0.25][i % 4];
            let g = generators::erdos_renyi(50, p, &mut r);
            let beta = 0.9 / (g.max_degree().max(1) as f64);
            values += heuristics_against_oracles(&g, beta)?;
        }
        ensure(t.elapsed().as_secs() < 300, || "over the 5 minute budget".into())?;
        Ok(format!(
            "{small} connected graphs on 2..7 nodes + 1000 random 50-node graphs, {values} values within 1e-9"
        ))
    })();
    verdict("heuristic oracle equivalence", t, result);
}

// ---------------------------------------------------------------------------

fn round_trip(g: &Graph, samples: &[SubgraphSample], n_max: usize, hide: bool) -> Result<(), String> {
    let batch = collate_samples(samples, n_max, None).map_err(|e| e.to_string())?;
    let op = reconstruct_adjacency(&batch, false);
    let norm = reconstruct_adjacency(&batch, true);
    let per = batch.rows_per_sample();
    let nb = batch.n_b;
    for (s, sample) in samples.iter().enumerate() {
        let n = sample.len();
        let (qu, qv) = sample.query();
        let edge = |i: usize, j: usize| {
            let (a, b) = (sample.nodes[i], sample.nodes[j]);
            a != b && g.has_edge(a, b) && !(hide && canonical(a, b) == canonical(qu, qv))
        };
        for r in 0..per {
            let source = match r {
                r if r < n => Some(r),
                r if r >= nb => Some(r - nb),
                _ => None,
            };
            for c in 0..per {
                let want = match source {
                    Some(i) if c < n => f64::from(u8::from(edge(i, c)) + u8::from(i == c)),
                    _ => 0.0,
                };
                ensure(op.data[[s, r, c]] == want, || format!("sample {s} entry ({r},{c})"))?;
                if c >= nb {
                    ensure(op.data[[s, r, c]] == 0.0, || format!("task column {c} nonzero"))?;
                }
            }
            let sum: f64 = (0..per).map(|c| norm.data[[s, r, c]]).sum();
            ensure((sum - 1.0).abs() < 1e-12 || sum == 0.0, || format!("normalized row sums to {sum}"))?;
        }
        ensure(encode(sample, n_max).map_err(|e| e.to_string())? == batch.unpadded(s), || {
            "unpadded tokens differ from encode".into()
        })?;
    }
    Ok(())
}

#[test]
fn tokenization_round_trip() {
    let _g = serial();
    let t = Instant::now();
    let result = (|| {
        let mut count = 0;
        for hide in [true, false] {
            let cfg = SamplerConfig {
                depth: 2,
                fanout: 3,
                budget: 6,
                exclude_query_edge: hide,
                seed: 0,
            };
            for n in 2..=7 {
                for (i, g) in generators::nonisomorphic(n).into_iter().filter(Graph::is_connected).enumerate() {
                    let mut r = rng(i as u64);
                    let mut samples = Vec::new();
                    for u in 0..n {
                        for v in 0..n {
                            if u != v {
                                samples.push(sample_subgraph(&g, u, v, &cfg, &mut r).map_err(|e| e.to_string())?);
                            }
                        }
                    }
                    round_trip(&g, &samples, 8, hide)?;
                    count += samples.len();
                }
            }
        }
        let cfg = SamplerConfig {
            depth: 2,
            fanout: 5,
            budget: 16,
            ..Default::default()
        };
        for seed in 0..20 {
            let mut r = rng(1000 + seed);
            let g = generators::erdos_renyi(50, 0.08, &mut r);
            let samples = (0..64)
                .map(|_| {
                    let (u, v) = distinct_pair(&mut r, 50);
                    sample_subgraph(&g, u, v, &cfg, &mut r)
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            round_trip(&g, &samples, 20, true)?;
            count += samples.len();
        }
        Ok(format!("{count} samples reproduce induced adjacency + I exactly"))
    })();
    verdict("tokenization round trip", t, result);
}

fn distinct_pair<R: Rng>(r: &mut R, n: usize) -> Pair {
    let u = r.random_range(0..n);
    let mut v = r.random_range(0..n - 1);
    if v >= u {
        v += 1;
    }
    (u, v)
}

// ---------------------------------------------------------------------------

fn small_encoder(use_features: bool) -> EncoderConfig {
    EncoderConfig {
        hidden: 16,
        intermediate: 32,
        layers: 2,
        heads: 2,
        n_max: 8,
        use_features,
        feature_dim: usize::from(use_features),
        ..Default::default()
    }
}

struct Case {
    g: Graph,
    u: usize,
    v: usize,
    pi: Vec<usize>,
}

fn invariance_cases(count: usize, seed: u64) -> Vec<Case> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let n = r.random_range(4..=7);
            let g = generators::erdos_renyi(n, r.random_range(0.3..0.8), &mut r);
            let (u, v) = distinct_pair(&mut r, n);
            let mut pi: Vec<usize> = (0..n).collect();
            pi.shuffle(&mut r);
            Case { g, u, v, pi }
        })
        .collect()
}

fn count_failures(pred: Predictor<'_>, cases: &[Case]) -> Result<(usize, f64), String> {
    let cfg = InvarianceConfig::default();
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for c in cases {
        let rep = invariance_test(pred, &c.g, c.u, c.v, &c.pi, &cfg).map_err(|e| e.to_string())?;
        failures += usize::from(!rep.pass);
        worst = worst.max(rep.max_multiset_discrepancy);
    }
    Ok((failures, worst))
}

#[test]
fn permutation_invariance_in_distribution() {
    let _g = serial();
    let t = Instant::now();
    let result = (|| {
        let cases = invariance_cases(100, 7);
        let untrained = ModelParams::init(&small_encoder(false), &mut stream(1, Stream::Init)).map_err(|e| e.to_string())?;
        let g = generators::erdos_renyi(30, 0.2, &mut rng(40));
        let train_cfg = TrainConfig {
            epochs: 2.0,
            batch_size: 16,
            sampler: SamplerConfig {
                depth: 2,
                fanout: 4,
                budget: 8,
                ..Default::default()
            },
            encoder: small_encoder(false),
            ..Default::default()
        };
        let (trained, _) = train_link(&train_cfg, &g, &g.edges(), None, None, None).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for (label, params) in [("untrained", &untrained), ("trained", &trained)] {
            let (fails, gap) = count_failures(Predictor::Encoder { params, features: None }, &cases)?;
            ensure(fails == 0, || format!("{label} encoder failed {fails}/100 cases (gap {gap:e})"))?;
            worst = worst.max(gap);
        }
        let with_ids = ModelParams::init(&small_encoder(true), &mut stream(2, Stream::Init)).map_err(|e| e.to_string())?;
        let (id_fails, _) = count_failures(Predictor::GlobalIdFeatures(&with_ids), &cases)?;
        let (sorted_fails, _) = count_failures(Predictor::SortedIndex(&untrained), &cases)?;
        ensure(id_fails > 0 && sorted_fails > 0, || {
            format!("mutants not caught: global-id {id_fails}, sorted-index {sorted_fails}")
        })?;
        Ok(format!(
            "100 cases x (untrained, trained): max multiset gap {worst:.1e}; mutants fail {id_fails}/100 (global-id), {sorted_fails}/100 (sorted-index)"
        ))
    })();
    verdict("distributional permutation invariance", t, result);
}

// ---------------------------------------------------------------------------

#[test]
fn gradient_correctness() {
    let _g = serial();
    let t = Instant::now();
    let result = (|| {
        let mut r = rng(404);
        let mut worst: f64 = 0.0;
        let mut coords = 0;
        let mut widest = 0;
        for case in 0..20 {
            let heads = [1, 2, 4][case % 3];
            let hidden = if case < 4 { 32 } else { heads * r.random_range(2..=8) };
            let cfg = EncoderConfig {
                hidden,
                intermediate: r.random_range(4..=2 * hidden),
                layers: 1 + case % 2,
                heads,
                n_max: 6,
                layernorm_enabled: r.random_bool(0.75),
                normalize_adjacency: r.random_bool(0.5),
                ..Default::default()
            };
            widest = widest.max(hidden);
            let params = ModelParams::init(&cfg, &mut r).map_err(|e| e.to_string())?;
            let g = generators::erdos_renyi(9, 0.4, &mut r);
            let sampler = SamplerConfig {
                depth: 2,
                fanout: 4,
                budget: 6,
                ..Default::default()
            };
            let samples = (0..3)
                .map(|_| {
                    let (u, v) = distinct_pair(&mut r, 9);
                    sample_subgraph(&g, u, v, &sampler, &mut r)
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            let batch = collate_samples(&samples, cfg.n_max, None).map_err(|e| e.to_string())?;
            let op = reconstruct_adjacency(&batch, cfg.normalize_adjacency);
            let (kind, targets) = if case % 2 == 0 {
                (LossKind::Bce, vec![1.0, 0.0, 1.0])
            } else {
                (LossKind::Mse, vec![0.4, -0.3, 1.1])
            };
            let rep = finite_difference_check(&params, &batch, &op, &targets, kind, 1e-5).map_err(|e| e.to_string())?;
            ensure(rep.max_rel_error <= 1e-4, || format!("config {case} ({cfg:?}): {rep:?}"))?;
            worst = worst.max(rep.max_rel_error);
            coords += rep.coordinates;
        }
        ensure(t.elapsed().as_secs() < 600, || "over the 10 minute budget".into())?;
        Ok(format!(
            "20 configs (K <= 2, d <= {widest}), {coords} coordinates, max relative error {worst:.2e}"
        ))
    })();
    verdict("gradient correctness", t, result);
}

// ---------------------------------------------------------------------------

#[test]
fn degeneration_oracle() {
    let _g = serial();
    let t = Instant::now();
    let result = (|| {
        let g = generators::chung_lu(300, 6.0, 2.5, &mut rng(3));
        let sampler = SamplerConfig {
            depth: 2,
            fanout: 5,
            budget: 12,
            ..Default::default()
        };
        let samples = degeneration_samples(&g, 500, &sampler, 3).map_err(|e| e.to_string())?;
        let mut params = propagation_probe(12, 16, 2, 4).map_err(|e| e.to_string())?;
        let mut r = rng(5);
        for l in &mut params.layers {
            l.p = Array2::from_shape_simple_fn((16, 16), || r.random_range(-0.3..0.3));
        }
        let mpnn_gap = degeneration_check(&params, &samples).map_err(|e| e.to_string())?;
        ensure(mpnn_gap <= 1e-9, || format!("attention-off vs sum aggregation gap {mpnn_gap:e}"))?;

        let upto7: Vec<Graph> = (2..=7).flat_map(generators::nonisomorphic).collect();
        let cn_gap = cn_estimator_check(&upto7, 16, 6).map_err(|e| e.to_string())?;
        ensure(cn_gap <= 1e-9, || format!("one-step dot vs CN gap {cn_gap:e}"))?;
        let upto6: Vec<Graph> = (2..=6).flat_map(generators::nonisomorphic).collect();
        let walk_gap = walk_count_check(&upto6, 16, 7).map_err(|e| e.to_string())?;
        ensure(walk_gap <= 1e-9, || format!("two-step dot vs walk sum gap {walk_gap:e}"))?;
        Ok(format!(
            "500 samples gap {mpnn_gap:.1e}; CN on {} graphs gap {cn_gap:.1e}; walk sums on {} graphs gap {walk_gap:.1e}",
            upto7.len(),
            upto6.len()
        ))
    })();
    verdict("degeneration oracle", t, result);
}

// ---------------------------------------------------------------------------

#[test]
fn welch_and_coherence() {
    let _g = serial();
    let t = Instant::now();
    let result = (|| {
        let w = welch_bound(4, 2).map_err(|e| e.to_string())?;
        ensure((w - (1.0f64 / 3.0).sqrt()).abs() <= 1e-12, || format!("W(4,2) = {w}"))?;
        let mut steps = 0;
        for d in 2..=16 {
            for n in d + 1..200 {
                let (a, b) = (welch_bound(n, d).unwrap(), welch_bound(n + 1, d).unwrap());
                ensure(b > a, || format!("W({}, {d}) = {b} <= W({n}, {d}) = {a}", n + 1))?;
                steps += 1;
            }
        }
        let mut worst: f64 = 0.0;
        for (n, d) in [(4, 4), (8, 8), (8, 32), (16, 32), (32, 64), (64, 64)] {
            let rep = init_coherence(InitScheme::Orthogonal, n, d, 9).map_err(|e| e.to_string())?;
            ensure(rep.mu <= 1e-6, || format!("orthogonal init n={n} d={d}: mu {}", rep.mu))?;
            worst = worst.max(rep.mu);
        }
        Ok(format!(
            "W(4,2) = {w:.12}; {steps} monotone steps; orthogonal init coherence <= {worst:.1e}"
        ))
    })();
    verdict("welch bound and coherence", t, result);
}

// ---------------------------------------------------------------------------

#[test]
fn padding_invariance() {
    let _g = serial();
    let t = Instant::now();
    let result = (|| {
        let mut r = rng(77);
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        while checked < 1000 {
            let heads = [1, 2, 4][r.random_range(0..3)];
            let cfg = EncoderConfig {
                hidden: heads * r.random_range(2..=6),
                intermediate: r.random_range(4..=24),
                layers: r.random_range(1..=3),
                heads,
                n_max: 12,
                layernorm_enabled: r.random_bool(0.8),
                normalize_adjacency: r.random_bool(0.5),
                ..Default::default()
            };
            let params = ModelParams::init(&cfg, &mut r).map_err(|e| e.to_string())?;
            let g = generators::erdos_renyi(40, r.random_range(0.03..0.3), &mut r);
            let sampler = SamplerConfig {
                depth: 2,
                fanout: r.random_range(1..6),
                budget: 12,
                ..Default::default()
            };
            let samples = (0..20)
                .map(|_| {
                    let (u, v) = distinct_pair(&mut r, 40);
                    sample_subgraph(&g, u, v, &sampler, &mut r)
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            let logits = |set: &[SubgraphSample]| -> Result<Vec<f64>, String> {
                let b = collate_samples(set, cfg.n_max, None).map_err(|e| e.to_string())?;
                let op = reconstruct_adjacency(&b, cfg.normalize_adjacency);
                forward(&params, &b, &op, None).map_err(|e| e.to_string())
            };
            let joint = logits(&samples)?;
            let largest = samples.iter().max_by_key(|s| s.len()).expect("non-empty").clone();
            for (i, s) in samples.iter().enumerate() {
                let alone = logits(std::slice::from_ref(s))?[0];
                let padded = logits(&[s.clone(), largest.clone()])?[0];
                for z in [joint[i], padded] {
                    let gap = (z - alone).abs();
                    ensure(gap <= 1e-9, || format!("sample of {} nodes: logit moved by {gap:e}", s.len()))?;
                    worst = worst.max(gap);
                }
                checked += 1;
            }
        }
        Ok(format!("{checked} samples, max logit change across pad lengths {worst:.1e}"))
    })();
    verdict("padding invariance", t, result);
}

// ---------------------------------------------------------------------------

fn held_out_auc(params: &ModelParams, g: &Graph, pos: &[Pair], sampler: &SamplerConfig, seed: u64) -> f64 {
    let negs = sample_negatives(g, pos, 1, &mut stream(seed, Stream::Eval)).unwrap();
    let ps = score_pairs(params, g, pos, sampler, None, seed).unwrap();
    let ns = score_pairs(params, g, &negs, sampler, None, seed).unwrap();
    auc(&ps, &ns).unwrap()
}

fn planted_partition_auc() -> Result<String, String> {
    let g = generators::planted_partition(25, 20, 0.4, 0.0, &mut rng(1));
    let split = split_edges(&g, SplitFractions::new(0.8, 0.1, 0.1).unwrap(), 1).map_err(|e| e.to_string())?;
    let observed = split.observed_graph(500, false).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 50.0,
        batch_size: 64,
        learning_rate: 1e-3,
        sampler: SamplerConfig {
            depth: 2,
            fanout: 8,
            budget: 16,
            ..Default::default()
        },
        encoder: EncoderConfig {
            hidden: 64,
            intermediate: 128,
            layers: 2,
            heads: 4,
            n_max: 16,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut hook = |_: usize, p: &ModelParams| Ok(held_out_auc(p, &observed, &split.valid, &cfg.sampler, 3) > 0.95);
    let (params, report) =
        train_link(&cfg, &observed, &split.train, None, None, Some(&mut hook)).map_err(|e| e.to_string())?;
    let test = held_out_auc(&params, &observed, &split.test, &cfg.sampler, 4);
    ensure(test > 0.9, || format!("planted partition test AUC {test:.3}"))?;
    Ok(format!("planted partition test AUC {test:.3} after {} epochs", report.epochs.len()))
}

fn cn_regression_rmse() -> Result<String, String> {
    let g = generators::erdos_renyi(8, 0.5, &mut rng(2));
    let pairs: Vec<Pair> = (0..8).flat_map(|u| (u + 1..8).map(move |v| (u, v))).collect();
    let spec = NormalizationSpec::new(HeuristicKind::Cn);
    let (targets, _) = regression_targets(&g, &pairs, &spec).map_err(|e| e.to_string())?;
    let examples: Vec<(Pair, f64)> = pairs.iter().copied().zip(targets.iter().copied()).collect();
    let cfg = TrainConfig {
        task: Task::HeuristicRegression(HeuristicKind::Cn),
        epochs: 600.0,
        batch_size: 4,
        learning_rate: 3e-3,
        weight_decay: 0.0,
        sampler: SamplerConfig {
            depth: 2,
            fanout: 8,
            budget: 8,
            ..Default::default()
        },
        encoder: EncoderConfig {
            hidden: 32,
            intermediate: 64,
            layers: 2,
            heads: 4,
            n_max: 8,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut params = ModelParams::init(&cfg.encoder, &mut stream(0, Stream::Init)).map_err(|e| e.to_string())?;
    let mut hook = |_: usize, p: &ModelParams| {
        let preds = score_pairs(p, &g, &pairs, &cfg.sampler, None, 7)?;
        Ok(rmse(&preds, &targets)? < 0.03)
    };
    let report =
        train_regression(&mut params, &cfg, &g, &examples, None, None, Some(&mut hook)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for seed in [101, 202, 303] {
        let preds = score_pairs(&params, &g, &pairs, &cfg.sampler, None, seed).map_err(|e| e.to_string())?;
        worst = worst.max(rmse(&preds, &targets).map_err(|e| e.to_string())?);
    }
    ensure(worst < 0.05, || format!("8-node CN regression RMSE {worst:.4}"))?;
    Ok(format!("8-node CN regression RMSE {worst:.4} after {} epochs", report.epochs.len()))
}

fn encoder_beats_mpnn() -> Result<String, String> {
    let g = generators::chung_lu(300, 6.0, 2.5, &mut rng(5));
    let edges = g.edges();
    let negs = sample_negatives(&g, &edges, 1, &mut stream(5, Stream::Negatives)).map_err(|e| e.to_string())?;
    let mut pairs = edges;
    pairs.extend(negs);
    pairs.shuffle(&mut rng(9));
    let spec = NormalizationSpec::new(HeuristicKind::Cn);
    let (targets, _) = regression_targets(&g, &pairs, &spec).map_err(|e| e.to_string())?;
    let cut = pairs.len() * 4 / 5;
    let train: Vec<(Pair, f64)> = pairs[..cut].iter().copied().zip(targets[..cut].iter().copied()).collect();
    let (test_pairs, test_targets) = (&pairs[cut..], &targets[cut..]);
    let cfg = TrainConfig {
        task: Task::HeuristicRegression(HeuristicKind::Cn),
        epochs: 20.0,
        batch_size: 32,
        learning_rate: 2e-3,
        weight_decay: 0.0,
        sampler: SamplerConfig {
            depth: 2,
            fanout: 6,
            budget: 16,
            ..Default::default()
        },
        encoder: EncoderConfig {
            hidden: 32,
            intermediate: 64,
            layers: 2,
            heads: 4,
            n_max: 16,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut enc = ModelParams::init(&cfg.encoder, &mut stream(0, Stream::Init)).map_err(|e| e.to_string())?;
    train_regression(&mut enc, &cfg, &g, &train, None, None, None).map_err(|e| e.to_string())?;
    let enc_preds = score_pairs(&enc, &g, test_pairs, &cfg.sampler, None, 1).map_err(|e| e.to_string())?;
    let enc_rmse = rmse(&enc_preds, test_targets).map_err(|e| e.to_string())?;

    let mut mp =
        MpnnParams::init(MpnnConfig { hidden: 32, layers: 2 }, &mut stream(0, Stream::Init)).map_err(|e| e.to_string())?;
    train_regression(&mut mp, &cfg, &g, &train, None, None, None).map_err(|e| e.to_string())?;
    let prep = prepare_keyed(&g, test_pairs, &cfg.sampler, &cfg.encoder, None, 1).map_err(|e| e.to_string())?;
    let mp_preds: Vec<f64> = prep.samples.iter().map(|s| mp.score(s)).collect();
    let mp_rmse = rmse(&mp_preds, test_targets).map_err(|e| e.to_string())?;
    ensure(enc_rmse < mp_rmse, || format!("encoder CN RMSE {enc_rmse:.4} not below MPNN {mp_rmse:.4}"))?;
    Ok(format!("depth-2 CN RMSE encoder {enc_rmse:.4} < MPNN {mp_rmse:.4}"))
}

#[test]
fn training_sanity() {
    let _g = serial();
    let t = Instant::now();
    let result = (|| Ok([planted_partition_auc()?, cn_regression_rmse()?, encoder_beats_mpnn()?].join("; ")))();
    verdict("training sanity", t, result);
}

// ---------------------------------------------------------------------------

#[test]
fn batching_benchmark() {
    let _g = serial();
    let t = Instant::now();
    let result = (|| {
        let graph = collab_like(3000, 0);
        let sampler = SamplerConfig::default();
        let samples = edge_samples(&graph, 4096, &sampler, 0).map_err(|e| e.to_string())?;
        let inputs = CollationInputs::new(&samples, sampler.budget).map_err(|e| e.to_string())?;
        let sizes = [64, 256, 1024, 4096];
        let rows = bench_collation(&inputs, &sizes, 30, 3).map_err(|e| e.to_string())?;
        let mut detail = Vec::new();
        for size in sizes {
            let find = |b: Backend| rows.iter().find(|r| r.backend == b && r.batch_size == size).expect("row");
            let (pad, cat) = (find(Backend::PadStack), find(Backend::ConcatObjects));
            ensure(pad.median_s < cat.median_s, || {
                format!("batch {size}: pad_stack {:.2e}s vs concat_objects {:.2e}s", pad.median_s, cat.median_s)
            })?;
            detail.push(format!(
                "{size}: {:.2e}s vs {:.2e}s ({} vs {} B)",
                pad.median_s, cat.median_s, pad.peak_bytes, cat.peak_bytes
            ));
        }
        Ok(format!("outputs equal; pad_stack faster at every size [{}]", detail.join(", ")))
    })();
    verdict("batching benchmark", t, result);
}

// ---------------------------------------------------------------------------

#[test]
fn training_determinism() {
    let _g = serial();
    let t = Instant::now();
    let result = (|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let g = generators::planted_partition(6, 10, 0.5, 0.01, &mut rng(12));
        linkformer_core::graph::write_edge_list(&g, dir.path().join("g.txt")).map_err(|e| e.to_string())?;
        let config = "[train]\nbatch_size = 16\nepochs = 2\n\n[sampler]\ndepth = 2\nfanout = 4\nbudget = 8\n\n\
                      [encoder]\nhidden = 16\nintermediate = 32\nheads = 2\nn_max = 8\n\n[data]\nedges = \"g.txt\"\n";
        std::fs::write(dir.path().join("cfg.toml"), config).map_err(|e| e.to_string())?;
        let digest = |seed: &str, out: &str| -> Result<String, String> {
            let o = Command::new(env!("CARGO_BIN_EXE_linkformer"))
                .args(["train", "--config", "cfg.toml", "--seed", seed, "--out", out])
                .current_dir(dir.path())
                .output()
                .map_err(|e| e.to_string())?;
            ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
            let v: serde_json::Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;
            Ok(v["checkpoint_digest"].as_str().unwrap_or_default().to_string())
        };
        let (a, b, c) = (digest("11", "a")?, digest("11", "b")?, digest("12", "c")?);
        ensure(!a.is_empty() && a == b, || format!("same seed, digests {a} and {b}"))?;
        let bytes = |p: &str| std::fs::read(dir.path().join(p).join("final.ckpt")).map_err(|e| e.to_string());
        ensure(bytes("a")? == bytes("b")?, || "checkpoint files differ".into())?;
        ensure(a != c, || "a different seed gave the same checkpoint".into())?;
        Ok(format!("two runs with seed 11 share digest {}..; seed 12 differs", &a[..12]))
    })();
    verdict("training determinism", t, result);
}
