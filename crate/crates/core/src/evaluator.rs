//! Ranking and regression metrics under the shared-negative and the
//! per-positive negative protocols.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Pair};
use crate::heuristics::{HeuristicKind, NormalizationSpec, PairScorer};
use crate::model::ModelParams;
use crate::pipeline::score_pairs;
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    Optimistic,
    Pessimistic,
    /// Mean of the optimistic and pessimistic ranks.
    #[default]
    Mean,
}

/// `1 + #{neg > pos}` plus the tie share of `#{neg == pos}`.
pub fn rank_of_positive(pos: f64, negatives: &[f64], rule: TieRule) -> f64 {
    let above = negatives.iter().filter(|&&s| s > pos).count() as f64;
    let ties = negatives.iter().filter(|&&s| s == pos).count() as f64;
    1.0 + above
        + match rule {
            TieRule::Optimistic => 0.0,
            TieRule::Pessimistic => ties,
            TieRule::Mean => ties / 2.0,
        }
}

fn non_empty(ranks: &[f64]) -> Result<()> {
    if ranks.is_empty() {
        return Err(Error::invalid("no ranks to aggregate"));
    }
    Ok(())
}

pub fn mrr(ranks: &[f64]) -> Result<f64> {
    non_empty(ranks)?;
    Ok(ranks.iter().map(|r| 1.0 / r).sum::<f64>() / ranks.len() as f64)
}

pub fn hits_at_k(ranks: &[f64], k: usize) -> Result<f64> {
    non_empty(ranks)?;
    Ok(ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / ranks.len() as f64)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::invalid("auc needs positive and negative scores"));
    }
    let mut neg = negatives.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for &p in positives {
        let below = neg.partition_point(|&n| n < p);
        let upto = neg.partition_point(|&n| n <= p);
        total += below as f64 + 0.5 * (upto - below) as f64;
    }
    Ok(total / (positives.len() * negatives.len()) as f64)
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::invalid(format!(
            "rmse over {} predictions and {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let mse = predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / targets.len() as f64;
    Ok(mse.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    /// Every positive is ranked against one shared negative list.
    GlobalNegatives(Vec<Pair>),
    /// Each positive has its own curated negatives.
    PerPositive(BTreeMap<Pair, Vec<Pair>>),
}

impl Protocol {
    pub fn tag(&self) -> &'static str {
        match self {
            Protocol::GlobalNegatives(_) => "global_negatives",
            Protocol::PerPositive(_) => "per_positive",
        }
    }
}

/// Source of pair scores; higher means more likely linked.
pub enum Scorer<'a> {
    Model {
        params: &'a ModelParams,
        sampler: SamplerConfig,
        features: Option<&'a Array2<f64>>,
    },
    /// Exact heuristic on the observed graph; SPD is negated so that closer
    /// pairs rank higher.
    Heuristic(HeuristicKind, NormalizationSpec),
    Custom(&'a dyn Fn(Pair) -> f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub seed: u64,
    pub tie_rule: TieRule,
    /// Score `(u, v)` as the mean of both orientations.
    pub symmetrize: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![1, 10, 20, 50, 100],
            seed: 0,
            tie_rule: TieRule::Mean,
            symmetrize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRank {
    pub u: usize,
    pub v: usize,
    pub score: f64,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: String,
    pub seed: u64,
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
    /// Positive-versus-negative AUC over every scored negative.
    pub auc: f64,
    pub rmse: Option<f64>,
    pub ranks: Vec<QueryRank>,
}

impl EvalReport {
    /// Metrics without the per-query ranks.
    pub fn summary_json(&self) -> String {
        serde_json::json!({
            "protocol": self.protocol,
            "seed": self.seed,
            "mrr": self.mrr,
            "hits": self.hits,
            "auc": self.auc,
            "rmse": self.rmse,
            "queries": self.ranks.len(),
        })
        .to_string()
    }

    pub fn ranks_csv(&self) -> String {
        let mut out = String::from("u,v,score,rank\n");
        for r in &self.ranks {
            writeln!(out, "{},{},{},{}", r.u, r.v, r.score, r.rank).expect("string write");
        }
        out
    }
}

/// Scores for each distinct pair, computed once.
pub fn score_all(graph: &Graph, pairs: &[Pair], scorer: &Scorer<'_>, cfg: &EvalConfig) -> Result<HashMap<Pair, f64>> {
    let mut wanted: BTreeSet<Pair> = pairs.iter().copied().collect();
    if cfg.symmetrize {
        wanted.extend(pairs.iter().map(|&(u, v)| (v, u)));
    }
    let list: Vec<Pair> = wanted.into_iter().collect();
    let raw: Vec<f64> = match scorer {
        Scorer::Model {
            params,
            sampler,
            features,
        } => score_pairs(params, graph, &list, sampler, *features, cfg.seed)?,
        Scorer::Heuristic(kind, spec) => {
            let ps = PairScorer::new(graph, *kind, spec)?;
            list.iter()
                .map(|&(u, v)| ps.score(u, v).map(|s| if *kind == HeuristicKind::Spd { -s } else { s }))
                .collect::<Result<_>>()?
        }
        Scorer::Custom(f) => list.iter().map(|&p| f(p)).collect(),
    };
    let table: HashMap<Pair, f64> = list.into_iter().zip(raw).collect();
    if !cfg.symmetrize {
        return Ok(table);
    }
    Ok(pairs
        .iter()
        .map(|&(u, v)| ((u, v), 0.5 * (table[&(u, v)] + table[&(v, u)])))
        .collect())
}

/// Ranks every positive against its negatives. Model scoring samples each
/// pair from a stream keyed by `(seed, pair)`, so a pair scores the same
/// wherever it appears and under either protocol.
pub fn evaluate(
    graph: &Graph,
    positives: &[Pair],
    protocol: &Protocol,
    scorer: &Scorer<'_>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if positives.is_empty() {
        return Err(Error::invalid("no positives to evaluate"));
    }
    let mut all: Vec<Pair> = positives.to_vec();
    match protocol {
        Protocol::GlobalNegatives(negs) => {
            if negs.is_empty() {
                return Err(Error::invalid("global negative list is empty"));
            }
            all.extend(negs);
        }
        Protocol::PerPositive(map) => {
            for p in positives {
                let negs = map
                    .get(p)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| Error::invalid(format!("no negatives for positive ({}, {})", p.0, p.1)))?;
                all.extend(negs);
            }
        }
    }
    let scores = score_all(graph, &all, scorer, cfg)?;
    let mut ranks = Vec::with_capacity(positives.len());
    let mut neg_scores = Vec::new();
    let mut pos_scores = Vec::with_capacity(positives.len());
    let global: Vec<f64> = match protocol {
        Protocol::GlobalNegatives(negs) => negs.iter().map(|p| scores[p]).collect(),
        Protocol::PerPositive(_) => Vec::new(),
    };
    for &p in positives {
        let s = scores[&p];
        let negs: Vec<f64> = match protocol {
            Protocol::GlobalNegatives(_) => global.clone(),
            Protocol::PerPositive(map) => map[&p].iter().map(|q| scores[q]).collect(),
        };
        if s.is_nan() || negs.iter().any(|x| x.is_nan()) {
            return Err(Error::numeric("evaluate", "NaN score"));
        }
        let rank = rank_of_positive(s, &negs, cfg.tie_rule);
        if matches!(protocol, Protocol::PerPositive(_)) {
            neg_scores.extend(negs);
        }
        pos_scores.push(s);
        ranks.push(QueryRank {
            u: p.0,
            v: p.1,
            score: s,
            rank,
        });
    }
    if matches!(protocol, Protocol::GlobalNegatives(_)) {
        neg_scores = global;
    }
    let rank_values: Vec<f64> = ranks.iter().map(|r| r.rank).collect();
    let hits = cfg
        .ks
        .iter()
        .map(|&k| hits_at_k(&rank_values, k).map(|h| (k, h)))
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        protocol: protocol.tag().to_string(),
        seed: cfg.seed,
        mrr: mrr(&rank_values)?,
        hits,
        auc: auc(&pos_scores, &neg_scores)?,
        rmse: None,
        ranks,
    })
}

/// RMSE of model outputs against regression targets.
pub fn evaluate_regression(
    params: &ModelParams,
    graph: &Graph,
    pairs: &[Pair],
    targets: &[f64],
    sampler: &SamplerConfig,
    features: Option<&Array2<f64>>,
    seed: u64,
) -> Result<f64> {
    let preds = score_pairs(params, graph, pairs, sampler, features, seed)?;
    rmse(&preds, targets)
}
