mod common;

use std::collections::BTreeMap;

use linkformer_core::evaluator::{
    auc, evaluate, evaluate_regression, hits_at_k, mrr, rank_of_positive, rmse, EvalConfig, Scorer, TieRule,
};
use linkformer_core::graph::generators;
use linkformer_core::pipeline::score_pairs;
use linkformer_core::rng::{self, Stream};
use linkformer_core::{EncoderConfig, ModelParams, Pair, Protocol, SamplerConfig};
use proptest::prelude::*;
use rand::Rng;

/// Rank by sorting everything and averaging the positions of the tied block.
fn oracle_rank(pos: f64, negs: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = negs.iter().map(|&s| (s, false)).collect();
    all.push((pos, true));
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positions: Vec<usize> = all
        .iter()
        .enumerate()
        .filter(|(_, (s, _))| *s == pos)
        .map(|(i, _)| i + 1)
        .collect();
    positions.iter().sum::<usize>() as f64 / positions.len() as f64
}

fn tiny_model() -> (ModelParams, SamplerConfig) {
    let enc = EncoderConfig {
        hidden: 8,
        intermediate: 16,
        layers: 1,
        heads: 2,
        n_max: 10,
        ..Default::default()
    };
    let sampler = SamplerConfig {
        depth: 2,
        fanout: 4,
        budget: 10,
        ..Default::default()
    };
    (ModelParams::init(&enc, &mut rng::stream(5, Stream::Init)).unwrap(), sampler)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ranks_match_the_sorting_oracle(
        pos in 0i32..6,
        negs in prop::collection::vec(0i32..6, 0..20),
    ) {
        // small integer scores force plenty of ties
        let negs: Vec<f64> = negs.into_iter().map(f64::from).collect();
        let pos = f64::from(pos);
        prop_assert_eq!(rank_of_positive(pos, &negs, TieRule::Mean), oracle_rank(pos, &negs));
    }

    #[test]
    fn metrics_match_direct_definitions(ranks in prop::collection::vec(1usize..50, 1..40), k in 1usize..60) {
        let r: Vec<f64> = ranks.iter().map(|&x| x as f64).collect();
        let m = mrr(&r).unwrap();
        let direct = ranks.iter().map(|&x| 1.0 / x as f64).sum::<f64>() / ranks.len() as f64;
        prop_assert!((m - direct).abs() < 1e-12);
        prop_assert!(m > 0.0 && m <= 1.0);
        let h = hits_at_k(&r, k).unwrap();
        prop_assert_eq!(h, ranks.iter().filter(|&&x| x <= k).count() as f64 / ranks.len() as f64);
        prop_assert!(hits_at_k(&r, k + 1).unwrap() >= h);
    }

    #[test]
    fn adding_a_negative_never_improves_the_rank(
        pos in -3.0f64..3.0,
        negs in prop::collection::vec(-3.0f64..3.0, 0..10),
        extra in -3.0f64..3.0,
    ) {
        let before = rank_of_positive(pos, &negs, TieRule::Mean);
        let mut more = negs.clone();
        more.push(extra);
        let after = rank_of_positive(pos, &more, TieRule::Mean);
        prop_assert!(after >= before);
        if extra < pos {
            prop_assert_eq!(after, before);
        }
    }

    #[test]
    fn auc_matches_pair_counting(
        p in prop::collection::vec(0i32..5, 1..12),
        n in prop::collection::vec(0i32..5, 1..12),
    ) {
        let mut wins = 0.0;
        for &a in &p {
            for &b in &n {
                wins += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
        let pf: Vec<f64> = p.iter().map(|&x| f64::from(x)).collect();
        let nf: Vec<f64> = n.iter().map(|&x| f64::from(x)).collect();
        prop_assert!((auc(&pf, &nf).unwrap() - wins / (p.len() * n.len()) as f64).abs() < 1e-12);
    }
}

#[test]
fn shared_negatives_give_identical_reports_under_both_protocols() {
    let g = generators::erdos_renyi(40, 0.1, &mut common::rng(3));
    let edges = g.edges();
    let positives: Vec<Pair> = edges[..15].to_vec();
    let negatives: Vec<Pair> = (0..30).map(|i| (i, 39 - i)).filter(|&(a, b)| a != b && !g.has_edge(a, b)).collect();
    let (params, sampler) = tiny_model();
    let scorer = Scorer::Model {
        params: &params,
        sampler,
        features: None,
    };
    let cfg = EvalConfig {
        seed: 9,
        ..Default::default()
    };
    let global = evaluate(&g, &positives, &Protocol::GlobalNegatives(negatives.clone()), &scorer, &cfg).unwrap();
    let map: BTreeMap<Pair, Vec<Pair>> = positives.iter().map(|&p| (p, negatives.clone())).collect();
    let per = evaluate(&g, &positives, &Protocol::PerPositive(map), &scorer, &cfg).unwrap();
    assert_eq!(global.mrr, per.mrr);
    assert_eq!(global.hits, per.hits);
    assert_eq!(global.ranks, per.ranks);
    let again = evaluate(&g, &positives, &Protocol::GlobalNegatives(negatives), &scorer, &cfg).unwrap();
    assert_eq!(global, again);
}

#[test]
fn random_scorer_with_one_negative_has_mrr_three_quarters() {
    let g = generators::path(2);
    let seed_scores: Vec<f64> = {
        let mut r = common::rng(77);
        (0..40_000).map(|_| r.random::<f64>()).collect()
    };
    let n = 5000;
    let positives: Vec<Pair> = (0..n).map(|i| (2 * i, 2 * i + 1)).collect();
    let map: BTreeMap<Pair, Vec<Pair>> = positives.iter().map(|&(a, b)| ((a, b), vec![(b, a)])).collect();
    let score = |p: Pair| seed_scores[(p.0 * 2 + p.1) % seed_scores.len()];
    let rep = evaluate(&g, &positives, &Protocol::PerPositive(map), &Scorer::Custom(&score), &EvalConfig::default()).unwrap();
    // each rank is 1 or 2 with probability 1/2: mean reciprocal 0.75, sd 0.25
    let stderr = 0.25 / (n as f64).sqrt();
    assert!((rep.mrr - 0.75).abs() < 4.0 * stderr, "mrr {}", rep.mrr);
}

#[test]
fn regression_rmse_matches_direct_computation() {
    let g = generators::erdos_renyi(30, 0.15, &mut common::rng(4));
    let (params, sampler) = tiny_model();
    let pairs: Vec<Pair> = (0..20).map(|i| (i, i + 5)).collect();
    let targets: Vec<f64> = (0..20).map(|i| f64::from(i) / 20.0).collect();
    let preds = score_pairs(&params, &g, &pairs, &sampler, None, 2).unwrap();
    let direct = rmse(&preds, &targets).unwrap();
    assert_eq!(evaluate_regression(&params, &g, &pairs, &targets, &sampler, None, 2).unwrap(), direct);
}

#[test]
fn pair_scores_do_not_depend_on_batch_company() {
    let g = generators::erdos_renyi(30, 0.15, &mut common::rng(8));
    let (params, sampler) = tiny_model();
    let pairs: Vec<Pair> = (0..12).map(|i| (i, 29 - i)).collect();
    let all = score_pairs(&params, &g, &pairs, &sampler, None, 1).unwrap();
    for (i, &p) in pairs.iter().enumerate() {
        assert_eq!(score_pairs(&params, &g, &[p], &sampler, None, 1).unwrap()[0], all[i]);
    }
}

#[test]
fn symmetrized_scores_average_both_orientations() {
    let g = generators::erdos_renyi(20, 0.2, &mut common::rng(2));
    let f = |p: Pair| (p.0 * 100 + p.1) as f64;
    let cfg = EvalConfig {
        symmetrize: true,
        ..Default::default()
    };
    let negs = vec![(0, 5)];
    let rep = evaluate(&g, &[(1, 2)], &Protocol::GlobalNegatives(negs), &Scorer::Custom(&f), &cfg).unwrap();
    assert_eq!(rep.ranks[0].score, (102.0 + 201.0) / 2.0);
}
