#![allow(dead_code)]

pub mod oracles;

use linkformer_core::graph::generators;
use linkformer_core::rng::{self, Stream, StreamRng};
use linkformer_core::sampler::{sample_subgraph, SamplerConfig, SubgraphSample};
use linkformer_core::Graph;
use rand::Rng;

pub fn rng(seed: u64) -> StreamRng {
    rng::stream(seed, Stream::Check)
}

/// A connected-ish random graph and a handful of samples from it.
pub fn random_samples(seed: u64, nodes: usize, p: f64, count: usize, budget: usize) -> (Graph, Vec<SubgraphSample>) {
    let mut r = rng(seed);
    let g = generators::erdos_renyi(nodes, p, &mut r);
    let cfg = SamplerConfig {
        depth: 2,
        fanout: 4,
        budget,
        exclude_query_edge: true,
        seed,
    };
    let samples = (0..count)
        .map(|_| {
            let u = r.random_range(0..nodes);
            let mut v = r.random_range(0..nodes - 1);
            if v >= u {
                v += 1;
            }
            sample_subgraph(&g, u, v, &cfg, &mut r).unwrap()
        })
        .collect();
    (g, samples)
}
