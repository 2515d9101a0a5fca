//! Synthetic stand-in for a collaboration network: heavy-tailed degrees,
//! sparse, a few thousand nodes.

use linkformer_core::graph::generators::chung_lu;
use linkformer_core::rng::{stream, Stream};
use linkformer_core::sampler::sample_subgraph;
use linkformer_core::{Graph, SamplerConfig, SubgraphSample};
use rand::seq::IndexedRandom;

use crate::{BenchError, Result};

pub fn collab_like(nodes: usize, seed: u64) -> Graph {
    chung_lu(nodes, 8.0, 2.5, &mut stream(seed, Stream::Split))
}

/// `count` subgraph samples around uniformly drawn edges.
pub fn edge_samples(graph: &Graph, count: usize, sampler: &SamplerConfig, seed: u64) -> Result<Vec<SubgraphSample>> {
    let edges = graph.edges();
    if edges.is_empty() {
        return Err(BenchError::Setting("graph has no edges".into()));
    }
    let mut pick = stream(seed, Stream::Shuffle);
    let mut rng = stream(seed, Stream::Sampler);
    (0..count)
        .map(|_| {
            let &(u, v) = edges.choose(&mut pick).expect("non-empty");
            Ok(sample_subgraph(graph, u, v, sampler, &mut rng)?)
        })
        .collect()
}
