//! Query pairs to model inputs: sample, tokenize, rebuild the operator.

use std::path::Path;

use ndarray::{Array2, Array3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, Pair};
use crate::model::{forward, EncoderConfig, ModelParams};
use crate::rng::{keyed_stream, pair_key, Stream};
use crate::sampler::{sample_subgraph, SamplerConfig, SubgraphSample};
use crate::tokenizer::{collate_samples, gather_features, reconstruct_adjacency, AdjacencyOperator, TokenBatch};

/// Pairs scored per forward call when scoring long lists.
pub const SCORE_CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub struct Prepared {
    pub samples: Vec<SubgraphSample>,
    pub batch: TokenBatch,
    pub op: AdjacencyOperator,
    pub features: Option<Array3<f64>>,
}

pub fn check_compatible(sampler: &SamplerConfig, encoder: &EncoderConfig) -> Result<()> {
    sampler.validate()?;
    encoder.validate()?;
    if sampler.budget > encoder.n_max {
        return Err(Error::config(format!(
            "sampler budget {} exceeds the encoder's n_max {}",
            sampler.budget, encoder.n_max
        )));
    }
    Ok(())
}

/// Builds model inputs from already sampled subgraphs.
pub fn from_samples(
    samples: Vec<SubgraphSample>,
    encoder: &EncoderConfig,
    features: Option<&Array2<f64>>,
) -> Result<Prepared> {
    let batch = collate_samples(&samples, encoder.n_max, None)?;
    let op = reconstruct_adjacency(&batch, encoder.normalize_adjacency);
    let features = match (encoder.use_features, features) {
        (true, Some(f)) => Some(gather_features(&samples, batch.n_b, f)?),
        (true, None) => return Err(Error::invalid("encoder expects node features")),
        (false, _) => None,
    };
    Ok(Prepared {
        samples,
        batch,
        op,
        features,
    })
}

/// Samples every pair from one shared stream.
pub fn prepare<R: Rng + ?Sized>(
    graph: &Graph,
    pairs: &[Pair],
    sampler: &SamplerConfig,
    encoder: &EncoderConfig,
    features: Option<&Array2<f64>>,
    rng: &mut R,
) -> Result<Prepared> {
    let samples = pairs
        .iter()
        .map(|&(u, v)| sample_subgraph(graph, u, v, sampler, rng))
        .collect::<Result<Vec<_>>>()?;
    from_samples(samples, encoder, features)
}

/// Samples each pair from its own stream keyed by `(seed, u, v)`, so a
/// pair's sample does not depend on what else is in the batch.
pub fn prepare_keyed(
    graph: &Graph,
    pairs: &[Pair],
    sampler: &SamplerConfig,
    encoder: &EncoderConfig,
    features: Option<&Array2<f64>>,
    seed: u64,
) -> Result<Prepared> {
    let samples = pairs
        .iter()
        .map(|&(u, v)| {
            let mut rng = keyed_stream(seed, Stream::Eval, pair_key(u, v));
            sample_subgraph(graph, u, v, sampler, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    from_samples(samples, encoder, features)
}

/// Model logits for `pairs` with per-pair keyed sampling.
pub fn score_pairs(
    params: &ModelParams,
    graph: &Graph,
    pairs: &[Pair],
    sampler: &SamplerConfig,
    features: Option<&Array2<f64>>,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(SCORE_CHUNK) {
        let p = prepare_keyed(graph, chunk, sampler, &params.config, features, seed)?;
        out.extend(forward(params, &p.batch, &p.op, p.features.as_ref())?);
    }
    Ok(out)
}

/// Dense node features, one whitespace-separated row per node. Blank lines
/// and `#` comments are skipped; every row must have the same width.
pub fn parse_features(text: &str) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: format!("bad feature value {t:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {w} values, found {}", row.len()),
                })
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::invalid("feature file has no rows"))?;
    Ok(Array2::from_shape_vec((rows, width), values).expect("rows have equal width"))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_features(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_rows() {
        let f = parse_features("# x y\n1 2\n\n3.5 -1\n").unwrap();
        assert_eq!(f, ndarray::array![[1.0, 2.0], [3.5, -1.0]]);
        assert!(matches!(parse_features("1 2\n3"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_features("1 nan").is_err());
        assert!(parse_features("# nothing").is_err());
    }
}
