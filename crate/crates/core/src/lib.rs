//! Link prediction with a plain Transformer encoder over tokenized,
//! budgeted link-centric subgraphs.
//!
//! Pipeline: [`graph`] holds the observed graph and splits, [`sampler`]
//! extracts a subgraph around each query pair, [`tokenizer`] turns samples
//! into padded token batches and recovers the propagation operator,
//! [`model`] scores batches, [`trainer`] and [`evaluator`] drive training and
//! ranking metrics. [`heuristics`] provides exact pairwise scores used as
//! baselines and regression targets, and [`theory`] turns the model's
//! structural guarantees into executable checks.

pub mod error;
pub mod evaluator;
pub mod graph;
pub mod heuristics;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod theory;
pub mod tokenizer;
pub mod pipeline;
pub mod trainer;

pub use error::{Error, Result};
pub use evaluator::{EvalReport, Protocol};
pub use graph::{EdgeSplit, Graph, Pair};
pub use heuristics::{HeuristicKind, NormalizationSpec};
pub use model::{EncoderConfig, InitScheme, ModelParams};
pub use sampler::{SamplerConfig, SubgraphSample};
pub use tokenizer::{AdjacencyOperator, TokenBatch, TokenMatrix};
pub use trainer::{TrainConfig, TrainReport};
