//! Desk-scale benchmarks: padded-stack versus concatenated-object batch
//! collation, and per-batch forward/backward timing against depth.

pub mod alloc;
pub mod collation;
pub mod forward;
mod stats;
pub mod workload;

pub use collation::{bench_collation, Backend, CollationRow};
pub use forward::{bench_forward, ForwardBenchConfig, ForwardRow};
pub use stats::Summary;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("backends disagree at batch size {batch_size}: {detail}")]
    Mismatch { batch_size: usize, detail: String },

    #[error("bad benchmark setting: {0}")]
    Setting(String),

    #[error(transparent)]
    Core(#[from] linkformer_core::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
