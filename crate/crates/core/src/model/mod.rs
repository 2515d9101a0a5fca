//! Transformer encoder over token batches with a per-layer propagation
//! residual `H = Z + (Ã Z) P_k`, endpoint readout, losses and exact
//! gradients.

mod checkpoint;
mod forward;
mod gradcheck;
mod params;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use checkpoint::{
    checkpoint_bytes, checkpoint_digest, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint,
};
pub use forward::{
    bce_loss, degenerate_forward, forward, forward_traced, loss_and_grad, mse_loss, softplus, BlockMode,
    ForwardOptions, ForwardTrace, LossKind,
};
pub(crate) use checkpoint::hex as hex_digest;
pub use gradcheck::{finite_difference_check, GradCheckReport, GRAD_CHECK_FLOOR};
pub use params::{orthonormal_rows, Gradients, LayerParams, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitScheme {
    Orthogonal,
    MeanShiftedGaussian { mean: f64 },
    LowRank { rank: usize },
}

impl std::fmt::Display for InitScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitScheme::Orthogonal => write!(f, "orthogonal"),
            InitScheme::MeanShiftedGaussian { mean } => write!(f, "mean_shifted_gaussian({mean})"),
            InitScheme::LowRank { rank } => write!(f, "low_rank({rank})"),
        }
    }
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    /// `orthogonal`, `mean_shifted_gaussian(0.1)` or `low_rank(5)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |prefix: &str| -> Option<&str> { s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')') };
        if s == "orthogonal" {
            return Ok(InitScheme::Orthogonal);
        }
        if let Some(a) = arg("mean_shifted_gaussian") {
            let mean = a.trim().parse().map_err(|_| Error::config(format!("bad mean in {s:?}")))?;
            return Ok(InitScheme::MeanShiftedGaussian { mean });
        }
        if let Some(a) = arg("low_rank") {
            let rank = a.trim().parse().map_err(|_| Error::config(format!("bad rank in {s:?}")))?;
            return Ok(InitScheme::LowRank { rank });
        }
        Err(Error::config(format!("unknown init scheme {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub hidden: usize,
    pub intermediate: usize,
    pub layers: usize,
    pub heads: usize,
    pub n_max: usize,
    pub dropout: f64,
    pub use_features: bool,
    pub feature_dim: usize,
    pub layernorm_enabled: bool,
    pub init_scheme: InitScheme,
    pub freeze_input_projection: bool,
    /// Row-normalize the propagation operator.
    pub normalize_adjacency: bool,
    /// When false every `P_k` is held at zero, leaving a plain masked
    /// Transformer encoder.
    pub propagation_residual: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            intermediate: 128,
            layers: 2,
            heads: 4,
            n_max: 32,
            dropout: 0.0,
            use_features: false,
            feature_dim: 0,
            layernorm_enabled: true,
            init_scheme: InitScheme::Orthogonal,
            freeze_input_projection: false,
            normalize_adjacency: true,
            propagation_residual: true,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.intermediate == 0 || self.heads == 0 {
            return Err(Error::config("hidden, intermediate and heads must be positive"));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        if self.n_max < 2 {
            return Err(Error::config("n_max must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.use_features && self.feature_dim == 0 {
            return Err(Error::config("use_features requires feature_dim > 0"));
        }
        match self.init_scheme {
            InitScheme::LowRank { rank } if rank == 0 || rank > self.input_dim().min(self.hidden) => {
                Err(Error::config(format!(
                    "low-rank init rank {rank} must lie in 1..={}",
                    self.input_dim().min(self.hidden)
                )))
            }
            InitScheme::MeanShiftedGaussian { mean } if !mean.is_finite() => {
                Err(Error::config("init mean must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Token width `2 n_max + 2`.
    pub fn input_dim(&self) -> usize {
        crate::tokenizer::token_width(self.n_max)
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    /// SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).into()
    }
}
