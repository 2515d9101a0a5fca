//! Three-stage target normalization: log transform, range mapping, clipping.
//!
//! Statistics are fit once (on training-split scores) and then frozen, so
//! validation and test targets never influence their own scaling.

use serde::{Deserialize, Serialize};

use super::HeuristicKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub kind: HeuristicKind,
    pub epsilon: f64,
    /// Percentile (in `(0, 100]`) used as the range upper end for CN/AA/RA
    /// and as the upper clip for Katz/PageRank. Unused for SPD.
    pub clip_percentile: f64,
    pub katz_beta: f64,
    pub pr_alpha: f64,
    pub spd_penalty_factor: f64,
}

impl NormalizationSpec {
    pub fn new(kind: HeuristicKind) -> Self {
        let clip_percentile = match kind {
            HeuristicKind::Cn | HeuristicKind::Aa | HeuristicKind::Ra => 99.99,
            _ => 99.0,
        };
        Self {
            kind,
            epsilon: 1e-20,
            clip_percentile,
            katz_beta: 0.005,
            pr_alpha: 0.85,
            spd_penalty_factor: 1.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::config("normalization epsilon must be positive"));
        }
        if !(self.clip_percentile > 0.0 && self.clip_percentile <= 100.0) {
            return Err(Error::config("clip percentile must lie in (0, 100]"));
        }
        if !(self.katz_beta > 0.0) || !(self.pr_alpha > 0.0 && self.pr_alpha < 1.0) {
            return Err(Error::config("katz beta must be positive and pagerank alpha in (0, 1)"));
        }
        Ok(())
    }
}

/// Percentile of `values` by linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty list");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Frozen normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum NormalizationStats {
    /// `log(1+s) / upper`, clipped to 1.
    MinMax { upper: f64 },
    /// `(log(s+ε) - mean) / std`, clipped above at `clip`.
    ZScore { epsilon: f64, mean: f64, std: f64, clip: f64 },
    /// `log(1+d)`, with `penalty` for disconnected pairs.
    Spd { penalty: f64 },
}

impl NormalizationStats {
    /// Fits statistics on `raw`. SPD needs `d_max`, the largest component
    /// diameter of the graph the scores came from.
    pub fn fit(raw: &[f64], spec: &NormalizationSpec, d_max: Option<usize>) -> Result<Self> {
        spec.validate()?;
        if raw.is_empty() {
            return Err(Error::invalid("cannot fit normalization on an empty score list"));
        }
        match spec.kind {
            HeuristicKind::Cn | HeuristicKind::Aa | HeuristicKind::Ra => {
                let logs: Vec<f64> = raw.iter().map(|s| s.ln_1p()).collect();
                Ok(NormalizationStats::MinMax {
                    upper: percentile(&logs, spec.clip_percentile),
                })
            }
            HeuristicKind::Katz | HeuristicKind::PageRankPair => {
                let logs: Vec<f64> = raw.iter().map(|s| (s + spec.epsilon).ln()).collect();
                let n = logs.len() as f64;
                let mean = logs.iter().sum::<f64>() / n;
                let var = logs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                let std = var.sqrt();
                let clip = if std > 0.0 {
                    let z: Vec<f64> = logs.iter().map(|x| (x - mean) / std).collect();
                    percentile(&z, spec.clip_percentile)
                } else {
                    0.0
                };
                Ok(NormalizationStats::ZScore {
                    epsilon: spec.epsilon,
                    mean,
                    std,
                    clip,
                })
            }
            HeuristicKind::Spd => {
                let d_max = d_max.ok_or_else(|| Error::config("SPD normalization needs the maximum component diameter"))?;
                Ok(NormalizationStats::Spd {
                    penalty: (1.0 + spec.spd_penalty_factor * d_max as f64).ln(),
                })
            }
        }
    }

    pub fn apply_one(&self, s: f64) -> f64 {
        match *self {
            NormalizationStats::MinMax { upper } => {
                if upper > 0.0 {
                    (s.ln_1p() / upper).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            }
            NormalizationStats::ZScore { epsilon, mean, std, clip } => {
                if std > 0.0 {
                    (((s + epsilon).ln() - mean) / std).min(clip)
                } else {
                    0.0
                }
            }
            NormalizationStats::Spd { penalty } => {
                if s.is_finite() {
                    s.ln_1p()
                } else {
                    penalty
                }
            }
        }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().map(|&s| self.apply_one(s)).collect()
    }
}

/// Fits on `raw` and maps `raw` itself into normalized target space.
pub fn normalize_targets(raw: &[f64], spec: &NormalizationSpec, d_max: Option<usize>) -> Result<Vec<f64>> {
    Ok(NormalizationStats::fit(raw, spec, d_max)?.apply(raw))
}
