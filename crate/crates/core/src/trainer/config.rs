//! Training configuration and its TOML file form.
//!
//! A config file has one section per component:
//!
//! ```toml
//! [train]
//! task = "link_bce"            # or "heuristic_regression(cn)"
//! batch_size = 64
//! learning_rate = 1e-3
//! epochs = 10
//!
//! [sampler]
//! depth = 2
//! fanout = 20
//! budget = 32
//!
//! [encoder]
//! hidden = 64
//! n_max = 32
//! init_scheme = { kind = "low_rank", rank = 5 }
//!
//! [data]
//! edges = "graph.txt"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::heuristics::{HeuristicKind, NormalizationSpec};
use crate::model::EncoderConfig;
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Task {
    LinkBce,
    HeuristicRegression(HeuristicKind),
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::LinkBce => f.write_str("link_bce"),
            Task::HeuristicRegression(k) => write!(f, "heuristic_regression({k})"),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "link_bce" {
            return Ok(Task::LinkBce);
        }
        if let Some(inner) = s.strip_prefix("heuristic_regression(").and_then(|r| r.strip_suffix(')')) {
            return Ok(Task::HeuristicRegression(inner.parse()?));
        }
        Err(Error::config(format!("unknown task {s:?}")))
    }
}

impl TryFrom<String> for Task {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Task> for String {
    fn from(t: Task) -> String {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    /// Examples per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// May be fractional; zero yields an untrained model.
    pub epochs: f64,
    pub seed: u64,
    pub negatives_per_positive: usize,
    /// Micro-batches per optimizer step; the micro-batch size is
    /// `ceil(batch_size / accumulation_steps)`.
    pub accumulation_steps: usize,
    pub sampler: SamplerConfig,
    pub encoder: EncoderConfig,
    /// Regression target normalization; defaults follow the heuristic.
    pub normalization: Option<NormalizationSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::LinkBce,
            batch_size: 64,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            epochs: 10.0,
            seed: 0,
            negatives_per_positive: 1,
            accumulation_steps: 1,
            sampler: SamplerConfig::default(),
            encoder: EncoderConfig::default(),
            normalization: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay must be non-negative"));
        }
        if !(self.epochs >= 0.0 && self.epochs.is_finite()) {
            return Err(Error::config(format!("epochs must be non-negative, got {}", self.epochs)));
        }
        if self.batch_size == 0 || self.accumulation_steps == 0 {
            return Err(Error::config("batch_size and accumulation_steps must be positive"));
        }
        if self.task == Task::LinkBce && self.negatives_per_positive == 0 {
            return Err(Error::config("link_bce needs negatives_per_positive >= 1"));
        }
        if let Some(spec) = &self.normalization {
            spec.validate()?;
        }
        crate::pipeline::check_compatible(&self.sampler, &self.encoder)
    }

    /// Hex SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        crate::model::hex_digest(&Sha256::digest(&json))
    }
}

/// Where the data comes from; every path is resolved against the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub edges: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub negatives: Option<PathBuf>,
    /// Whitespace-separated dense feature rows, one line per node.
    pub features: Option<PathBuf>,
    pub directed: bool,
    pub valid_fraction: f64,
    pub test_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            edges: None,
            split: None,
            negatives: None,
            features: None,
            directed: false,
            valid_fraction: 0.1,
            test_fraction: 0.1,
        }
    }
}

/// A parsed config file: training settings plus the data section.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        let mut root: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        for key in root.keys() {
            if !["train", "sampler", "encoder", "data"].contains(&key.as_str()) {
                return Err(Error::config(format!("unknown config section [{key}]")));
            }
        }
        let mut train = match root.remove("train") {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(Error::config("[train] must be a table")),
            None => toml::Table::new(),
        };
        for key in ["sampler", "encoder"] {
            if train.contains_key(key) {
                return Err(Error::config(format!("put {key} settings in their own [{key}] section")));
            }
            if let Some(v) = root.remove(key) {
                train.insert(key.to_string(), v);
            }
        }
        let train: TrainConfig = toml::Value::Table(train)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        let data: DataConfig = match root.remove("data") {
            Some(v) => v.try_into().map_err(|e: toml::de::Error| Error::config(e.to_string()))?,
            None => DataConfig::default(),
        };
        train.validate()?;
        Ok(ConfigFile { train, data })
    }

    /// Loads a config file, resolving data paths relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<ConfigFile> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ConfigFile::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.data.edges,
            &mut cfg.data.split,
            &mut cfg.data.negatives,
            &mut cfg.data.features,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        let mut train = toml::Table::try_from(&self.train).expect("config serializes");
        let sampler = train.remove("sampler").expect("sampler section");
        let encoder = train.remove("encoder").expect("encoder section");
        let mut root = toml::Table::new();
        root.insert("train".into(), toml::Value::Table(train));
        root.insert("sampler".into(), sampler);
        root.insert("encoder".into(), encoder);
        root.insert(
            "data".into(),
            toml::Value::Table(toml::Table::try_from(&self.data).expect("data serializes")),
        );
        toml::to_string(&root).expect("toml renders")
    }
}
