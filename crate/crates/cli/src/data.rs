//! Config resolution and dataset loading shared by the subcommands.

use std::path::{Path, PathBuf};

use linkformer_core::graph::{
    load_edge_list, parse_negatives, split_edges, BuildStats, EdgeListOptions, SplitFractions,
};
use linkformer_core::pipeline::load_features;
use linkformer_core::rng::{stream, Stream};
use linkformer_core::trainer::{ConfigFile, DataConfig};
use linkformer_core::{EdgeSplit, Error, Graph, Pair};
use ndarray::Array2;
use rand::Rng;

use crate::args::DataArgs;
use crate::error::{CliError, Result};

pub struct Ctx {
    pub seed: Option<u64>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Ctx {
    /// The config file if given, else defaults; `--seed` wins over the file.
    pub fn config(&self) -> Result<ConfigFile> {
        let mut cfg = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        Ok(cfg)
    }

    pub fn config_required(&self, what: &str) -> Result<ConfigFile> {
        if self.config.is_none() {
            return Err(CliError::Usage(format!("{what} needs --config <path>")));
        }
        self.config()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> Result<Option<&Path>> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
                    path: dir.clone(),
                    source,
                })?;
                Ok(Some(dir))
            }
            None => Ok(None),
        }
    }
}

pub fn merge(mut data: DataConfig, args: &DataArgs) -> DataConfig {
    if let Some(e) = &args.edges {
        data.edges = Some(e.clone());
    }
    if let Some(s) = &args.split_file {
        data.split = Some(s.clone());
    }
    if args.directed {
        data.directed = true;
    }
    if let Some(v) = args.valid_fraction {
        data.valid_fraction = v;
    }
    if let Some(t) = args.test_fraction {
        data.test_fraction = t;
    }
    data
}

pub fn load_graph(data: &DataConfig) -> Result<(Graph, BuildStats)> {
    let path = data
        .edges
        .as_ref()
        .ok_or_else(|| CliError::Usage("no edge list: pass --edges or set [data] edges".into()))?;
    let opts = EdgeListOptions {
        undirected: !data.directed,
        num_nodes: None,
    };
    Ok(load_edge_list(path, opts)?)
}

pub struct Dataset {
    pub graph: Graph,
    pub stats: BuildStats,
    pub split: EdgeSplit,
    pub features: Option<Array2<f64>>,
}

impl Dataset {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }
}

/// Graph, split (loaded, or drawn from `seed`), curated negatives and features.
pub fn load(data: &DataConfig, seed: u64) -> Result<Dataset> {
    let (graph, stats) = load_graph(data)?;
    let mut split = match &data.split {
        Some(p) => EdgeSplit::load(p)?,
        None => {
            let fractions = SplitFractions::new(
                1.0 - data.valid_fraction - data.test_fraction,
                data.valid_fraction,
                data.test_fraction,
            )?;
            split_edges(&graph, fractions, seed)?
        }
    };
    split.validate(graph.num_nodes())?;
    if let Some(p) = &data.negatives {
        split.negatives = Some(parse_negatives(&read(p)?)?);
    }
    let features = data.features.as_ref().map(load_features).transpose()?;
    if let Some(f) = &features {
        if f.nrows() != graph.num_nodes() {
            return Err(CliError::Usage(format!(
                "feature file has {} rows for {} nodes",
                f.nrows(),
                graph.num_nodes()
            )));
        }
    }
    Ok(Dataset {
        graph,
        stats,
        split,
        features,
    })
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

/// `u v` per line; blank lines and `#` comments skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<Pair>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ids: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                message: format!("{e}"),
            })?;
        match ids[..] {
            [u, v] => out.push((u, v)),
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected two ids, found {}", ids.len()),
                }
                .into())
            }
        }
    }
    Ok(out)
}

/// `count` distinct non-adjacent pairs `u < v`, uniform over `graph`.
pub fn random_non_edges(graph: &Graph, count: usize, seed: u64) -> Result<Vec<Pair>> {
    let n = graph.num_nodes();
    let capacity = (n * n.saturating_sub(1) / 2).saturating_sub(graph.num_edges());
    if count > capacity {
        return Err(CliError::Usage(format!("asked for {count} negatives but only {capacity} non-edges exist")));
    }
    let mut rng = stream(seed, Stream::Eval);
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && !graph.has_edge(u, v) {
            seen.insert((u.min(v), u.max(v)));
        }
    }
    Ok(seen.into_iter().collect())
}
