use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linkformer_core::{HeuristicKind, InitScheme};

#[derive(Debug, Parser)]
#[command(name = "linkformer", version, about = "Link prediction with a Transformer over tokenized subgraphs")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Root seed; overrides the config file's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// TOML config with [train], [sampler], [encoder] and [data] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for artifacts (checkpoints, logs, CSV and JSON reports).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load an edge list, split it, and optionally cache training samples.
    Prepare(PrepareArgs),
    /// Heuristic scores for pairs as CSV `u,v,kind,raw,normalized`.
    Heuristics(HeuristicsArgs),
    /// Train per the config; prints the run summary as JSON.
    Train(DataArgs),
    /// Rank held-out positives against negatives with a checkpoint.
    Eval(EvalArgs),
    /// Executable structural checks; exit 3 when one fails.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Desk-scale timing benchmarks, CSV output.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Train across a parameter grid and report held-out metrics as CSV.
    #[command(subcommand)]
    Sweep(SweepCommand),
}

/// Overrides for the config's [data] section.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Edge list, one `u v` pair per line.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Split file as written by `prepare`.
    #[arg(long = "split-file")]
    pub split_file: Option<PathBuf>,
    /// Treat lines as arcs; only reciprocated pairs become edges.
    #[arg(long)]
    pub directed: bool,
    #[arg(long)]
    pub valid_fraction: Option<f64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Also sample every training edge and write `samples.bin`.
    #[arg(long)]
    pub samples: bool,
}

#[derive(Debug, Args)]
pub struct HeuristicsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Pairs to score, one `u v` per line; defaults to every edge.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Heuristics to emit (cn, aa, ra, katz, spd, pagerank); all by default.
    #[arg(long, value_delimiter = ',')]
    pub kind: Vec<HeuristicKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    /// One shared negative list for every positive.
    Orig,
    /// Curated negatives per positive.
    Heart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitPart {
    Valid,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Orig)]
    pub protocol: ProtocolArg,
    /// `orig`: a pair list; `heart`: lines `u v : a b ; c d ; ...`.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    /// Global negatives drawn when `orig` has no negatives file.
    #[arg(long, default_value_t = 500)]
    pub num_negatives: usize,
    #[arg(long, value_enum, default_value_t = SplitPart::Test)]
    pub on: SplitPart,
    /// Score each pair as the mean of both orientations.
    #[arg(long)]
    pub symmetrize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    Statistical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorArg {
    Encoder,
    /// Mutant reading raw global ids through a feature channel.
    GlobalId,
    /// Mutant indexing nodes by ascending global id.
    SortedIndex,
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Logit distribution unchanged under graph relabeling.
    Invariance {
        #[arg(long, value_enum, default_value_t = ModeArg::Exhaustive)]
        mode: ModeArg,
        /// Random (graph, query, relabeling) cases; 100 exhaustive, 5 statistical.
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long, value_enum, default_value_t = PredictorArg::Encoder)]
        predictor: PredictorArg,
        /// Check a trained model instead of a fresh initialization.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 200)]
        permutations: usize,
    },
    /// Propagation dot products against common-neighbor and walk counts.
    Estimator {
        #[arg(long, default_value_t = 6)]
        max_nodes: usize,
        #[arg(long, default_value_t = 64)]
        d: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Coherence of an init scheme's id rows against the Welch bound.
    Coherence {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "orthogonal")]
        init: InitScheme,
    },
    /// Attention-off encoder against a hand-rolled sum aggregation.
    Degeneration {
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 16)]
        d: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// pad_stack versus concat_objects batch collation.
    Collation {
        #[arg(long, value_delimiter = ',', default_values_t = [64, 256, 1024, 4096])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        reps: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        /// Nodes in the synthetic collaboration-like graph.
        #[arg(long, default_value_t = 3000)]
        nodes: usize,
        /// Distinct samples drawn; larger batches cycle through them.
        #[arg(long, default_value_t = 4096)]
        pool: usize,
    },
    /// Per-batch training and inference time against depth.
    Forward {
        #[arg(long, value_delimiter = ',', default_values_t = [3, 8])]
        layers: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        batch_size: usize,
        #[arg(long, default_value_t = 50)]
        batches: usize,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value_t = 75)]
        fanout: usize,
        #[arg(long, default_value_t = 64)]
        budget: usize,
        #[arg(long, default_value_t = 32)]
        hidden: usize,
        #[arg(long, default_value_t = 3000)]
        nodes: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum SweepCommand {
    /// One run per encoder depth.
    Depth {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4])]
        layers: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        num_negatives: usize,
    },
    /// One run per input-projection initialization.
    Init {
        #[command(flatten)]
        data: DataArgs,
        #[arg(
            long,
            value_delimiter = ',',
            default_values_t = [
                InitScheme::Orthogonal,
                InitScheme::MeanShiftedGaussian { mean: 0.1 },
                InitScheme::LowRank { rank: 5 },
            ]
        )]
        schemes: Vec<InitScheme>,
        #[arg(long, default_value_t = 500)]
        num_negatives: usize,
    },
}
