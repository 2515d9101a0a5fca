use linkformer_core::evaluator::{evaluate, EvalConfig, Scorer};
use linkformer_core::graph::parse_negatives;
use linkformer_core::model::load_checkpoint;
use linkformer_core::pipeline::check_compatible;
use linkformer_core::{Protocol, SamplerConfig};

use crate::args::{EvalArgs, ProtocolArg, SplitPart};
use crate::data::{self, Ctx};
use crate::error::{CliError, Result};
use crate::output;

pub fn run(ctx: &Ctx, args: &EvalArgs) -> Result<()> {
    let cfg = ctx.config()?;
    let seed = cfg.train.seed;
    let params = load_checkpoint(&args.checkpoint)?;
    let sampler = if ctx.config.is_some() {
        cfg.train.sampler
    } else {
        SamplerConfig {
            budget: SamplerConfig::default().budget.min(params.config.n_max),
            ..Default::default()
        }
    };
    check_compatible(&sampler, &params.config)?;
    let ds = data::load(&data::merge(cfg.data, &args.data), seed)?;
    let positives = match args.on {
        SplitPart::Valid => &ds.split.valid,
        SplitPart::Test => &ds.split.test,
    };
    let graph = ds.split.observed_graph(ds.num_nodes(), false)?;
    let protocol = match (args.protocol, &args.negatives) {
        (ProtocolArg::Orig, Some(p)) => Protocol::GlobalNegatives(data::parse_pairs(&data::read(p)?)?),
        (ProtocolArg::Orig, None) => {
            Protocol::GlobalNegatives(data::random_non_edges(&ds.graph, args.num_negatives, seed)?)
        }
        (ProtocolArg::Heart, Some(p)) => Protocol::PerPositive(parse_negatives(&data::read(p)?)?),
        (ProtocolArg::Heart, None) => Protocol::PerPositive(ds.split.negatives.clone().ok_or_else(|| {
            CliError::Usage("heart protocol needs --negatives or [data] negatives".into())
        })?),
    };
    let scorer = Scorer::Model {
        params: &params,
        sampler,
        features: ds.features.as_ref(),
    };
    let eval_cfg = EvalConfig {
        seed,
        symmetrize: args.symmetrize,
        ..Default::default()
    };
    let report = evaluate(&graph, positives, &protocol, &scorer, &eval_cfg)?;
    let out = ctx.out_dir()?;
    if let Some(dir) = out {
        output::write(&dir.join("ranks.csv"), &report.ranks_csv())?;
    }
    let summary: serde_json::Value = serde_json::from_str(&report.summary_json()).expect("summary is json");
    output::emit(out, "eval.json", &output::json(&summary))
}
