use linkformer_core::graph::write_edge_list;
use linkformer_core::rng::{stream, Stream};
use linkformer_core::sampler::{sample_subgraph, save_sample_cache};
use serde_json::json;

use crate::args::PrepareArgs;
use crate::data::{self, Ctx};
use crate::error::{CliError, Result};
use crate::output;

pub fn run(ctx: &Ctx, args: &PrepareArgs) -> Result<()> {
    let cfg = ctx.config()?;
    let out = ctx.out_dir()?.ok_or_else(|| CliError::Usage("prepare needs --out <dir>".into()))?;
    let seed = cfg.train.seed;
    let ds = data::load(&data::merge(cfg.data.clone(), &args.data), seed)?;
    write_edge_list(&ds.graph, out.join("graph.txt"))?;
    ds.split.save(out.join("split.txt"))?;
    let mut samples = None;
    if args.samples {
        let graph = ds.split.observed_graph(ds.num_nodes(), false)?;
        let mut rng = stream(seed, Stream::Sampler);
        let cached = ds
            .split
            .train
            .iter()
            .map(|&(u, v)| sample_subgraph(&graph, u, v, &cfg.train.sampler, &mut rng))
            .collect::<linkformer_core::Result<Vec<_>>>()?;
        save_sample_cache(&cached, out.join("samples.bin"))?;
        samples = Some(cached.len());
    }
    let summary = json!({
        "nodes": ds.num_nodes(),
        "edges": ds.graph.num_edges(),
        "dropped": {
            "self_loops": ds.stats.self_loops,
            "duplicates": ds.stats.duplicates,
            "unpaired": ds.stats.unpaired,
        },
        "train": ds.split.train.len(),
        "valid": ds.split.valid.len(),
        "test": ds.split.test.len(),
        "samples": samples,
        "seed": seed,
    });
    output::emit(Some(out), "prepare.json", &output::json(&summary))
}
