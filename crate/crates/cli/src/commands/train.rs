use linkformer_core::trainer;
use serde_json::json;

use crate::args::DataArgs;
use crate::data::{self, Ctx};
use crate::error::Result;
use crate::output;

pub fn run(ctx: &Ctx, args: &DataArgs) -> Result<()> {
    let mut cfg = ctx.config_required("train")?;
    cfg.data = data::merge(cfg.data, args);
    let ds = data::load(&cfg.data, cfg.train.seed)?;
    let out = ctx.out_dir()?;
    let (_, report) = trainer::train(&cfg.train, ds.num_nodes(), &ds.split, ds.features.as_ref(), out)?;
    if let Some(dir) = out {
        output::write(&dir.join("train_log.jsonl"), &report.to_json_lines())?;
        output::write(&dir.join("config.toml"), &cfg.to_toml())?;
    }
    let summary = json!({
        "seed": report.seed,
        "task": cfg.train.task.to_string(),
        "config_digest": report.config_digest,
        "checkpoint_digest": report.checkpoint_digest,
        "checkpoint": report.checkpoint,
        "epochs": report.epochs.len(),
        "final_loss": report.losses().last(),
        "stopped_early": report.stopped_early,
    });
    output::emit(out, "train.json", &output::json(&summary))
}
