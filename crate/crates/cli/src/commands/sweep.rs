use std::fmt::Write;

use linkformer_core::evaluator::{evaluate, EvalConfig, Scorer};
use linkformer_core::theory::init_coherence;
use linkformer_core::trainer::{self, ConfigFile};
use linkformer_core::Protocol;

use crate::args::{DataArgs, SweepCommand};
use crate::data::{self, Ctx, Dataset};
use crate::error::Result;
use crate::output;

struct Outcome {
    final_loss: f64,
    auc: f64,
    mrr: f64,
    hits10: f64,
}

fn train_and_score(cfg: &ConfigFile, ds: &Dataset, negatives: &Protocol) -> Result<Outcome> {
    let (params, report) = trainer::train(&cfg.train, ds.num_nodes(), &ds.split, ds.features.as_ref(), None)?;
    let graph = ds.split.observed_graph(ds.num_nodes(), false)?;
    let scorer = Scorer::Model {
        params: &params,
        sampler: cfg.train.sampler,
        features: ds.features.as_ref(),
    };
    let eval_cfg = EvalConfig {
        seed: cfg.train.seed,
        ks: vec![10],
        ..Default::default()
    };
    let rep = evaluate(&graph, &ds.split.test, negatives, &scorer, &eval_cfg)?;
    Ok(Outcome {
        final_loss: report.losses().last().copied().unwrap_or(f64::NAN),
        auc: rep.auc,
        mrr: rep.mrr,
        hits10: rep.hits[&10],
    })
}

fn setup(ctx: &Ctx, args: &DataArgs, num_negatives: usize) -> Result<(ConfigFile, Dataset, Protocol)> {
    let mut cfg = ctx.config_required("sweep")?;
    cfg.data = data::merge(cfg.data, args);
    let ds = data::load(&cfg.data, cfg.train.seed)?;
    let negs = data::random_non_edges(&ds.graph, num_negatives, cfg.train.seed)?;
    Ok((cfg, ds, Protocol::GlobalNegatives(negs)))
}

pub fn run(ctx: &Ctx, cmd: SweepCommand) -> Result<()> {
    let (name, csv) = match cmd {
        SweepCommand::Depth {
            data,
            layers,
            num_negatives,
        } => {
            let (mut cfg, ds, negs) = setup(ctx, &data, num_negatives)?;
            let mut csv = String::from("layers,final_loss,auc,mrr,hits_at_10\n");
            for k in layers {
                cfg.train.encoder.layers = k;
                let o = train_and_score(&cfg, &ds, &negs)?;
                writeln!(csv, "{k},{},{},{},{}", o.final_loss, o.auc, o.mrr, o.hits10).expect("string write");
            }
            ("sweep_depth.csv", csv)
        }
        SweepCommand::Init {
            data,
            schemes,
            num_negatives,
        } => {
            let (mut cfg, ds, negs) = setup(ctx, &data, num_negatives)?;
            let enc = cfg.train.encoder.clone();
            let mut csv = String::from("init_scheme,coherence,final_loss,auc,mrr,hits_at_10\n");
            for scheme in schemes {
                cfg.train.encoder.init_scheme = scheme;
                cfg.train.validate()?;
                let mu = init_coherence(scheme, enc.n_max, enc.hidden, cfg.train.seed)?.mu;
                let o = train_and_score(&cfg, &ds, &negs)?;
                writeln!(csv, "\"{scheme}\",{mu},{},{},{},{}", o.final_loss, o.auc, o.mrr, o.hits10)
                    .expect("string write");
            }
            ("sweep_init.csv", csv)
        }
    };
    output::emit(ctx.out_dir()?, name, &csv)
}
