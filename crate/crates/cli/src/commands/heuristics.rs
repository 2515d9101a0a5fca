use std::fmt::Write;

use linkformer_core::heuristics::{max_component_diameter, NormalizationStats, PairScorer};
use linkformer_core::{HeuristicKind, NormalizationSpec};

use crate::args::HeuristicsArgs;
use crate::data::{self, Ctx};
use crate::error::Result;
use crate::output;

/// Normalization statistics are fit on the emitted pairs.
pub fn run(ctx: &Ctx, args: &HeuristicsArgs) -> Result<()> {
    let cfg = ctx.config()?;
    let (graph, _) = data::load_graph(&data::merge(cfg.data, &args.data))?;
    let pairs = match &args.pairs {
        Some(p) => data::parse_pairs(&data::read(p)?)?,
        None => graph.edges(),
    };
    for &(u, v) in &pairs {
        graph.check(u)?;
        graph.check(v)?;
    }
    let kinds = if args.kind.is_empty() {
        HeuristicKind::ALL.to_vec()
    } else {
        args.kind.clone()
    };
    let mut csv = String::from("u,v,kind,raw,normalized\n");
    for kind in kinds {
        let spec = NormalizationSpec::new(kind);
        let scorer = PairScorer::new(&graph, kind, &spec)?;
        let raw = pairs
            .iter()
            .map(|&(u, v)| scorer.score(u, v))
            .collect::<linkformer_core::Result<Vec<_>>>()?;
        let d_max = (kind == HeuristicKind::Spd).then(|| max_component_diameter(&graph));
        let normalized = if raw.is_empty() {
            Vec::new()
        } else {
            NormalizationStats::fit(&raw, &spec, d_max)?.apply(&raw)
        };
        for ((&(u, v), r), z) in pairs.iter().zip(&raw).zip(&normalized) {
            writeln!(csv, "{u},{v},{kind},{r},{z}").expect("string write");
        }
    }
    output::emit(ctx.out_dir()?, "heuristics.csv", &csv)
}
