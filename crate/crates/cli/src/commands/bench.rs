use linkformer_bench::collation::{self, bench_collation, CollationInputs};
use linkformer_bench::forward::{self, bench_forward, ForwardBenchConfig};
use linkformer_bench::workload::{collab_like, edge_samples};
use linkformer_core::SamplerConfig;

use crate::args::BenchCommand;
use crate::data::Ctx;
use crate::error::Result;
use crate::output;

pub fn run(ctx: &Ctx, cmd: BenchCommand) -> Result<()> {
    let seed = ctx.seed();
    match cmd {
        BenchCommand::Collation {
            sizes,
            reps,
            warmup,
            nodes,
            pool,
        } => {
            let graph = collab_like(nodes, seed);
            let sampler = SamplerConfig {
                seed,
                ..Default::default()
            };
            let samples = edge_samples(&graph, pool, &sampler, seed)?;
            let inputs = CollationInputs::new(&samples, sampler.budget)?;
            let rows = bench_collation(&inputs, &sizes, reps, warmup)?;
            output::emit(ctx.out_dir()?, "collation.csv", &collation::rows_to_csv(&rows))
        }
        BenchCommand::Forward {
            layers,
            batch_size,
            batches,
            depth,
            fanout,
            budget,
            hidden,
            nodes,
        } => {
            let graph = collab_like(nodes, seed);
            let cfg = ForwardBenchConfig {
                layers,
                batch_size,
                batches,
                sampler: SamplerConfig {
                    depth,
                    fanout,
                    budget,
                    ..Default::default()
                },
                hidden,
                ..Default::default()
            };
            let rows = bench_forward(&graph, &cfg, seed)?;
            output::emit(ctx.out_dir()?, "forward.csv", &forward::rows_to_csv(&rows))
        }
    }
}
