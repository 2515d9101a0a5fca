use crate::args::{Cli, Command};
use crate::data::Ctx;
use crate::error::Result;

mod bench;
mod check;
mod eval;
mod heuristics;
mod prepare;
mod sweep;
mod train;

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        config: cli.config,
        out: cli.out,
    };
    match cli.command {
        Command::Prepare(a) => prepare::run(&ctx, &a),
        Command::Heuristics(a) => heuristics::run(&ctx, &a),
        Command::Train(a) => train::run(&ctx, &a),
        Command::Eval(a) => eval::run(&ctx, &a),
        Command::Check(c) => check::run(&ctx, c),
        Command::Bench(c) => bench::run(&ctx, c),
        Command::Sweep(c) => sweep::run(&ctx, c),
    }
}
