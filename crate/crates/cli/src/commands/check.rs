use linkformer_core::graph::generators::{chung_lu, complete, erdos_renyi, nonisomorphic, triangle};
use linkformer_core::model::load_checkpoint;
use linkformer_core::rng::{keyed_stream, stream, Stream};
use linkformer_core::theory::{
    cn_estimator_check, cn_monte_carlo, degeneration_check, degeneration_samples, init_coherence, invariance_test,
    propagation_probe, walk_count_check, InvarianceConfig, InvarianceMode, Predictor,
};
use linkformer_core::{EncoderConfig, Graph, InitScheme, ModelParams, SamplerConfig};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use crate::args::{CheckCommand, ModeArg, PredictorArg};
use crate::data::Ctx;
use crate::error::{CliError, Result};
use crate::output;

const EXACT: f64 = 1e-9;

pub fn run(ctx: &Ctx, cmd: CheckCommand) -> Result<()> {
    let seed = ctx.seed();
    let (name, report) = match cmd {
        CheckCommand::Invariance {
            mode,
            cases,
            predictor,
            checkpoint,
            trials,
            permutations,
        } => {
            let params = match (&checkpoint, predictor) {
                (Some(p), _) => load_checkpoint(p)?,
                (None, p) => ModelParams::init(&probe_encoder(p == PredictorArg::GlobalId), &mut stream(seed, Stream::Init))?,
            };
            let cases = cases.unwrap_or(match mode {
                ModeArg::Exhaustive => 100,
                ModeArg::Statistical => 5,
            });
            ("invariance", invariance(&params, mode, predictor, cases, trials, permutations, seed)?)
        }
        CheckCommand::Estimator { max_nodes, d, trials } => ("estimator", estimator(max_nodes, d, trials, seed)?),
        CheckCommand::Coherence { n, d, init } => ("coherence", coherence(n, d, init, seed)?),
        CheckCommand::Degeneration { samples, layers, d } => ("degeneration", degeneration(samples, layers, d, seed)?),
    };
    output::emit(ctx.out_dir()?, &format!("check_{name}.json"), &output::json(&report))?;
    if report["pass"] == json!(true) {
        Ok(())
    } else {
        Err(CliError::CheckFailed(name.into()))
    }
}

fn probe_encoder(features: bool) -> EncoderConfig {
    EncoderConfig {
        hidden: 16,
        intermediate: 32,
        layers: 2,
        heads: 2,
        n_max: 8,
        use_features: features,
        feature_dim: usize::from(features),
        ..Default::default()
    }
}

struct Case {
    g: Graph,
    u: usize,
    v: usize,
    pi: Vec<usize>,
}

fn random_case<R: Rng>(rng: &mut R, mode: ModeArg) -> Case {
    let g = match mode {
        ModeArg::Exhaustive => {
            let n = rng.random_range(4..=7);
            erdos_renyi(n, rng.random_range(0.3..0.8), rng)
        }
        ModeArg::Statistical => erdos_renyi(20, 0.25, rng),
    };
    let n = g.num_nodes();
    let u = rng.random_range(0..n);
    let v = (u + rng.random_range(1..n)) % n;
    let mut pi: Vec<usize> = (0..n).collect();
    pi.shuffle(rng);
    Case { g, u, v, pi }
}

fn invariance(
    params: &ModelParams,
    mode: ModeArg,
    predictor: PredictorArg,
    cases: usize,
    trials: usize,
    permutations: usize,
    seed: u64,
) -> Result<Value> {
    let pred = match predictor {
        PredictorArg::Encoder => Predictor::Encoder { params, features: None },
        PredictorArg::GlobalId => Predictor::GlobalIdFeatures(params),
        PredictorArg::SortedIndex => Predictor::SortedIndex(params),
    };
    let mut cfg = InvarianceConfig {
        seed,
        ..Default::default()
    };
    if mode == ModeArg::Statistical {
        cfg.mode = InvarianceMode::Statistical { trials, permutations };
        cfg.sampler = SamplerConfig {
            depth: 2,
            fanout: 3,
            budget: params.config.n_max,
            ..Default::default()
        };
    }
    let mut rng = stream(seed, Stream::Check);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let mut min_p: Option<f64> = None;
    for i in 0..cases {
        let c = random_case(&mut rng, mode);
        cfg.seed = seed.wrapping_add(i as u64);
        let rep = invariance_test(pred, &c.g, c.u, c.v, &c.pi, &cfg)?;
        failures += usize::from(!rep.pass);
        worst = worst.max(rep.max_multiset_discrepancy);
        if let Some(p) = rep.p_value {
            min_p = Some(min_p.map_or(p, |m: f64| m.min(p)));
        }
    }
    Ok(json!({
        "mode": format!("{mode:?}").to_lowercase(),
        "predictor": format!("{predictor:?}"),
        "cases": cases,
        "failures": failures,
        "max_multiset_discrepancy": worst,
        "min_p_value": min_p,
        "pass": failures == 0,
    }))
}

fn estimator(max_nodes: usize, d: usize, trials: usize, seed: u64) -> Result<Value> {
    if !(2..=8).contains(&max_nodes) {
        return Err(CliError::Usage("--max-nodes must lie in 2..=8".into()));
    }
    let graphs: Vec<Graph> = (2..=max_nodes).flat_map(nonisomorphic).collect();
    let cn_err = cn_estimator_check(&graphs, d, seed)?;
    let walk_err = walk_count_check(&graphs, d, seed)?;
    let mut rng = keyed_stream(seed, Stream::Check, 0);
    let mc = [("triangle", triangle(), 0, 1), ("k5", complete(5), 0, 1)]
        .into_iter()
        .map(|(name, g, u, v)| Ok((name, cn_monte_carlo(&g, u, v, d, trials, &mut rng)?)))
        .collect::<Result<Vec<_>>>()?;
    let pass = cn_err <= EXACT && walk_err <= EXACT && mc.iter().all(|(_, r)| r.within);
    Ok(json!({
        "graphs": graphs.len(),
        "max_nodes": max_nodes,
        "d": d,
        "cn_max_error": cn_err,
        "walk_max_error": walk_err,
        "monte_carlo": mc.into_iter().map(|(name, r)| json!({"graph": name, "report": r})).collect::<Vec<_>>(),
        "pass": pass,
    }))
}

fn coherence(n: usize, d: usize, init: InitScheme, seed: u64) -> Result<Value> {
    let rep = init_coherence(init, n, d, seed)?;
    let pass = match rep.welch {
        Some(w) => rep.mu >= w - 1e-12,
        None => init != InitScheme::Orthogonal || rep.mu <= 1e-6,
    };
    Ok(json!({
        "n": rep.n,
        "d": rep.d,
        "init": init.to_string(),
        "mu": rep.mu,
        "welch": rep.welch,
        "pass": pass,
    }))
}

fn degeneration(count: usize, layers: usize, d: usize, seed: u64) -> Result<Value> {
    let n_max = 12.min(d);
    let graph = chung_lu(300, 6.0, 2.5, &mut stream(seed, Stream::Split));
    let sampler = SamplerConfig {
        depth: 2,
        fanout: 5,
        budget: n_max,
        ..Default::default()
    };
    let samples = degeneration_samples(&graph, count, &sampler, seed)?;
    let mut params = propagation_probe(n_max, d, layers, seed)?;
    let mut rng = stream(seed, Stream::Check);
    for l in &mut params.layers {
        l.p = Array2::from_shape_simple_fn((d, d), || rng.random_range(-0.3..0.3));
    }
    let err = degeneration_check(&params, &samples)?;
    Ok(json!({
        "samples": samples.len(),
        "layers": layers,
        "d": d,
        "max_error": err,
        "pass": err <= EXACT,
    }))
}
