mod common;

use linkformer_core::graph::{generators, split_edges, SplitFractions};
use linkformer_core::model::{checkpoint_digest, load_checkpoint};
use linkformer_core::rng::{self, Stream};
use linkformer_core::trainer::{fit, sample_negatives, train, train_link, ConfigFile, Task, TrainConfig};
use linkformer_core::{EncoderConfig, EdgeSplit, Graph, HeuristicKind, ModelParams, Pair, SamplerConfig};
use linkformer_core::model::LossKind;

fn small_cfg() -> TrainConfig {
    TrainConfig {
        epochs: 2.0,
        batch_size: 16,
        sampler: SamplerConfig {
            depth: 2,
            fanout: 4,
            budget: 8,
            ..Default::default()
        },
        encoder: EncoderConfig {
            hidden: 8,
            intermediate: 16,
            layers: 1,
            heads: 2,
            n_max: 8,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn small_split() -> (Graph, EdgeSplit) {
    let g = generators::erdos_renyi(40, 0.12, &mut common::rng(21));
    let split = split_edges(&g, SplitFractions::new(0.8, 0.1, 0.1).unwrap(), 3).unwrap();
    (g, split)
}

#[test]
fn repeated_training_is_bitwise_identical() {
    let (_, split) = small_split();
    let cfg = small_cfg();
    let dir = tempfile::tempdir().unwrap();
    let (a, ra) = train(&cfg, 40, &split, None, Some(dir.path())).unwrap();
    let (b, rb) = train(&cfg, 40, &split, None, None).unwrap();
    assert_eq!(ra.losses(), rb.losses());
    assert_eq!(ra.checkpoint_digest, rb.checkpoint_digest);
    assert_eq!(checkpoint_digest(&a), checkpoint_digest(&b));
    assert!(ra.losses().iter().all(|l| l.is_finite()));
    for name in ["epoch_0.ckpt", "epoch_1.ckpt", "final.ckpt"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    assert_eq!(load_checkpoint(dir.path().join("final.ckpt")).unwrap(), a);

    let mut other = cfg.clone();
    other.seed = 1;
    let (_, rc) = train(&other, 40, &split, None, None).unwrap();
    assert_ne!(ra.checkpoint_digest, rc.checkpoint_digest);
}

#[test]
fn zero_epochs_returns_the_initial_model() {
    let (_, split) = small_split();
    let mut cfg = small_cfg();
    cfg.epochs = 0.0;
    let dir = tempfile::tempdir().unwrap();
    let (params, report) = train(&cfg, 40, &split, None, Some(dir.path())).unwrap();
    assert!(report.epochs.is_empty());
    let init = ModelParams::init(&cfg.encoder, &mut rng::stream(cfg.seed, Stream::Init)).unwrap();
    assert_eq!(params, init);
    assert_eq!(report.checkpoint_digest.as_deref(), Some(checkpoint_digest(&init).as_str()));
    assert!(dir.path().join("final.ckpt").exists());
}

#[test]
fn first_batch_loss_is_ln2_with_frozen_projection_and_zero_readout() {
    let (_, split) = small_split();
    let graph = split.observed_graph(40, false).unwrap();
    let mut cfg = small_cfg();
    cfg.encoder.freeze_input_projection = true;
    cfg.batch_size = 1000;
    cfg.epochs = 1.0;
    let mut params = ModelParams::init(&cfg.encoder, &mut rng::stream(0, Stream::Init)).unwrap();
    params.out_w.fill(0.0);
    params.out_b.fill(0.0);
    let w0 = params.w0.clone();
    let positives = split.train.clone();
    let mut source = |epoch: usize| -> linkformer_core::Result<Vec<(Pair, f64)>> {
        let negs = sample_negatives(&graph, &positives, 1, &mut rng::keyed_stream(0, Stream::Negatives, epoch as u64))?;
        Ok(positives.iter().map(|&p| (p, 1.0)).chain(negs.into_iter().map(|p| (p, 0.0))).collect())
    };
    let report = fit(&mut params, &cfg, &graph, None, &mut source, LossKind::Bce, None, None).unwrap();
    assert_eq!(report.epochs[0].batches, 1);
    assert!((report.epochs[0].loss - std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(params.w0, w0);
}

#[test]
fn fractional_epochs_train_a_prefix() {
    let (_, split) = small_split();
    let mut cfg = small_cfg();
    cfg.epochs = 1.0;
    let (_, full) = train(&cfg, 40, &split, None, None).unwrap();
    cfg.epochs = 0.5;
    let (_, half) = train(&cfg, 40, &split, None, None).unwrap();
    assert_eq!(half.epochs.len(), 1);
    assert_eq!(half.epochs[0].batches, full.epochs[0].batches.div_ceil(2));
    cfg.epochs = 1.5;
    let (_, more) = train(&cfg, 40, &split, None, None).unwrap();
    assert_eq!(more.epochs.len(), 2);
    assert_eq!(more.epochs[0].loss, full.epochs[0].loss);
    assert_eq!(more.epochs[1].batches, half.epochs[0].batches);
}

#[test]
fn accumulation_matches_one_large_batch() {
    let (_, split) = small_split();
    let graph = split.observed_graph(40, false).unwrap();
    let mut cfg = small_cfg();
    cfg.epochs = 1.0;
    cfg.batch_size = 8;
    let positives: Vec<Pair> = split.train[..16].to_vec();
    let run = |accumulation_steps: usize| {
        let cfg = TrainConfig {
            accumulation_steps,
            ..cfg.clone()
        };
        let (p, _) = train_link(&cfg, &graph, &positives, None, None, None).unwrap();
        p
    };
    let one = run(1);
    let two = run(2);
    for ((name, a), (_, b)) in one.named().into_iter().zip(two.named()) {
        let gap = (a - b).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(gap < 1e-10, "{name}: {gap}");
    }
    // a micro-batch of 4 without accumulation takes twice the steps
    assert_ne!(checkpoint_digest(&one), checkpoint_digest(&{
        let cfg = TrainConfig { batch_size: 4, ..cfg.clone() };
        train_link(&cfg, &graph, &positives, None, None, None).unwrap().0
    }));
}

#[test]
fn divergence_keeps_the_last_good_checkpoint() {
    let (_, split) = small_split();
    let mut cfg = small_cfg();
    cfg.learning_rate = 1e300;
    cfg.encoder.layernorm_enabled = false;
    cfg.encoder.normalize_adjacency = false;
    cfg.epochs = 5.0;
    let dir = tempfile::tempdir().unwrap();
    let err = train(&cfg, 40, &split, None, Some(dir.path())).unwrap_err();
    assert!(err.is_numeric(), "{err}");
    let last = load_checkpoint(dir.path().join("last_good.ckpt")).unwrap();
    last.check_finite().unwrap();
}

#[test]
fn regression_task_trains() {
    let (_, split) = small_split();
    let mut cfg = small_cfg();
    cfg.task = Task::HeuristicRegression(HeuristicKind::Cn);
    let (_, report) = train(&cfg, 40, &split, None, None).unwrap();
    assert_eq!(report.epochs.len(), 2);
    assert!(report.losses().iter().all(|l| l.is_finite() && *l >= 0.0));
}

#[test]
fn early_stop_hook_ends_training() {
    let (_, split) = small_split();
    let graph = split.observed_graph(40, false).unwrap();
    let mut cfg = small_cfg();
    cfg.epochs = 10.0;
    let mut calls = 0;
    let mut hook = |epoch: usize, _: &ModelParams| {
        calls += 1;
        Ok(epoch == 2)
    };
    let (_, report) = train_link(&cfg, &graph, &split.train, None, None, Some(&mut hook)).unwrap();
    assert!(report.stopped_early);
    assert_eq!(report.epochs.len(), 3);
    assert_eq!(calls, 3);
    let lines = report.to_json_lines();
    assert_eq!(lines.lines().count(), 4);
    assert!(lines.lines().last().unwrap().contains("\"stopped_early\":true"));
}

#[test]
fn config_file_round_trip_and_digest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "[train]\nepochs = 3\nseed = 4\n[sampler]\nbudget = 8\n[encoder]\nn_max = 8\nhidden = 8\nheads = 2\n[data]\nedges = \"g.txt\"\n",
    )
    .unwrap();
    let cfg = ConfigFile::load(&path).unwrap();
    assert_eq!(cfg.data.edges.as_deref(), Some(dir.path().join("g.txt").as_path()));
    assert_eq!(cfg.train.seed, 4);
    let again = ConfigFile::parse(&cfg.to_toml()).unwrap();
    assert_eq!(again.train.digest(), cfg.train.digest());
    let mut changed = cfg.train.clone();
    changed.learning_rate *= 2.0;
    assert_ne!(changed.digest(), cfg.train.digest());
}

#[test]
fn invalid_configs_are_rejected() {
    let (_, split) = small_split();
    for f in [
        |c: &mut TrainConfig| c.learning_rate = 0.0,
        |c: &mut TrainConfig| c.epochs = -1.0,
        |c: &mut TrainConfig| c.negatives_per_positive = 0,
        |c: &mut TrainConfig| c.sampler.budget = 9,
        |c: &mut TrainConfig| c.batch_size = 0,
    ] {
        let mut cfg = small_cfg();
        f(&mut cfg);
        assert!(train(&cfg, 40, &split, None, None).is_err());
    }
}
