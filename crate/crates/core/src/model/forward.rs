use ndarray::{s, Array2, Array3, Axis};
use rand::{Rng, RngCore};

use super::params::{Gradients, LayerParams, ModelParams};
use crate::error::{Error, Result};
use crate::tokenizer::{AdjacencyOperator, TokenBatch};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// What each encoder block computes before the propagation residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockMode {
    /// Pre-norm attention and MLP sub-blocks.
    #[default]
    Full,
    /// The block is the identity map, `Z = H`.
    AttentionIdentity,
    /// Attention and MLP run but their branch outputs are gated to zero, so
    /// the residual stream passes `H` through unchanged.
    AttentionOff,
}

impl std::str::FromStr for BlockMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(BlockMode::Full),
            "attention_identity" => Ok(BlockMode::AttentionIdentity),
            "attention_off" => Ok(BlockMode::AttentionOff),
            _ => Err(Error::invalid(format!("unknown block mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Binary cross-entropy on logits; targets are 0 or 1.
    Bce,
    /// Mean squared error on raw outputs.
    Mse,
}

#[derive(Default)]
pub struct ForwardOptions<'a> {
    pub mode: BlockMode,
    /// Per-token features, `b x (n_b + 2) x f`.
    pub features: Option<&'a Array3<f64>>,
    /// Source of dropout masks; dropout is inactive without it.
    pub dropout_rng: Option<&'a mut dyn RngCore>,
}

/// Hidden states in batch layout, padding rows zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `H^(0) ..= H^(K)`.
    pub hidden: Vec<Array3<f64>>,
    /// `Z^(1) ..= Z^(K)`.
    pub z: Vec<Array3<f64>>,
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean of `log(1 + exp(-y z))` with `y = +1` for label 1 and `-1` for 0.
pub fn bce_loss(logits: &[f64], labels: &[f64]) -> Result<f64> {
    check_targets(logits, labels)?;
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&z, &l)| softplus(if l > 0.5 { -z } else { z }))
        .sum();
    Ok(total / logits.len() as f64)
}

pub fn mse_loss(outputs: &[f64], targets: &[f64]) -> Result<f64> {
    check_targets(outputs, targets)?;
    let total: f64 = outputs.iter().zip(targets).map(|(z, t)| (z - t).powi(2)).sum();
    Ok(total / outputs.len() as f64)
}

fn check_targets(outputs: &[f64], targets: &[f64]) -> Result<()> {
    if outputs.is_empty() || outputs.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} outputs against {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    Ok(())
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array2<f64>, b: &Array2<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Vec::with_capacity(x.nrows());
    for mut row in xhat.rows_mut() {
        let mean = row.sum() / d;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * inv);
        inv_std.push(inv);
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    g: &Array2<f64>,
    cache: &LnCache,
    dg: &mut Array2<f64>,
    db: &mut Array2<f64>,
) -> Array2<f64> {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * g;
    let d = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.dim());
    for (i, mut row) in dx.rows_mut().into_iter().enumerate() {
        let dh = dxhat.row(i);
        let xh = cache.xhat.row(i);
        let mean_dh = dh.sum() / d;
        let mean_dhx = dh.dot(&xh) / d;
        let inv = cache.inv_std[i];
        for j in 0..row.len() {
            row[j] = inv * (dh[j] - mean_dh - xh[j] * mean_dhx);
        }
    }
    dx
}

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + GELU_A * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + GELU_A * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * u * u)
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
}

fn dropout_mask(shape: (usize, usize), p: f64, rng: &mut Option<&mut dyn RngCore>) -> Option<Array2<f64>> {
    let rng = rng.as_mut()?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    }))
}

struct BlockCache {
    x1: Array2<f64>,
    ln1: Option<LnCache>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    drop1: Option<Array2<f64>>,
    x2: Array2<f64>,
    ln2: Option<LnCache>,
    u: Array2<f64>,
    m1: Array2<f64>,
    drop2: Option<Array2<f64>>,
}

struct LayerCache {
    block: Option<BlockCache>,
    z: Array2<f64>,
    /// `Ã Z`.
    y: Array2<f64>,
}

struct SampleState {
    active: Vec<Vec<usize>>,
    a: Array2<f64>,
    feats: Option<Array2<f64>>,
    hidden: Vec<Array2<f64>>,
    layers: Vec<LayerCache>,
    logit: f64,
}

fn run_block(
    params: &ModelParams,
    l: &LayerParams,
    h: &Array2<f64>,
    gate: f64,
    rng: &mut Option<&mut dyn RngCore>,
) -> (Array2<f64>, BlockCache) {
    let cfg = &params.config;
    let (n, d) = h.dim();
    let (x1, ln1) = if cfg.layernorm_enabled {
        let (y, c) = layer_norm(h, &l.ln1_g, &l.ln1_b);
        (y, Some(c))
    } else {
        (h.clone(), None)
    };
    let q = x1.dot(&l.wq) + &l.bq;
    let k = x1.dot(&l.wk) + &l.bk;
    let v = x1.dot(&l.wv) + &l.bv;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut ctx = Array2::zeros((n, d));
    let mut probs = Vec::with_capacity(cfg.heads);
    for head in 0..cfg.heads {
        let cols = s![.., head * dh..(head + 1) * dh];
        let mut sc = q.slice(cols).dot(&k.slice(cols).t());
        sc.mapv_inplace(|x| x * scale);
        softmax_rows(&mut sc);
        ctx.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
        probs.push(sc);
    }
    let mut att = ctx.dot(&l.wo) + &l.bo;
    let drop1 = dropout_mask((n, d), cfg.dropout, rng);
    if let Some(m) = &drop1 {
        att *= m;
    }
    let h1 = h + &(att * gate);
    let (x2, ln2) = if cfg.layernorm_enabled {
        let (y, c) = layer_norm(&h1, &l.ln2_g, &l.ln2_b);
        (y, Some(c))
    } else {
        (h1.clone(), None)
    };
    let u = x2.dot(&l.w1) + &l.b1;
    let m1 = u.mapv(gelu);
    let mut mlp = m1.dot(&l.w2) + &l.b2;
    let drop2 = dropout_mask((n, d), cfg.dropout, rng);
    if let Some(m) = &drop2 {
        mlp *= m;
    }
    let z = h1 + &(mlp * gate);
    let cache = BlockCache {
        x1,
        ln1,
        q,
        k,
        v,
        probs,
        ctx,
        drop1,
        x2,
        ln2,
        u,
        m1,
        drop2,
    };
    (z, cache)
}

// Returns dH given dZ, accumulating parameter gradients.
fn block_backward(
    params: &ModelParams,
    l: &LayerParams,
    c: &BlockCache,
    dz: &Array2<f64>,
    gate: f64,
    gl: &mut LayerParams,
) -> Array2<f64> {
    let cfg = &params.config;
    // MLP branch
    let mut dm = dz * gate;
    if let Some(m) = &c.drop2 {
        dm *= m;
    }
    gl.w2 += &c.m1.t().dot(&dm);
    gl.b2 += &dm.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut du = dm.dot(&l.w2.t());
    ndarray::Zip::from(&mut du).and(&c.u).for_each(|g, &u| *g *= gelu_grad(u));
    gl.w1 += &c.x2.t().dot(&du);
    gl.b1 += &du.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dx2 = du.dot(&l.w1.t());
    let mut dh1 = dz.clone();
    match &c.ln2 {
        Some(ln) => dh1 += &layer_norm_backward(&dx2, &l.ln2_g, ln, &mut gl.ln2_g, &mut gl.ln2_b),
        None => dh1 += &dx2,
    }

    // attention branch
    let mut datt = &dh1 * gate;
    if let Some(m) = &c.drop1 {
        datt *= m;
    }
    gl.wo += &c.ctx.t().dot(&datt);
    gl.bo += &datt.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dctx = datt.dot(&l.wo.t());
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = Array2::zeros(c.q.dim());
    let mut dk = Array2::zeros(c.k.dim());
    let mut dv = Array2::zeros(c.v.dim());
    for (head, p) in c.probs.iter().enumerate() {
        let cols = s![.., head * dh..(head + 1) * dh];
        let dctx_h = dctx.slice(cols);
        let dp = dctx_h.dot(&c.v.slice(cols).t());
        dv.slice_mut(cols).assign(&p.t().dot(&dctx_h));
        let mut ds = p * &dp;
        let row_sums = ds.sum_axis(Axis(1));
        for (i, mut row) in ds.rows_mut().into_iter().enumerate() {
            let pr = p.row(i);
            for j in 0..row.len() {
                row[j] -= pr[j] * row_sums[i];
            }
        }
        ds.mapv_inplace(|x| x * scale);
        dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
    }
    let x1t = c.x1.t();
    gl.wq += &x1t.dot(&dq);
    gl.wk += &x1t.dot(&dk);
    gl.wv += &x1t.dot(&dv);
    gl.bq += &dq.sum_axis(Axis(0)).insert_axis(Axis(0));
    gl.bk += &dk.sum_axis(Axis(0)).insert_axis(Axis(0));
    gl.bv += &dv.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dx1 = dq.dot(&l.wq.t()) + dk.dot(&l.wk.t()) + dv.dot(&l.wv.t());
    let mut dh_in = dh1;
    match &c.ln1 {
        Some(ln) => dh_in += &layer_norm_backward(&dx1, &l.ln1_g, ln, &mut gl.ln1_g, &mut gl.ln1_b),
        None => dh_in += &dx1,
    }
    dh_in
}

fn gate_for(mode: BlockMode) -> f64 {
    match mode {
        BlockMode::AttentionOff => 0.0,
        _ => 1.0,
    }
}

fn sample_forward(
    params: &ModelParams,
    batch: &TokenBatch,
    op: &AdjacencyOperator,
    sample: usize,
    opts: &mut ForwardOptions<'_>,
) -> Result<SampleState> {
    let cfg = &params.config;
    let rows = batch.valid_rows(sample);
    let n = rows.len();
    let d = cfg.hidden;
    let active: Vec<Vec<usize>> = rows
        .iter()
        .map(|&r| {
            batch
                .token(sample, r)
                .iter()
                .enumerate()
                .filter(|(_, &b)| b == 1)
                .map(|(c, _)| c)
                .collect()
        })
        .collect();
    let mut h = Array2::<f64>::zeros((n, d));
    for (i, cols) in active.iter().enumerate() {
        let mut row = h.row_mut(i);
        for &c in cols {
            row += &params.w0.row(c);
        }
    }
    let feats = match (cfg.use_features, opts.features) {
        (true, Some(f)) => {
            let fs = Array2::from_shape_fn((n, f.dim().2), |(i, j)| f[[sample, rows[i], j]]);
            let fw = params.feat_w.as_ref().expect("feature weights");
            let fb = params.feat_b.as_ref().expect("feature bias");
            h += &(fs.dot(fw) + fb);
            Some(fs)
        }
        (true, None) => return Err(Error::invalid("model expects node features but none were given")),
        (false, _) => None,
    };
    let a = op.gather(sample, &rows);
    let mut hidden = vec![h];
    let mut layers = Vec::with_capacity(cfg.layers);
    let gate = gate_for(opts.mode);
    for (k, l) in params.layers.iter().enumerate() {
        let h = hidden.last().expect("input state");
        let (z, block) = match opts.mode {
            BlockMode::AttentionIdentity => (h.clone(), None),
            _ => {
                let (z, c) = run_block(params, l, h, gate, &mut opts.dropout_rng);
                (z, Some(c))
            }
        };
        let y = a.dot(&z);
        let next = &z + &y.dot(&l.p);
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric(format!("layer {}", k + 1), "non-finite hidden state"));
        }
        hidden.push(next);
        layers.push(LayerCache { block, z, y });
    }
    let last = hidden.last().expect("final state");
    let logit: f64 = last.row(n - 2).dot(&params.out_w.slice(s![..d, 0]))
        + last.row(n - 1).dot(&params.out_w.slice(s![d.., 0]))
        + params.out_b[[0, 0]];
    if !logit.is_finite() {
        return Err(Error::numeric("readout", "non-finite logit"));
    }
    Ok(SampleState {
        active,
        a,
        feats,
        hidden,
        layers,
        logit,
    })
}

fn sample_backward(params: &ModelParams, st: &SampleState, dlogit: f64, mode: BlockMode, grads: &mut Gradients) {
    let d = params.config.hidden;
    let n = st.active.len();
    let last = st.hidden.last().expect("final state");
    grads.out_b[[0, 0]] += dlogit;
    {
        let mut ow = grads.out_w.column_mut(0);
        ow.slice_mut(s![..d]).scaled_add(dlogit, &last.row(n - 2));
        ow.slice_mut(s![d..]).scaled_add(dlogit, &last.row(n - 1));
    }
    let mut dh = Array2::<f64>::zeros((n, d));
    dh.row_mut(n - 2).scaled_add(dlogit, &params.out_w.slice(s![..d, 0]));
    dh.row_mut(n - 1).scaled_add(dlogit, &params.out_w.slice(s![d.., 0]));

    let gate = gate_for(mode);
    for (k, l) in params.layers.iter().enumerate().rev() {
        let cache = &st.layers[k];
        let gl = &mut grads.layers[k];
        gl.p += &cache.y.t().dot(&dh);
        let dy = dh.dot(&l.p.t());
        let dz = dh + st.a.t().dot(&dy);
        dh = match &cache.block {
            Some(c) => block_backward(params, l, c, &dz, gate, gl),
            None => dz,
        };
    }
    if let Some(gw0) = &mut grads.w0 {
        for (i, cols) in st.active.iter().enumerate() {
            for &c in cols {
                let mut row = gw0.row_mut(c);
                row += &dh.row(i);
            }
        }
    }
    if let (Some(fs), Some(gw), Some(gb)) = (&st.feats, &mut grads.feat_w, &mut grads.feat_b) {
        *gw += &fs.t().dot(&dh);
        *gb += &dh.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if !params.config.propagation_residual {
        for gl in &mut grads.layers {
            gl.p.fill(0.0);
        }
    }
}

fn check_inputs(params: &ModelParams, batch: &TokenBatch, op: &AdjacencyOperator, opts: &ForwardOptions<'_>) -> Result<()> {
    let cfg = &params.config;
    if batch.n_max != cfg.n_max {
        return Err(Error::invalid(format!(
            "batch built for N_max = {} but the model expects {}",
            batch.n_max, cfg.n_max
        )));
    }
    let per = batch.rows_per_sample();
    if op.data.dim() != (batch.b, per, per) {
        return Err(Error::invalid("adjacency operator shape does not match the batch"));
    }
    if let Some(f) = opts.features {
        if f.dim().0 != batch.b || f.dim().1 != per || f.dim().2 != cfg.feature_dim {
            return Err(Error::invalid("feature tensor shape does not match the batch"));
        }
    }
    Ok(())
}

fn to_batch_layout(batch: &TokenBatch, per_sample: &[&Array2<f64>], d: usize) -> Array3<f64> {
    let mut out = Array3::zeros((batch.b, batch.rows_per_sample(), d));
    for (sample, m) in per_sample.iter().enumerate() {
        for (i, r) in batch.valid_rows(sample).into_iter().enumerate() {
            out.slice_mut(s![sample, r, ..]).assign(&m.row(i));
        }
    }
    out
}

/// Logits for every sample of the batch (no dropout, full blocks).
pub fn forward(
    params: &ModelParams,
    batch: &TokenBatch,
    op: &AdjacencyOperator,
    features: Option<&Array3<f64>>,
) -> Result<Vec<f64>> {
    let mut opts = ForwardOptions {
        features,
        ..Default::default()
    };
    check_inputs(params, batch, op, &opts)?;
    (0..batch.b)
        .map(|s| sample_forward(params, batch, op, s, &mut opts).map(|st| st.logit))
        .collect()
}

pub fn forward_traced(
    params: &ModelParams,
    batch: &TokenBatch,
    op: &AdjacencyOperator,
    opts: &mut ForwardOptions<'_>,
) -> Result<(Vec<f64>, ForwardTrace)> {
    check_inputs(params, batch, op, opts)?;
    let states: Vec<SampleState> = (0..batch.b)
        .map(|s| sample_forward(params, batch, op, s, opts))
        .collect::<Result<_>>()?;
    let d = params.config.hidden;
    let hidden = (0..=params.config.layers)
        .map(|k| to_batch_layout(batch, &states.iter().map(|st| &st.hidden[k]).collect::<Vec<_>>(), d))
        .collect();
    let z = (0..params.config.layers)
        .map(|k| to_batch_layout(batch, &states.iter().map(|st| &st.layers[k].z).collect::<Vec<_>>(), d))
        .collect();
    let logits = states.iter().map(|st| st.logit).collect();
    Ok((logits, ForwardTrace { hidden, z }))
}

/// Forward with the blocks reduced to the identity; requires layer norm
/// disabled so the reduction is exact.
pub fn degenerate_forward(
    params: &ModelParams,
    batch: &TokenBatch,
    op: &AdjacencyOperator,
    mode: BlockMode,
) -> Result<(Vec<f64>, ForwardTrace)> {
    if mode == BlockMode::Full {
        return Err(Error::invalid("degenerate forward needs attention_off or attention_identity"));
    }
    if params.config.layernorm_enabled {
        return Err(Error::config("degenerate modes require layernorm_enabled = false"));
    }
    let mut opts = ForwardOptions {
        mode,
        ..Default::default()
    };
    forward_traced(params, batch, op, &mut opts)
}

/// Mean loss over the batch and its exact gradient.
pub fn loss_and_grad(
    params: &ModelParams,
    batch: &TokenBatch,
    op: &AdjacencyOperator,
    targets: &[f64],
    kind: LossKind,
    opts: &mut ForwardOptions<'_>,
) -> Result<(f64, Gradients)> {
    check_inputs(params, batch, op, opts)?;
    if targets.len() != batch.b {
        return Err(Error::invalid(format!("{} targets for {} samples", targets.len(), batch.b)));
    }
    let mut grads = params.zero_grads();
    let mut logits = Vec::with_capacity(batch.b);
    let inv_b = 1.0 / batch.b as f64;
    for (s, &t) in targets.iter().enumerate() {
        let st = sample_forward(params, batch, op, s, opts)?;
        let dlogit = match kind {
            LossKind::Bce => (sigmoid(st.logit) - t) * inv_b,
            LossKind::Mse => 2.0 * (st.logit - t) * inv_b,
        };
        sample_backward(params, &st, dlogit, opts.mode, &mut grads);
        logits.push(st.logit);
    }
    let loss = match kind {
        LossKind::Bce => bce_loss(&logits, targets)?,
        LossKind::Mse => mse_loss(&logits, targets)?,
    };
    Ok((loss, grads))
}
