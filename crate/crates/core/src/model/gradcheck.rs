use super::forward::{bce_loss, forward, loss_and_grad, mse_loss, ForwardOptions, LossKind};
use super::params::ModelParams;
use crate::error::Result;
use crate::tokenizer::{AdjacencyOperator, TokenBatch};

/// Gradient magnitudes below `GRAD_CHECK_FLOOR * max(1, |loss|)` are compared
/// against that floor instead of relatively; central differences carry
/// rounding noise proportional to the loss value.
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_rel_error: f64,
    /// Tensor and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

/// Compares every analytic gradient coordinate with a central difference of
/// step `h`. Relative error is `|a - n| / max(|a|, |n|, floor)` with
/// `floor = GRAD_CHECK_FLOOR * max(1, |loss|)`.
pub fn finite_difference_check(
    params: &ModelParams,
    batch: &TokenBatch,
    op: &AdjacencyOperator,
    targets: &[f64],
    kind: LossKind,
    h: f64,
) -> Result<GradCheckReport> {
    let (loss, grads) = loss_and_grad(params, batch, op, targets, kind, &mut ForwardOptions::default())?;
    let floor = GRAD_CHECK_FLOOR * loss.abs().max(1.0);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        coordinates: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    let loss_at = |p: &ModelParams| -> Result<f64> {
        let logits = forward(p, batch, op, None)?;
        match kind {
            LossKind::Bce => bce_loss(&logits, targets),
            LossKind::Mse => mse_loss(&logits, targets),
        }
    };
    for (name, g) in grads.named() {
        let g = g.clone();
        for idx in 0..g.len() {
            let original = tensor_slot(&mut probe, &name, idx);
            set_slot(&mut probe, &name, idx, original + h);
            let up = loss_at(&probe)?;
            set_slot(&mut probe, &name, idx, original - h);
            let down = loss_at(&probe)?;
            set_slot(&mut probe, &name, idx, original);
            let numeric = (up - down) / (2.0 * h);
            let analytic = g.as_slice().expect("standard layout")[idx];
            let scale = analytic.abs().max(numeric.abs()).max(floor);
            let rel = (analytic - numeric).abs() / scale;
            report.coordinates += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), idx));
            }
        }
    }
    Ok(report)
}

fn tensor_slot(p: &mut ModelParams, name: &str, idx: usize) -> f64 {
    let mut tensors = p.named_mut();
    let (_, t) = tensors.iter_mut().find(|(n, _)| n == name).expect("tensor exists");
    t.as_slice().expect("standard layout")[idx]
}

fn set_slot(p: &mut ModelParams, name: &str, idx: usize, value: f64) {
    let mut tensors = p.named_mut();
    let (_, t) = tensors.iter_mut().find(|(n, _)| n == name).expect("tensor exists");
    t.as_slice_mut().expect("standard layout")[idx] = value;
}
