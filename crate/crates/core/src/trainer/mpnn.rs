//! Plain sum-aggregation message-passing baseline over the same sampled
//! subgraphs the encoder sees. Nodes start from one shared learned vector
//! (no identifiers), so the network only sees what 1-WL refinement can.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LossKind;
use crate::sampler::SubgraphSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpnnConfig {
    pub hidden: usize,
    pub layers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpnnLayer {
    pub w_self: Array2<f64>,
    pub w_nbr: Array2<f64>,
    pub b: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpnnParams {
    pub config: MpnnConfig,
    pub h0: Array2<f64>,
    pub layers: Vec<MpnnLayer>,
    /// Readout over `[h_u * h_v | h_u + h_v]`.
    pub out_w: Array2<f64>,
    pub out_b: Array2<f64>,
}

impl MpnnParams {
    pub fn init<R: Rng + ?Sized>(config: MpnnConfig, rng: &mut R) -> Result<MpnnParams> {
        if config.hidden == 0 {
            return Err(Error::config("mpnn hidden size must be positive"));
        }
        let d = config.hidden;
        let std = 1.0 / (d as f64).sqrt();
        let mut g = |r: usize, c: usize, s: f64| Array2::from_shape_simple_fn((r, c), || s * rng.sample::<f64, _>(StandardNormal));
        let h0 = g(1, d, 1.0);
        let layers = (0..config.layers)
            .map(|_| MpnnLayer {
                w_self: g(d, d, std),
                w_nbr: g(d, d, std),
                b: Array2::zeros((1, d)),
            })
            .collect();
        let out_w = g(2 * d, 1, 1.0 / ((2 * d) as f64).sqrt());
        Ok(MpnnParams {
            config,
            h0,
            layers,
            out_w,
            out_b: Array2::zeros((1, 1)),
        })
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = vec![("h0".to_string(), &mut self.h0)];
        for (k, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layers.{k}.w_self"), &mut l.w_self));
            out.push((format!("layers.{k}.w_nbr"), &mut l.w_nbr));
            out.push((format!("layers.{k}.b"), &mut l.b));
        }
        out.push(("out.w".into(), &mut self.out_w));
        out.push(("out.b".into(), &mut self.out_b));
        out
    }

    fn zeros_like(&self) -> MpnnParams {
        let mut z = self.clone();
        for (_, t) in z.named_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn score(&self, sample: &SubgraphSample) -> f64 {
        self.run(sample).0
    }

    fn adjacency(sample: &SubgraphSample) -> Array2<f64> {
        let n = sample.len();
        Array2::from_shape_fn((n, n), |(i, j)| f64::from(sample.adjacency[i * n + j]))
    }

    // Returns the logit and the post-activation states H^(0..=K).
    fn run(&self, sample: &SubgraphSample) -> (f64, Vec<Array2<f64>>) {
        let n = sample.len();
        let d = self.config.hidden;
        let a = Self::adjacency(sample);
        let mut states = vec![Array2::from_shape_fn((n, d), |(_, j)| self.h0[[0, j]])];
        for l in &self.layers {
            let h = states.last().expect("state");
            let u = h.dot(&l.w_self) + a.dot(h).dot(&l.w_nbr) + &l.b;
            states.push(u.mapv(f64::tanh));
        }
        let h = states.last().expect("state");
        let (hu, hv) = (h.row(0), h.row(1));
        let mut z = self.out_b[[0, 0]];
        for j in 0..d {
            z += hu[j] * hv[j] * self.out_w[[j, 0]] + (hu[j] + hv[j]) * self.out_w[[d + j, 0]];
        }
        (z, states)
    }

    /// Mean loss over `samples` and gradients by tensor name.
    pub fn loss_and_grad(
        &self,
        samples: &[SubgraphSample],
        targets: &[f64],
        kind: LossKind,
    ) -> Result<(f64, Vec<(String, Array2<f64>)>)> {
        if samples.is_empty() || samples.len() != targets.len() {
            return Err(Error::invalid("mpnn batch needs one target per sample"));
        }
        let d = self.config.hidden;
        let inv_b = 1.0 / samples.len() as f64;
        let mut grads = self.zeros_like();
        let mut logits = Vec::with_capacity(samples.len());
        for (sample, &t) in samples.iter().zip(targets) {
            let (z, states) = self.run(sample);
            if !z.is_finite() {
                return Err(Error::numeric("mpnn readout", "non-finite logit"));
            }
            logits.push(z);
            let dz = match kind {
                LossKind::Bce => (1.0 / (1.0 + (-z).exp()) - t) * inv_b,
                LossKind::Mse => 2.0 * (z - t) * inv_b,
            };
            let a = Self::adjacency(sample);
            let h = states.last().expect("state");
            grads.out_b[[0, 0]] += dz;
            let mut dh = Array2::<f64>::zeros(h.dim());
            for j in 0..d {
                let (hu, hv) = (h[[0, j]], h[[1, j]]);
                grads.out_w[[j, 0]] += dz * hu * hv;
                grads.out_w[[d + j, 0]] += dz * (hu + hv);
                dh[[0, j]] += dz * (self.out_w[[j, 0]] * hv + self.out_w[[d + j, 0]]);
                dh[[1, j]] += dz * (self.out_w[[j, 0]] * hu + self.out_w[[d + j, 0]]);
            }
            for (k, l) in self.layers.iter().enumerate().rev() {
                let out = &states[k + 1];
                let input = &states[k];
                let du = dh * &out.mapv(|y| 1.0 - y * y);
                let agg = a.dot(input);
                let gl = &mut grads.layers[k];
                gl.w_self += &input.t().dot(&du);
                gl.w_nbr += &agg.t().dot(&du);
                gl.b += &du.sum_axis(Axis(0)).insert_axis(Axis(0));
                dh = du.dot(&l.w_self.t()) + a.t().dot(&du.dot(&l.w_nbr.t()));
            }
            grads.h0 += &dh.sum_axis(Axis(0)).insert_axis(Axis(0));
        }
        let loss = match kind {
            LossKind::Bce => crate::model::bce_loss(&logits, targets)?,
            LossKind::Mse => crate::model::mse_loss(&logits, targets)?,
        };
        let named = grads.named_mut().into_iter().map(|(n, t)| (n, t.clone())).collect();
        Ok((loss, named))
    }
}
