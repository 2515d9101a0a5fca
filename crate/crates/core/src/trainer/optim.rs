use std::collections::HashMap;

use ndarray::Array2;

/// Adam with decoupled weight decay. Decay applies to every trainable
/// tensor: `theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)`.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: HashMap<String, (Array2<f64>, Array2<f64>)>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: HashMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. Parameters without a matching gradient entry are treated
    /// as having zero gradient.
    pub fn step(&mut self, params: Vec<(String, &mut Array2<f64>)>, grads: &[(String, Array2<f64>)]) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - self.lr * self.weight_decay;
        let by_name: HashMap<&str, &Array2<f64>> = grads.iter().map(|(n, g)| (n.as_str(), g)).collect();
        for (name, theta) in params {
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (Array2::zeros(theta.dim()), Array2::zeros(theta.dim())));
            if let Some(g) = by_name.get(name.as_str()) {
                ndarray::Zip::from(&mut *m).and(*g).for_each(|m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
                ndarray::Zip::from(&mut *v)
                    .and(*g)
                    .for_each(|v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            } else {
                m.mapv_inplace(|x| self.beta1 * x);
                v.mapv_inplace(|x| self.beta2 * x);
            }
            let (lr, eps) = (self.lr, self.eps);
            ndarray::Zip::from(theta).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p = *p * decay - lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            });
        }
    }
}
