use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{EncoderConfig, InitScheme};
use crate::error::{Error, Result};

/// One encoder layer. Biases and norm parameters are `1 x n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Array2<f64>,
    pub ln1_b: Array2<f64>,
    pub wq: Array2<f64>,
    pub bq: Array2<f64>,
    pub wk: Array2<f64>,
    pub bk: Array2<f64>,
    pub wv: Array2<f64>,
    pub bv: Array2<f64>,
    pub wo: Array2<f64>,
    pub bo: Array2<f64>,
    pub ln2_g: Array2<f64>,
    pub ln2_b: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
    /// Post-propagation projection `P_k`, `d x d`.
    pub p: Array2<f64>,
}

macro_rules! layer_fields {
    ($m:ident, $self:ident, $($f:ident),*) => {
        vec![$((stringify!($f), $m!($self.$f))),*]
    };
}

macro_rules! by_ref {
    ($e:expr) => {
        &$e
    };
}

macro_rules! by_mut {
    ($e:expr) => {
        &mut $e
    };
}

impl LayerParams {
    fn fields(&self) -> Vec<(&'static str, &Array2<f64>)> {
        layer_fields!(by_ref, self, ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2, p)
    }

    fn fields_mut(&mut self) -> Vec<(&'static str, &mut Array2<f64>)> {
        layer_fields!(by_mut, self, ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2, p)
    }

    fn zeros(d: usize, m: usize) -> LayerParams {
        let z = Array2::zeros;
        LayerParams {
            ln1_g: z((1, d)),
            ln1_b: z((1, d)),
            wq: z((d, d)),
            bq: z((1, d)),
            wk: z((d, d)),
            bk: z((1, d)),
            wv: z((d, d)),
            bv: z((1, d)),
            wo: z((d, d)),
            bo: z((1, d)),
            ln2_g: z((1, d)),
            ln2_b: z((1, d)),
            w1: z((d, m)),
            b1: z((1, m)),
            w2: z((m, d)),
            b2: z((1, d)),
            p: z((d, d)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: EncoderConfig,
    /// Input projection, `(2 n_max + 2) x d`.
    pub w0: Array2<f64>,
    /// Feature encoder `f x d` and bias, present when features are used.
    pub feat_w: Option<Array2<f64>>,
    pub feat_b: Option<Array2<f64>>,
    pub layers: Vec<LayerParams>,
    /// Readout over `[h_src | h_dst]`, `2d x 1`.
    pub out_w: Array2<f64>,
    pub out_b: Array2<f64>,
}

/// Gradients shaped like [`ModelParams`]; `w0` is absent when the input
/// projection is frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w0: Option<Array2<f64>>,
    pub feat_w: Option<Array2<f64>>,
    pub feat_b: Option<Array2<f64>>,
    pub layers: Vec<LayerParams>,
    pub out_w: Array2<f64>,
    pub out_b: Array2<f64>,
}

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, mean: f64, std: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || mean + std * rng.sample::<f64, _>(StandardNormal))
}

/// Gaussian rows orthonormalized in consecutive chunks of `cols` rows, so any
/// `min(rows, cols)` leading rows are orthonormal.
pub fn orthonormal_rows<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let mut m = gaussian(rows, cols, 0.0, 1.0, rng);
    for start in (0..rows).step_by(cols) {
        let end = (start + cols).min(rows);
        for i in start..end {
            loop {
                for j in start..i {
                    let proj = m.row(i).dot(&m.row(j));
                    let rj = m.row(j).to_owned();
                    m.row_mut(i).scaled_add(-proj, &rj);
                }
                let norm = m.row(i).dot(&m.row(i)).sqrt();
                if norm > 1e-6 {
                    m.row_mut(i).mapv_inplace(|x| x / norm);
                    break;
                }
                let fresh = gaussian(1, cols, 0.0, 1.0, rng);
                m.row_mut(i).assign(&fresh.row(0));
            }
        }
    }
    m
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(config: &EncoderConfig, rng: &mut R) -> Result<ModelParams> {
        config.validate()?;
        let d = config.hidden;
        let m = config.intermediate;
        let input = config.input_dim();
        let std_d = 1.0 / (d as f64).sqrt();
        let w0 = match config.init_scheme {
            InitScheme::Orthogonal => orthonormal_rows(input, d, rng),
            InitScheme::MeanShiftedGaussian { mean } => gaussian(input, d, mean, std_d, rng),
            InitScheme::LowRank { rank } => {
                let a = gaussian(input, rank, 0.0, 1.0 / (rank as f64).sqrt(), rng);
                let b = gaussian(rank, d, 0.0, std_d, rng);
                a.dot(&b)
            }
        };
        let (feat_w, feat_b) = if config.use_features {
            let f = config.feature_dim;
            (
                Some(gaussian(f, d, 0.0, 1.0 / (f as f64).sqrt(), rng)),
                Some(Array2::zeros((1, d))),
            )
        } else {
            (None, None)
        };
        let mut layers = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            let mut l = LayerParams::zeros(d, m);
            l.ln1_g.fill(1.0);
            l.ln2_g.fill(1.0);
            l.wq = gaussian(d, d, 0.0, std_d, rng);
            l.wk = gaussian(d, d, 0.0, std_d, rng);
            l.wv = gaussian(d, d, 0.0, std_d, rng);
            l.wo = gaussian(d, d, 0.0, std_d, rng);
            l.w1 = gaussian(d, m, 0.0, std_d, rng);
            l.w2 = gaussian(m, d, 0.0, 1.0 / (m as f64).sqrt(), rng);
            if config.propagation_residual {
                l.p = gaussian(d, d, 0.0, std_d, rng);
            }
            layers.push(l);
        }
        let out_w = gaussian(2 * d, 1, 0.0, 1.0 / ((2 * d) as f64).sqrt(), rng);
        Ok(ModelParams {
            config: config.clone(),
            w0,
            feat_w,
            feat_b,
            layers,
            out_w,
            out_b: Array2::zeros((1, 1)),
        })
    }

    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: &EncoderConfig) -> Result<ModelParams> {
        config.validate()?;
        let d = config.hidden;
        let f = config.feature_dim;
        Ok(ModelParams {
            config: config.clone(),
            w0: Array2::zeros((config.input_dim(), d)),
            feat_w: config.use_features.then(|| Array2::zeros((f, d))),
            feat_b: config.use_features.then(|| Array2::zeros((1, d))),
            layers: (0..config.layers).map(|_| LayerParams::zeros(d, config.intermediate)).collect(),
            out_w: Array2::zeros((2 * d, 1)),
            out_b: Array2::zeros((1, 1)),
        })
    }

    /// All tensors by stable name, e.g. `w0`, `layers.1.wq`, `out.b`.
    pub fn named(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![("w0".to_string(), &self.w0)];
        if let (Some(w), Some(b)) = (&self.feat_w, &self.feat_b) {
            out.push(("feat.w".into(), w));
            out.push(("feat.b".into(), b));
        }
        for (k, l) in self.layers.iter().enumerate() {
            out.extend(l.fields().into_iter().map(|(n, t)| (format!("layers.{k}.{n}"), t)));
        }
        out.push(("out.w".into(), &self.out_w));
        out.push(("out.b".into(), &self.out_b));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = vec![("w0".to_string(), &mut self.w0)];
        if let (Some(w), Some(b)) = (&mut self.feat_w, &mut self.feat_b) {
            out.push(("feat.w".into(), w));
            out.push(("feat.b".into(), b));
        }
        for (k, l) in self.layers.iter_mut().enumerate() {
            out.extend(l.fields_mut().into_iter().map(|(n, t)| (format!("layers.{k}.{n}"), t)));
        }
        out.push(("out.w".into(), &mut self.out_w));
        out.push(("out.b".into(), &mut self.out_b));
        out
    }

    /// Tensors the optimizer updates.
    pub fn trainable_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let frozen_w0 = self.config.freeze_input_projection;
        let fixed_p = !self.config.propagation_residual;
        self.named_mut()
            .into_iter()
            .filter(|(n, _)| !(frozen_w0 && n == "w0") && !(fixed_p && n.ends_with(".p")))
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in self.named() {
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::numeric(name, "non-finite parameter"));
            }
        }
        Ok(())
    }

    pub fn zero_grads(&self) -> Gradients {
        let d = self.config.hidden;
        let m = self.config.intermediate;
        Gradients {
            w0: (!self.config.freeze_input_projection).then(|| Array2::zeros(self.w0.dim())),
            feat_w: self.feat_w.as_ref().map(|w| Array2::zeros(w.dim())),
            feat_b: self.feat_b.as_ref().map(|b| Array2::zeros(b.dim())),
            layers: (0..self.layers.len()).map(|_| LayerParams::zeros(d, m)).collect(),
            out_w: Array2::zeros(self.out_w.dim()),
            out_b: Array2::zeros((1, 1)),
        }
    }
}

impl Gradients {
    /// Present tensors with the same names as [`ModelParams::named`].
    pub fn named(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = Vec::new();
        if let Some(w0) = &self.w0 {
            out.push(("w0".to_string(), w0));
        }
        if let (Some(w), Some(b)) = (&self.feat_w, &self.feat_b) {
            out.push(("feat.w".into(), w));
            out.push(("feat.b".into(), b));
        }
        for (k, l) in self.layers.iter().enumerate() {
            out.extend(l.fields().into_iter().map(|(n, t)| (format!("layers.{k}.{n}"), t)));
        }
        out.push(("out.w".into(), &self.out_w));
        out.push(("out.b".into(), &self.out_b));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = Vec::new();
        if let Some(w0) = &mut self.w0 {
            out.push(("w0".to_string(), w0));
        }
        if let (Some(w), Some(b)) = (&mut self.feat_w, &mut self.feat_b) {
            out.push(("feat.w".into(), w));
            out.push(("feat.b".into(), b));
        }
        for (k, l) in self.layers.iter_mut().enumerate() {
            out.extend(l.fields_mut().into_iter().map(|(n, t)| (format!("layers.{k}.{n}"), t)));
        }
        out.push(("out.w".into(), &mut self.out_w));
        out.push(("out.b".into(), &mut self.out_b));
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((_, a), (_, b)) in self.named_mut().into_iter().zip(other.named()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, a) in self.named_mut() {
            a.mapv_inplace(|x| x * factor);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};

    fn cfg(scheme: InitScheme) -> EncoderConfig {
        EncoderConfig {
            hidden: 32,
            intermediate: 48,
            layers: 2,
            heads: 4,
            n_max: 7,
            init_scheme: scheme,
            ..Default::default()
        }
    }

    #[test]
    fn orthogonal_rows_when_wide_enough() {
        let p = ModelParams::init(&cfg(InitScheme::Orthogonal), &mut rng::stream(1, Stream::Init)).unwrap();
        let gram = p.w0.dot(&p.w0.t());
        for i in 0..16 {
            for j in 0..16 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn orthogonal_chunks_when_narrow() {
        let mut c = cfg(InitScheme::Orthogonal);
        c.hidden = 8;
        c.heads = 2;
        let p = ModelParams::init(&c, &mut rng::stream(2, Stream::Init)).unwrap();
        let gram = p.w0.slice(ndarray::s![0..8, ..]).dot(&p.w0.slice(ndarray::s![0..8, ..]).t());
        for i in 0..8 {
            assert!((gram[[i, i]] - 1.0).abs() < 1e-9);
            for j in 0..i {
                assert!(gram[[i, j]].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mean_shifted_mean() {
        let mut c = cfg(InitScheme::MeanShiftedGaussian { mean: 0.1 });
        c.n_max = 60;
        c.hidden = 64;
        let p = ModelParams::init(&c, &mut rng::stream(3, Stream::Init)).unwrap();
        let count = p.w0.len() as f64;
        let mean = p.w0.sum() / count;
        let sigma = 1.0 / 8.0;
        assert!((mean - 0.1).abs() <= 3.0 * sigma / count.sqrt(), "mean {mean}");
    }

    #[test]
    fn names_align_between_params_and_grads() {
        let mut c = cfg(InitScheme::Orthogonal);
        c.use_features = true;
        c.feature_dim = 3;
        let p = ModelParams::init(&c, &mut rng::stream(4, Stream::Init)).unwrap();
        let g = p.zero_grads();
        let pn: Vec<String> = p.named().into_iter().map(|(n, _)| n).collect();
        let gn: Vec<String> = g.named().into_iter().map(|(n, _)| n).collect();
        assert_eq!(pn, gn);
        for ((_, a), (_, b)) in p.named().into_iter().zip(g.named()) {
            assert_eq!(a.dim(), b.dim());
        }
        c.freeze_input_projection = true;
        let p = ModelParams::init(&c, &mut rng::stream(4, Stream::Init)).unwrap();
        assert!(p.zero_grads().w0.is_none());
        assert_eq!(p.clone().trainable_mut().len(), p.named().len() - 1);
    }
}
