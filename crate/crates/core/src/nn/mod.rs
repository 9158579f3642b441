//! Minimal dense neural-network engine: MLP forward/backward, Adam, losses,
//! and the autoencoder used for cross-env distance tables.
//!
//! The engine is deliberately small: dense layers, ReLU/Identity activations,
//! reverse-mode gradients driven by an explicit output-gradient hook. Training
//! loops are single-threaded over batches so a fixed seed is bit-reproducible.

mod adam;
mod autoencoder;
mod checkpoint;
pub mod gradcheck;
mod loss;

pub use adam::AdamState;
pub use autoencoder::{train_autoencoder, train_autoencoder_arch, AeOutcome, TrainConfig};
pub use checkpoint::{load_model, read_model, save_model, write_model};
pub use loss::{bce_with_logits, mse, sigmoid, with_output_grad};

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng::RngHandle;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::ReLU => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation.
    #[inline]
    fn deriv(self, pre: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Activation::ReLU => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_token(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::ReLU),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Parse(format!("unknown activation {other:?}"))),
        }
    }
}

/// One dense layer; `weights` is `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Parameters of a multilayer perceptron.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

/// Gradient (or any other parameter-shaped block) of an MLP.
#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

/// Per-layer activations kept around for the backward pass.
/// `post[0]` is the input batch; `post[l + 1]` / `pre[l]` belong to layer `l`.
pub struct ForwardCache {
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("cache of a zero-layer net")
    }
}

impl MlpParams {
    /// He-style random initialization. `dims` chains layer sizes
    /// (`dims.len() == activations.len() + 1`).
    pub fn random(dims: &[usize], activations: &[Activation], rng: &RngHandle) -> Self {
        assert_eq!(dims.len(), activations.len() + 1, "dims must chain activations");
        assert!(dims.iter().all(|&d| d > 0), "layer dims must be positive");
        let mut r = rng.rng();
        let normal = StandardNormal;
        let layers = activations
            .iter()
            .enumerate()
            .map(|(l, &activation)| {
                let (fan_in, fan_out) = (dims[l], dims[l + 1]);
                let std = match activation {
                    Activation::ReLU => (2.0 / fan_in as f64).sqrt(),
                    Activation::Identity => (1.0 / fan_in as f64).sqrt(),
                };
                let weights = Array2::from_shape_fn((fan_out, fan_in), |_| {
                    let z: f64 = normal.sample(&mut r);
                    z * std
                });
                DenseLayer { weights, bias: Array1::zeros(fan_out), activation }
            })
            .collect();
        MlpParams { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Row-aligned forward pass.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for layer in &self.layers {
            let mut z = a.dot(&layer.weights.t());
            z += &layer.bias;
            z.mapv_inplace(|v| layer.activation.apply(v));
            a = z;
        }
        Ok(a)
    }

    /// Forward pass that keeps per-layer activations. Fails with the
    /// offending layer index if any activation goes non-finite.
    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(x.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = post[l].dot(&layer.weights.t());
            z += &layer.bias;
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("layer {l} produced a non-finite value")));
            }
            let a = z.mapv(|v| layer.activation.apply(v));
            pre.push(z);
            post.push(a);
        }
        Ok(ForwardCache { pre, post })
    }

    /// Reverse pass from `d loss / d output`; returns parameter gradients.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &Array2<f64>) -> MlpGrads {
        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = self
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weights.dim()), Array1::zeros(l.bias.len())))
            .collect();
        let mut g = output_grad.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let mut dz = g;
            dz.zip_mut_with(&cache.pre[l], |gv, &pre| *gv *= layer.activation.deriv(pre));
            grads[l].0 = dz.t().dot(&cache.post[l]);
            grads[l].1 = dz.sum_axis(ndarray::Axis(0));
            if l > 0 {
                g = dz.dot(&layer.weights);
            } else {
                g = dz; // consumed; keeps the borrow checker happy
            }
        }
        MlpGrads { layers: grads }
    }

    /// Alias of `forward` that packages the result as a validated
    /// [`EmbeddingMatrix`].
    pub fn encode(&self, x: ArrayView2<f64>) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::new(self.forward(x)?)
    }

    /// Split into a front network of `n_front` layers and the remainder.
    pub fn split_at(mut self, n_front: usize) -> (MlpParams, MlpParams) {
        assert!(n_front <= self.layers.len());
        let back = self.layers.split_off(n_front);
        (MlpParams { layers: self.layers }, MlpParams { layers: back })
    }

    /// Concatenate two networks (output dim of `self` must feed `back`).
    pub fn join(mut self, mut back: MlpParams) -> MlpParams {
        if let (Some(last), Some(first)) = (self.layers.last(), back.layers.first()) {
            assert_eq!(last.out_dim(), first.in_dim(), "joined networks must chain");
        }
        self.layers.append(&mut back.layers);
        self
    }

    pub fn check_finite(&self) -> Result<()> {
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weights.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("layer {l} parameters are non-finite")));
            }
        }
        Ok(())
    }
}

impl MlpGrads {
    pub fn zeros_like(p: &MlpParams) -> Self {
        MlpGrads {
            layers: p
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &MlpGrads, scale: f64) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.zip_mut_with(ow, |x, &y| *x += scale * y);
            b.zip_mut_with(ob, |x, &y| *x += scale * y);
        }
    }
}

/// Deterministic shuffled minibatch index sets for one epoch.
pub(crate) fn shuffled_batches(n: usize, batch_size: usize, rng: &RngHandle) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng.rng());
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

pub(crate) fn take_rows(x: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), x.ncols()));
    for (row, &i) in idx.iter().enumerate() {
        out.row_mut(row).assign(&x.row(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn zero_net_maps_to_zero() {
        let mut p = MlpParams::random(&[3, 2], &[Activation::ReLU], &RngHandle::new(0));
        p.layers[0].weights.fill(0.0);
        p.layers[0].bias.fill(0.0);
        let x = array![[1.0, -2.0, 3.0], [0.5, 0.0, -1.0]];
        let y = p.forward(x.view()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_through() {
        let p = MlpParams {
            layers: vec![DenseLayer {
                weights: Array2::eye(3),
                bias: Array1::zeros(3),
                activation: Activation::Identity,
            }],
        };
        let x = array![[1.0, -2.0, 3.0]];
        assert_eq!(p.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn relu_clamps_negative_preactivation() {
        let p = MlpParams {
            layers: vec![DenseLayer {
                weights: array![[2.0]],
                bias: array![1.0],
                activation: Activation::ReLU,
            }],
        };
        let y = p.forward(array![[-3.0]].view()).unwrap();
        assert_eq!(y, array![[0.0]]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = MlpParams::random(&[4, 2], &[Activation::ReLU], &RngHandle::new(1));
        let x = Array2::<f64>::zeros((5, 3));
        assert!(matches!(p.forward(x.view()), Err(Error::Shape(_))));
    }

    #[test]
    fn split_and_join_roundtrip() {
        let p = MlpParams::random(
            &[4, 8, 8, 2],
            &[Activation::ReLU, Activation::ReLU, Activation::Identity],
            &RngHandle::new(2),
        );
        let q = p.clone();
        let (front, back) = p.split_at(2);
        assert_eq!(front.output_dim(), 8);
        assert_eq!(back.input_dim(), 8);
        assert_eq!(front.join(back), q);
    }

    #[test]
    fn init_is_seed_deterministic() {
        let dims = [5, 7, 3];
        let acts = [Activation::ReLU, Activation::Identity];
        let a = MlpParams::random(&dims, &acts, &RngHandle::new(9));
        let b = MlpParams::random(&dims, &acts, &RngHandle::new(9));
        let c = MlpParams::random(&dims, &acts, &RngHandle::new(10));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn forward_cached_flags_offending_layer() {
        let mut p = MlpParams::random(&[2, 2, 2], &[Activation::ReLU, Activation::ReLU], &RngHandle::new(3));
        p.layers[1].weights.fill(f64::NAN);
        let x = array![[1.0, 1.0]];
        match p.forward_cached(x.view()) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("layer 1"), "{msg}"),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn backward_matches_manual_single_layer() {
        // y = relu(w x + b), L = y (output grad 1): dL/dw = x when pre > 0.
        let p = MlpParams {
            layers: vec![DenseLayer {
                weights: array![[0.5]],
                bias: array![0.2],
                activation: Activation::ReLU,
            }],
        };
        let x = array![[3.0]];
        let cache = p.forward_cached(x.view()).unwrap();
        let g = p.backward(&cache, &array![[1.0]]);
        assert_abs_diff_eq!(g.layers[0].0[[0, 0]], 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.layers[0].1[0], 1.0, epsilon = 1e-15);
    }
}
