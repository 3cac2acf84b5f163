use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::DEFAULT_SAMPLE_RATE;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Negative-side slope of the hidden-layer leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct VaeHyperParams {
    pub window_size: usize,
    pub latent_dim: usize,
    pub hidden_sizes: Vec<usize>,
    /// KL weight.
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for VaeHyperParams {
    fn default() -> Self {
        Self {
            window_size: 1024,
            latent_dim: 256,
            hidden_sizes: vec![512],
            alpha: 1e-4,
            learning_rate: 1e-4,
            epochs: 500,
            batch_size: 128,
            sample_rate: DEFAULT_SAMPLE_RATE,
            seed: 0,
        }
    }
}

impl VaeHyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.window_size == 0 {
            return bad("window_size must be >= 1");
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be >= 1");
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return bad("hidden sizes must be >= 1");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and >= 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be > 0");
        }
        Ok(())
    }

    /// `(out, in)` shape of every layer in parameter order: encoder hidden layers,
    /// mean head, log-variance head, decoder hidden layers, decoder output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(2 * self.hidden_sizes.len() + 3);
        let mut fan_in = self.window_size;
        for &h in &self.hidden_sizes {
            shapes.push((h, fan_in));
            fan_in = h;
        }
        shapes.push((self.latent_dim, fan_in));
        shapes.push((self.latent_dim, fan_in));
        let mut fan_in = self.latent_dim;
        for &h in self.hidden_sizes.iter().rev() {
            shapes.push((h, fan_in));
            fan_in = h;
        }
        shapes.push((self.window_size, fan_in));
        shapes
    }
}

/// Affine layer `y = x W^T + b` with `W` stored `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Self {
            weight: Array2::zeros((out, inp)),
            bias: Array1::zeros(out),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    /// Applies the layer to a batch (one row per example).
    pub fn forward(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        x.dot(&self.weight.t()) + &self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Dense<U> {
        Dense {
            weight: self.weight.mapv(|v| U::of(v.as_f64())),
            bias: self.bias.mapv(|v| U::of(v.as_f64())),
        }
    }
}

#[inline]
pub(crate) fn leaky_relu<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        v * T::of(LEAKY_SLOPE)
    }
}

#[inline]
pub(crate) fn leaky_relu_grad<T: Scalar>(pre: T) -> T {
    if pre > T::zero() {
        T::one()
    } else {
        T::of(LEAKY_SLOPE)
    }
}

/// Posterior parameters for one window: mean and natural-log variance.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStats<T> {
    pub mu: Vec<T>,
    pub logvar: Vec<T>,
}

impl<T: Scalar> LatentStats<T> {
    pub fn new(mu: Vec<T>, logvar: Vec<T>) -> Result<Self> {
        if mu.len() != logvar.len() {
            return Err(Error::ShapeMismatch {
                what: "logvar",
                expected: mu.len(),
                got: logvar.len(),
            });
        }
        Ok(Self { mu, logvar })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Standard deviation `exp(logvar / 2)` per dimension.
    pub fn sigma(&self) -> Vec<T> {
        self.logvar.iter().map(|&lv| (lv * T::of(0.5)).exp()).collect()
    }
}

/// Dense variational autoencoder over raw audio windows.
///
/// Encoder: `window -> hidden... -> (mu, logvar)` with leaky-rectified hidden
/// layers and linear heads. Decoder mirrors the hidden stack and ends in `tanh`,
/// so every output sample lies in `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vae<T> {
    hyper: VaeHyperParams,
    layers: Vec<Dense<T>>,
}

impl<T: Scalar> Vae<T> {
    /// Fan-in scaled uniform initialization seeded from `hyper.seed`.
    pub fn new(hyper: VaeHyperParams) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        Self::with_rng(hyper, &mut rng)
    }

    /// Weights drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero.
    pub fn with_rng<R: Rng + ?Sized>(hyper: VaeHyperParams, rng: &mut R) -> Result<Self> {
        hyper.validate()?;
        let layers = hyper
            .layer_shapes()
            .into_iter()
            .map(|(out, inp)| {
                let bound = 1.0 / (inp as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((out, inp), || {
                    T::of(rng.random_range(-bound..bound))
                });
                Dense {
                    weight,
                    bias: Array1::zeros(out),
                }
            })
            .collect();
        Ok(Self { hyper, layers })
    }

    /// All weights and biases zero.
    pub fn zeros(hyper: VaeHyperParams) -> Result<Self> {
        hyper.validate()?;
        let layers = hyper
            .layer_shapes()
            .into_iter()
            .map(|(o, i)| Dense::zeros(o, i))
            .collect();
        Ok(Self { hyper, layers })
    }

    /// Builds a model from explicit layers; shapes must match `hyper`.
    pub fn from_layers(hyper: VaeHyperParams, layers: Vec<Dense<T>>) -> Result<Self> {
        hyper.validate()?;
        let shapes = hyper.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::ShapeMismatch {
                what: "layer count",
                expected: shapes.len(),
                got: layers.len(),
            });
        }
        for ((out, inp), l) in shapes.iter().zip(&layers) {
            if l.weight.dim() != (*out, *inp) || l.bias.len() != *out {
                return Err(Error::ShapeMismatch {
                    what: "layer weights",
                    expected: out * inp,
                    got: l.weight.len(),
                });
            }
        }
        Ok(Self { hyper, layers })
    }

    pub fn hyper(&self) -> &VaeHyperParams {
        &self.hyper
    }

    pub fn window_size(&self) -> usize {
        self.hyper.window_size
    }

    pub fn latent_dim(&self) -> usize {
        self.hyper.latent_dim
    }

    pub fn sample_rate(&self) -> u32 {
        self.hyper.sample_rate
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    pub fn cast<U: Scalar>(&self) -> Vae<U> {
        Vae {
            hyper: self.hyper.clone(),
            layers: self.layers.iter().map(Dense::cast).collect(),
        }
    }

    pub(crate) fn n_hidden(&self) -> usize {
        self.hyper.hidden_sizes.len()
    }

    pub(crate) fn encoder_hidden(&self) -> &[Dense<T>] {
        &self.layers[..self.n_hidden()]
    }

    pub(crate) fn mu_head(&self) -> &Dense<T> {
        &self.layers[self.n_hidden()]
    }

    pub(crate) fn logvar_head(&self) -> &Dense<T> {
        &self.layers[self.n_hidden() + 1]
    }

    /// Decoder hidden layers followed by the output layer.
    pub(crate) fn decoder(&self) -> &[Dense<T>] {
        &self.layers[self.n_hidden() + 2..]
    }

    fn check_cols(&self, what: &'static str, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(Error::ShapeMismatch { what, expected, got });
        }
        Ok(())
    }

    /// Encodes a batch of windows (one per row) into `(mu, logvar)` matrices.
    pub fn encode_batch(&self, x: ArrayView2<'_, T>) -> Result<(Array2<T>, Array2<T>)> {
        self.check_cols("encoder input", x.ncols(), self.hyper.window_size)?;
        let mut h = x.to_owned();
        for layer in self.encoder_hidden() {
            h = layer.forward(h.view()).mapv_into(leaky_relu);
        }
        Ok((self.mu_head().forward(h.view()), self.logvar_head().forward(h.view())))
    }

    /// Decodes a batch of latent vectors (one per row) into windows.
    pub fn decode_batch(&self, z: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_cols("decoder input", z.ncols(), self.hyper.latent_dim)?;
        let dec = self.decoder();
        let (hidden, output) = dec.split_at(dec.len() - 1);
        let mut h = z.to_owned();
        for layer in hidden {
            h = layer.forward(h.view()).mapv_into(leaky_relu);
        }
        Ok(output[0].forward(h.view()).mapv_into(|v| v.tanh()))
    }

    pub fn encoder_forward(&self, x: &[T]) -> Result<LatentStats<T>> {
        self.check_cols("encoder input", x.len(), self.hyper.window_size)?;
        let row = ArrayView1::from(x).insert_axis(Axis(0));
        let (mu, lv) = self.encode_batch(row)?;
        Ok(LatentStats {
            mu: mu.row(0).to_vec(),
            logvar: lv.row(0).to_vec(),
        })
    }

    pub fn decoder_forward(&self, z: &[T]) -> Result<Vec<T>> {
        self.check_cols("decoder input", z.len(), self.hyper.latent_dim)?;
        let row = ArrayView1::from(z).insert_axis(Axis(0));
        Ok(self.decode_batch(row)?.row(0).to_vec())
    }
}
