//! Batched forward pass with activation trace and its exact reverse-mode gradient.

use ndarray::{Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vae::loss::{kl_term, LossParts};
use crate::vae::model::{leaky_relu, leaky_relu_grad, Dense, Vae};

/// One gradient tensor pair per model layer, in [`Vae::layers`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &Vae<T>) -> Self {
        Self {
            layers: model
                .layers()
                .iter()
                .map(|l| Dense::zeros(l.out_dim(), l.in_dim()))
                .collect(),
        }
    }

    /// Flat view of the gradient for parameter `index` in [`param_at`] order.
    pub fn get(&self, index: usize) -> T {
        let (layer, is_bias, off) = locate(&self.layers, index);
        let d = &self.layers[layer];
        if is_bias {
            d.bias[off]
        } else {
            d.weight.as_slice().expect("standard layout")[off]
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    pub fn scale(&mut self, factor: T) {
        for l in &mut self.layers {
            l.weight.mapv_inplace(|v| v * factor);
            l.bias.mapv_inplace(|v| v * factor);
        }
    }
}

/// Maps a flat parameter index to `(layer, is_bias, offset)`.
/// Within a layer the weight (row-major) precedes the bias.
fn locate<T>(layers: &[Dense<T>], mut index: usize) -> (usize, bool, usize) {
    for (li, l) in layers.iter().enumerate() {
        let nw = l.weight.len();
        if index < nw {
            return (li, false, index);
        }
        index -= nw;
        if index < l.bias.len() {
            return (li, true, index);
        }
        index -= l.bias.len();
    }
    panic!("parameter index out of range");
}

/// Mutable access to a flat parameter of the model.
pub fn param_at<T: Scalar>(model: &mut Vae<T>, index: usize) -> &mut T {
    let (layer, is_bias, off) = locate(model.layers(), index);
    let d = &mut model.layers_mut()[layer];
    if is_bias {
        &mut d.bias[off]
    } else {
        &mut d.weight.as_slice_mut().expect("standard layout")[off]
    }
}

struct Trace<T> {
    /// Input to every layer, in layer order (heads share one input).
    inputs: Vec<Array2<T>>,
    /// Pre-activation of each hidden layer (encoder then decoder), keyed by layer index.
    pre: Vec<Option<Array2<T>>>,
    mu: Array2<T>,
    logvar: Array2<T>,
    sigma: Array2<T>,
    out: Array2<T>,
}

fn check_batch<T: Scalar>(model: &Vae<T>, x: &ArrayView2<'_, T>, eps: &ArrayView2<'_, T>) -> Result<()> {
    if x.ncols() != model.window_size() {
        return Err(Error::ShapeMismatch {
            what: "batch window",
            expected: model.window_size(),
            got: x.ncols(),
        });
    }
    if eps.dim() != (x.nrows(), model.latent_dim()) {
        return Err(Error::ShapeMismatch {
            what: "eps batch",
            expected: x.nrows() * model.latent_dim(),
            got: eps.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

fn forward_trace<T: Scalar>(model: &Vae<T>, x: ArrayView2<'_, T>, eps: ArrayView2<'_, T>) -> Trace<T> {
    let layers = model.layers();
    let k = model.n_hidden();
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = vec![None; layers.len()];

    let mut h = x.to_owned();
    for (li, layer) in layers[..k].iter().enumerate() {
        let p = layer.forward(h.view());
        let a = p.mapv(leaky_relu);
        inputs.push(h);
        pre[li] = Some(p);
        h = a;
    }
    let mu = layers[k].forward(h.view());
    let logvar = layers[k + 1].forward(h.view());
    inputs.push(h.clone());
    inputs.push(h);

    let sigma = logvar.mapv(|lv| (lv * T::of(0.5)).exp());
    let z = &mu + &(&sigma * &eps);

    let mut h = z;
    let last = layers.len() - 1;
    for li in k + 2..last {
        let p = layers[li].forward(h.view());
        let a = p.mapv(leaky_relu);
        inputs.push(h);
        pre[li] = Some(p);
        h = a;
    }
    let out = layers[last].forward(h.view()).mapv_into(|v| v.tanh());
    inputs.push(h);

    Trace {
        inputs,
        pre,
        mu,
        logvar,
        sigma,
        out,
    }
}

fn batch_parts<T: Scalar>(x: ArrayView2<'_, T>, t: &Trace<T>, alpha: T) -> LossParts<T> {
    let b = T::of(x.nrows() as f64);
    let n = T::of(x.ncols() as f64);
    let sse: T = Zip::from(&t.out)
        .and(&x)
        .fold(T::zero(), |acc, &o, &v| acc + (o - v) * (o - v));
    let recon = sse / (n * b);
    let kl: T = Zip::from(&t.mu)
        .and(&t.logvar)
        .fold(T::zero(), |acc, &m, &lv| acc + kl_term(m, lv))
        / b;
    LossParts {
        total: recon + alpha * kl,
        recon,
        kl,
    }
}

/// Mean loss over a batch of windows with fixed noise `eps`.
pub fn batch_loss<T: Scalar>(model: &Vae<T>, x: ArrayView2<'_, T>, eps: ArrayView2<'_, T>) -> Result<LossParts<T>> {
    check_batch(model, &x, &eps)?;
    let t = forward_trace(model, x.view(), eps.view());
    Ok(batch_parts(x, &t, T::of(model.hyper().alpha)))
}

/// Accumulates `g_pre^T . input` and the row sum into a layer's gradient.
fn layer_grads<T: Scalar>(g_pre: &Array2<T>, input: &Array2<T>) -> Dense<T> {
    Dense {
        weight: g_pre.t().dot(input),
        bias: g_pre.sum_axis(Axis(0)),
    }
}

/// Gradient of the mean batch loss with respect to every weight and bias,
/// holding `eps` fixed. Also returns the loss evaluated on the way.
pub fn backward<T: Scalar>(
    model: &Vae<T>,
    x: ArrayView2<'_, T>,
    eps: ArrayView2<'_, T>,
) -> Result<(Gradients<T>, LossParts<T>)> {
    check_batch(model, &x, &eps)?;
    let alpha = T::of(model.hyper().alpha);
    let t = forward_trace(model, x.view(), eps.view());
    let parts = batch_parts(x.view(), &t, alpha);

    let layers = model.layers();
    let k = model.n_hidden();
    let last = layers.len() - 1;
    let b = T::of(x.nrows() as f64);
    let n = T::of(x.ncols() as f64);
    let mut grads: Vec<Option<Dense<T>>> = vec![None; layers.len()];

    // d(recon)/d(out), through tanh.
    let scale = T::of(2.0) / (n * b);
    let mut g = Zip::from(&t.out)
        .and(&x)
        .map_collect(|&o, &v| scale * (o - v) * (T::one() - o * o));

    for li in (k + 2..=last).rev() {
        grads[li] = Some(layer_grads(&g, &t.inputs[li]));
        let mut g_in = g.dot(&layers[li].weight);
        if li > k + 2 {
            let p = t.pre[li - 1].as_ref().expect("decoder hidden pre-activation");
            Zip::from(&mut g_in).and(p).for_each(|gi, &pv| *gi *= leaky_relu_grad(pv));
        }
        g = g_in;
    }
    let g_z = g;

    let kl_scale = alpha / b;
    let half = T::of(0.5);
    let g_mu = Zip::from(&g_z)
        .and(&t.mu)
        .map_collect(|&gz, &m| gz + kl_scale * m);
    let g_lv = Zip::from(&g_z)
        .and(&eps)
        .and(&t.sigma)
        .and(&t.logvar)
        .map_collect(|&gz, &e, &s, &lv| gz * e * s * half + kl_scale * half * lv.exp_m1());

    grads[k] = Some(layer_grads(&g_mu, &t.inputs[k]));
    grads[k + 1] = Some(layer_grads(&g_lv, &t.inputs[k + 1]));

    if k > 0 {
        let mut g = g_mu.dot(&layers[k].weight) + g_lv.dot(&layers[k + 1].weight);
        for li in (0..k).rev() {
            let p = t.pre[li].as_ref().expect("encoder pre-activation");
            Zip::from(&mut g).and(p).for_each(|gi, &pv| *gi *= leaky_relu_grad(pv));
            grads[li] = Some(layer_grads(&g, &t.inputs[li]));
            if li > 0 {
                g = g.dot(&layers[li].weight);
            }
        }
    }

    Ok((
        Gradients {
            layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
        },
        parts,
    ))
}
