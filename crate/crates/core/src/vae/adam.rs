use ndarray::Zip;

use crate::scalar::Scalar;
use crate::vae::backward::Gradients;
use crate::vae::model::{Dense, Vae};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second moment estimates per layer plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Dense<T>>,
    pub v: Vec<Dense<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &Vae<T>) -> Self {
        let zeros: Vec<Dense<T>> = model
            .layers()
            .iter()
            .map(|l| Dense::zeros(l.out_dim(), l.in_dim()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// Bias-corrected Adam update of one parameter slice.
pub fn adam_update<T: Scalar>(params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T], learning_rate: T, step: u64) {
    let b1 = T::of(ADAM_BETA1);
    let b2 = T::of(ADAM_BETA2);
    let eps = T::of(ADAM_EPSILON);
    let c1 = T::one() - b1.powi(step as i32);
    let c2 = T::one() - b2.powi(step as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Applies one Adam step to every model parameter and increments the step counter.
pub fn adam_step<T: Scalar>(model: &mut Vae<T>, grads: &Gradients<T>, state: &mut AdamState<T>, learning_rate: T) {
    state.step += 1;
    let step = state.step;
    let b1 = T::of(ADAM_BETA1);
    let b2 = T::of(ADAM_BETA2);
    let eps = T::of(ADAM_EPSILON);
    let c1 = T::one() - b1.powi(step as i32);
    let c2 = T::one() - b2.powi(step as i32);
    let one = T::one();

    let layers = model.layers_mut();
    for (li, layer) in layers.iter_mut().enumerate() {
        let g = &grads.layers[li];
        let (m, v) = (&mut state.m[li], &mut state.v[li]);
        let upd = |p: &mut T, &g: &T, m: &mut T, v: &mut T| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        Zip::from(&mut layer.weight)
            .and(&g.weight)
            .and(&mut m.weight)
            .and(&mut v.weight)
            .for_each(upd);
        Zip::from(&mut layer.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(upd);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::model::VaeHyperParams;

    /// Hand-rolled bias-corrected Adam on a scalar, written out step by step.
    fn oracle(grads: &[f64], lr: f64) -> Vec<f64> {
        let (mut m, mut v) = (0.0, 0.0);
        let mut out = Vec::new();
        for (t, g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            out.push(-lr * m_hat / (v_hat.sqrt() + 1e-8));
        }
        out
    }

    #[test]
    fn first_step_unit_gradient() {
        let (mut p, mut m, mut v) = ([0.0f64], [0.0], [0.0]);
        adam_update(&mut p, &[1.0], &mut m, &mut v, 1e-4, 1);
        let expected = -1e-4 * (1.0 / (1.0 + 1e-8));
        assert!((p[0] - expected).abs() < 1e-18, "{}", p[0]);
        assert!((p[0] - oracle(&[1.0], 1e-4)[0]).abs() < 1e-18);
    }

    #[test]
    fn second_identical_step() {
        let (mut p, mut m, mut v) = ([0.0f64], [0.0], [0.0]);
        adam_update(&mut p, &[1.0], &mut m, &mut v, 1e-4, 1);
        let before = p[0];
        adam_update(&mut p, &[1.0], &mut m, &mut v, 1e-4, 2);
        let d2 = p[0] - before;
        let want = oracle(&[1.0, 1.0], 1e-4)[1];
        assert!((d2 - want).abs() < 1e-18, "{d2} vs {want}");
        // m = 0.19, v = 0.001999: both bias corrections give exactly 1.
        assert!((m[0] - 0.19).abs() < 1e-15);
        assert!((v[0] - 0.001999).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let hyper = VaeHyperParams {
            window_size: 4,
            latent_dim: 1,
            hidden_sizes: vec![2],
            ..Default::default()
        };
        let mut model = Vae::<f64>::new(hyper).unwrap();
        let before = model.clone();
        let mut state = AdamState::new(&model);
        for l in state.m.iter_mut().chain(state.v.iter_mut()) {
            l.weight.fill(0.5);
            l.bias.fill(0.5);
        }
        let zeros = Gradients::zeros_like(&model);
        adam_step(&mut model, &zeros, &mut state, 1e-4);
        assert_eq!(state.step, 1);
        assert!(state.m.iter().all(|l| l.weight.iter().all(|&x| x == 0.45)));
        assert!(state.v.iter().all(|l| l.bias.iter().all(|&x| (x - 0.4995).abs() < 1e-16)));
        // moments are nonzero, so parameters do move; with fresh state they must not.
        let mut fresh = AdamState::new(&before);
        let mut model2 = before.clone();
        adam_step(&mut model2, &zeros, &mut fresh, 1e-4);
        assert_eq!(model2, before);
        assert_eq!(fresh.step, 1);
    }

    #[test]
    fn model_step_matches_slice_update() {
        let hyper = VaeHyperParams {
            window_size: 4,
            latent_dim: 2,
            hidden_sizes: vec![3],
            ..Default::default()
        };
        let mut model = Vae::<f64>::new(hyper).unwrap();
        let mut grads = Gradients::zeros_like(&model);
        for (i, l) in grads.layers.iter_mut().enumerate() {
            l.weight.mapv_inplace(|_| 0.1 * (i as f64 + 1.0));
            l.bias.fill(-0.2);
        }
        let mut reference = model.clone();
        let mut state = AdamState::new(&model);
        adam_step(&mut model, &grads, &mut state, 1e-3);
        for (li, l) in reference.layers_mut().iter_mut().enumerate() {
            let n = l.weight.len();
            let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
            adam_update(l.weight.as_slice_mut().unwrap(), grads.layers[li].weight.as_slice().unwrap(), &mut m, &mut v, 1e-3, 1);
        }
        for (a, b) in model.layers().iter().zip(reference.layers()) {
            assert_eq!(a.weight, b.weight);
        }
    }
}
