//! Finite-difference verification of [`backward`](crate::vae::backward::backward).

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::vae::backward::{backward, batch_loss, param_at, Gradients};
use crate::vae::model::{Vae, VaeHyperParams};
use crate::vae::train::standard_normal;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    /// Parameters to probe; all of them if the model has fewer.
    pub samples: usize,
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Windows in the probe batch.
    pub batch: usize,
    /// Hold the reparameterization noise at zero.
    pub zero_eps: bool,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            step: 1e-4,
            tolerance: 1e-3,
            batch: 4,
            zero_eps: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub checked: usize,
    pub passed: bool,
}

/// Relative error with a small floor so two vanishing gradients compare equal.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-7);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against central differences of the batch loss at
/// randomly chosen parameter indices.
pub fn check_gradients<T: Scalar>(
    model: &Vae<T>,
    x: ArrayView2<'_, T>,
    eps: ArrayView2<'_, T>,
    analytic: &Gradients<T>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let total = model.param_count();
    let picks = rand::seq::index::sample(&mut rng, total, cfg.samples.min(total)).into_vec();

    let mut probe = model.clone();
    let h = T::of(cfg.step);
    let mut worst = (0.0f64, 0usize);
    for &idx in &picks {
        let orig = *param_at(&mut probe, idx);
        *param_at(&mut probe, idx) = orig + h;
        let plus = batch_loss(&probe, x, eps)?.total;
        *param_at(&mut probe, idx) = orig - h;
        let minus = batch_loss(&probe, x, eps)?.total;
        *param_at(&mut probe, idx) = orig;
        let numeric = ((plus - minus) / (h + h)).as_f64();
        let err = relative_error(analytic.get(idx).as_f64(), numeric);
        if err > worst.0 || err.is_nan() {
            worst = (err, idx);
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst.0,
        worst_param: worst.1,
        checked: picks.len(),
        passed: worst.0 < cfg.tolerance,
    })
}

/// Builds a seeded model from `hyper`, draws a random batch and noise, and checks
/// the analytic gradient against central differences.
pub fn gradient_check<T: Scalar>(hyper: &VaeHyperParams, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let model = Vae::<T>::new(hyper.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x = Array2::from_shape_simple_fn((cfg.batch.max(1), hyper.window_size), || {
        T::of(rng.random_range(-1.0..1.0))
    });
    let eps = if cfg.zero_eps {
        Array2::zeros((x.nrows(), hyper.latent_dim))
    } else {
        standard_normal::<T, _>(&mut rng, x.nrows(), hyper.latent_dim)
    };
    let (grads, _) = backward(&model, x.view(), eps.view())?;
    check_gradients(&model, x.view(), eps.view(), &grads, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> VaeHyperParams {
        VaeHyperParams {
            window_size: 8,
            latent_dim: 2,
            hidden_sizes: vec![4],
            alpha: 1e-4,
            seed: 21,
            ..Default::default()
        }
    }

    #[test]
    fn tiny_model_passes() {
        let r = gradient_check::<f64>(&tiny(), &GradCheckConfig::default()).unwrap();
        assert_eq!(r.checked, 100);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn zero_noise_passes() {
        let cfg = GradCheckConfig {
            zero_eps: true,
            seed: 3,
            ..Default::default()
        };
        let r = gradient_check::<f64>(&tiny(), &cfg).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_fails() {
        let model = Vae::<f64>::new(tiny()).unwrap();
        let x = Array2::from_shape_fn((3, 8), |(i, j)| ((i * 8 + j) as f64).sin());
        let eps = Array2::from_shape_fn((3, 2), |(i, j)| ((i + j) as f64).cos());
        let (mut grads, _) = backward(&model, x.view(), eps.view()).unwrap();
        grads.scale(1.1);
        let r = check_gradients(&model, x.view(), eps.view(), &grads, &GradCheckConfig::default()).unwrap();
        assert!(!r.passed);
        assert!(r.max_rel_error > 0.05);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.1, 1.0) - 0.1 / 1.1).abs() < 1e-15);
    }
}
