use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::audio::WindowSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vae::adam::{adam_step, AdamState};
use crate::vae::backward::backward;
use crate::vae::checkpoint::Checkpoint;
use crate::vae::model::{Vae, VaeHyperParams};

/// Mean per-window loss components over one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss<T> {
    pub recon: T,
    pub kl: T,
}

impl<T: Scalar> EpochLoss<T> {
    pub fn total(&self, alpha: f64) -> T {
        self.recon + T::of(alpha) * self.kl
    }
}

/// Draws a `rows x cols` matrix of standard normal noise.
pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || T::of(rng.sample::<f64, _>(StandardNormal)))
}

/// Stacks every frame of every window set into one matrix.
pub fn stack_windows<T: Scalar>(dataset: &[WindowSet], window_size: usize) -> Result<Array2<T>> {
    let total: usize = dataset.iter().map(WindowSet::len).sum();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut data = Array2::zeros((total, window_size));
    let mut row = 0;
    for set in dataset {
        if set.is_empty() {
            continue;
        }
        if set.window_size() != window_size {
            return Err(Error::ShapeMismatch {
                what: "training window",
                expected: window_size,
                got: set.window_size(),
            });
        }
        for frame in set.frames().rows() {
            data.row_mut(row).assign(&frame.mapv(T::of_f32));
            row += 1;
        }
    }
    Ok(data)
}

fn training_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Stream 0 initializes weights; training draws (shuffles, noise) use stream 1.
    rng.set_stream(1);
    rng
}

/// Trains a freshly initialized model for `hyper.epochs` epochs.
pub fn train<T: Scalar>(dataset: &[WindowSet], hyper: &VaeHyperParams) -> Result<Checkpoint<T>> {
    train_with(dataset, hyper, |_, _| {})
}

/// Like [`train`], reporting each epoch's mean losses to `on_epoch`.
pub fn train_with<T: Scalar>(
    dataset: &[WindowSet],
    hyper: &VaeHyperParams,
    on_epoch: impl FnMut(usize, &EpochLoss<T>),
) -> Result<Checkpoint<T>> {
    hyper.validate()?;
    let data = stack_windows::<T>(dataset, hyper.window_size)?;
    let model = Vae::new(hyper.clone())?;
    let adam = AdamState::new(&model);
    let mut ckpt = Checkpoint {
        model,
        adam,
        loss_history: Vec::with_capacity(hyper.epochs),
    };
    let mut rng = training_rng(hyper.seed);
    run_epochs(&mut ckpt, &data, hyper.epochs, &mut rng, on_epoch)?;
    Ok(ckpt)
}

/// Shuffled mini-batch Adam over `data` for `epochs` epochs, one fresh noise
/// draw per window per visit.
pub(crate) fn run_epochs<T: Scalar, R: Rng + ?Sized>(
    ckpt: &mut Checkpoint<T>,
    data: &Array2<T>,
    epochs: usize,
    rng: &mut R,
    mut on_epoch: impl FnMut(usize, &EpochLoss<T>),
) -> Result<()> {
    let hyper = ckpt.model.hyper().clone();
    let n = data.nrows();
    let lr = T::of(hyper.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..epochs {
        let epoch = ckpt.loss_history.len() + 1;
        order.shuffle(rng);
        let mut recon_sum = T::zero();
        let mut kl_sum = T::zero();
        for idx in order.chunks(hyper.batch_size) {
            let x = data.select(Axis(0), idx);
            let eps = standard_normal::<T, _>(rng, idx.len(), hyper.latent_dim);
            let (grads, parts) = backward(&ckpt.model, x.view(), eps.view())?;
            if !parts.total.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite { epoch });
            }
            let w = T::of(idx.len() as f64);
            recon_sum += parts.recon * w;
            kl_sum += parts.kl * w;
            adam_step(&mut ckpt.model, &grads, &mut ckpt.adam, lr);
        }
        let denom = T::of(n as f64);
        let loss = EpochLoss {
            recon: recon_sum / denom,
            kl: kl_sum / denom,
        };
        if !loss.recon.is_finite() || !loss.kl.is_finite() || !ckpt.model.is_finite() {
            return Err(Error::NonFinite { epoch });
        }
        on_epoch(epoch, &loss);
        ckpt.loss_history.push(loss);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{window, AudioBuffer};

    fn sine_windows(n_samples: usize, freq: f32, ws: usize, hop: usize) -> WindowSet {
        let samples = (0..n_samples)
            .map(|i| (2.0 * std::f32::consts::PI * freq * i as f32 / 8000.0).sin() * 0.8)
            .collect();
        window(&AudioBuffer::new(samples, 8000).unwrap(), ws, hop).unwrap()
    }

    fn small(seed: u64, alpha: f64, epochs: usize) -> VaeHyperParams {
        VaeHyperParams {
            window_size: 32,
            latent_dim: 4,
            hidden_sizes: vec![16],
            alpha,
            learning_rate: 3e-3,
            epochs,
            batch_size: 8,
            sample_rate: 8000,
            seed,
        }
    }

    #[test]
    fn empty_dataset() {
        let r = train::<f32>(&[], &small(0, 1e-4, 2));
        assert!(matches!(r, Err(Error::EmptyDataset)));
    }

    #[test]
    fn window_size_mismatch() {
        let ws = sine_windows(400, 200.0, 16, 8);
        assert!(matches!(train::<f32>(&[ws], &small(0, 1e-4, 1)), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let data = [sine_windows(2000, 300.0, 32, 8)];
        let a = train::<f32>(&data, &small(7, 1e-4, 4)).unwrap();
        let b = train::<f32>(&data, &small(7, 1e-4, 4)).unwrap();
        assert_eq!(a.loss_history.len(), 4);
        assert_eq!(a, b);
        let c = train::<f32>(&data, &small(8, 1e-4, 4)).unwrap();
        assert_ne!(a.loss_history, c.loss_history);
    }

    #[test]
    fn alpha_zero_still_learns() {
        let data = [sine_windows(4000, 250.0, 32, 8)];
        let mut totals = Vec::new();
        let ck = train_with::<f64>(&data, &small(3, 0.0, 40), |_, l| totals.push(l.total(0.0))).unwrap();
        let first = ck.loss_history[0];
        let last = *ck.loss_history.last().unwrap();
        assert_eq!(first.total(0.0), first.recon);
        assert!(last.recon < first.recon * 0.5, "{} -> {}", first.recon, last.recon);
        assert_eq!(totals.len(), 40);
        assert_eq!(ck.adam.step, 40 * (data[0].len() as u64).div_ceil(8));
    }
}
