//! Dense variational autoencoder over raw audio windows.
//!
//! The network, its loss, the reverse-mode gradient, the Adam optimizer and the
//! trainer are all written directly against `ndarray` matrices and are generic
//! over the [`Scalar`](crate::Scalar) type. Checkpoints persist `f32` models.
//!
//! ```text
//! x -> [affine, leaky-relu]* -> (mu, logvar) -> z = mu + exp(logvar/2) * eps
//!   -> [affine, leaky-relu]* -> affine -> tanh -> x_hat
//! loss = mean((x - x_hat)^2) + alpha * KL(N(mu, sigma^2) || N(0, I))
//! ```

mod adam;
mod backward;
mod checkpoint;
mod gradcheck;
mod loss;
mod model;
mod train;

pub use adam::{adam_step, adam_update, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use backward::{backward, batch_loss, param_at, Gradients};
pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint, Checkpoint,
    CHECKPOINT_FORMAT_VERSION,
};
pub use gradcheck::{check_gradients, gradient_check, relative_error, GradCheckConfig, GradCheckReport};
pub use loss::{elbo_loss, kl_divergence, reconstruction_error, reparameterize, LossParts};
pub use model::{Dense, LatentStats, Vae, VaeHyperParams, LEAKY_SLOPE};
pub use train::{stack_windows, standard_normal, train, train_with, EpochLoss};
