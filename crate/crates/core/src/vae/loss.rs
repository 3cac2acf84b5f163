use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vae::model::LatentStats;

/// `z_i = mu_i + exp(logvar_i / 2) * eps_i`.
pub fn reparameterize<T: Scalar>(stats: &LatentStats<T>, eps: &[T]) -> Result<Vec<T>> {
    if eps.len() != stats.dim() {
        return Err(Error::ShapeMismatch {
            what: "eps",
            expected: stats.dim(),
            got: eps.len(),
        });
    }
    Ok(stats
        .mu
        .iter()
        .zip(&stats.logvar)
        .zip(eps)
        .map(|((&m, &lv), &e)| m + (lv * T::of(0.5)).exp() * e)
        .collect())
}

/// Per-dimension KL term `0.5 (mu^2 + e^lv - lv - 1)`, never negative.
#[inline]
pub(crate) fn kl_term<T: Scalar>(mu: T, logvar: T) -> T {
    // exp_m1 keeps e^lv - 1 - lv accurate near lv = 0; the max absorbs last-ulp cancellation.
    let var_part = (logvar.exp_m1() - logvar).max(T::zero());
    T::of(0.5) * (mu * mu + var_part)
}

/// Closed-form `KL(N(mu, diag(e^logvar)) || N(0, I))`.
pub fn kl_divergence<T: Scalar>(stats: &LatentStats<T>) -> T {
    stats
        .mu
        .iter()
        .zip(&stats.logvar)
        .map(|(&m, &lv)| kl_term(m, lv))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub total: T,
    pub recon: T,
    pub kl: T,
}

/// Mean squared reconstruction error over the window.
pub fn reconstruction_error<T: Scalar>(x: &[T], x_hat: &[T]) -> Result<T> {
    if x.len() != x_hat.len() {
        return Err(Error::ShapeMismatch {
            what: "reconstruction",
            expected: x.len(),
            got: x_hat.len(),
        });
    }
    if x.is_empty() {
        return Ok(T::zero());
    }
    let sse: T = x.iter().zip(x_hat).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(sse / T::of(x.len() as f64))
}

/// Negative evidence lower bound for one window: `recon + alpha * kl`.
pub fn elbo_loss<T: Scalar>(x: &[T], x_hat: &[T], stats: &LatentStats<T>, alpha: T) -> Result<LossParts<T>> {
    let recon = reconstruction_error(x, x_hat)?;
    let kl = kl_divergence(stats);
    Ok(LossParts {
        total: recon + alpha * kl,
        recon,
        kl,
    })
}
