//! Wall-clock latency of decoding a fixed duration of audio.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::latent::{decode_path, SynthesisOptions};
use crate::scalar::Scalar;
use crate::vae::{standard_normal, Vae};

/// Minimum timed repetitions.
pub const MIN_REPS: usize = 30;
const WARMUP_REPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub windows: usize,
    pub reps: usize,
    pub median: Duration,
    pub p95: Duration,
    pub samples: Vec<Duration>,
}

/// Windows needed to cover `seconds` of audio: `ceil(seconds * rate / window)`.
pub fn bench_windows(seconds: f64, sample_rate: u32, window_size: usize) -> usize {
    (seconds * sample_rate as f64 / window_size as f64).ceil() as usize
}

/// Nearest-rank percentile of sorted durations.
fn percentile(sorted: &[Duration], q: f64) -> Duration {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn median(sorted: &[Duration]) -> Duration {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2
    }
}

/// Times mean-only decoding of random latents covering `seconds` of audio.
///
/// Latents are drawn once from a seeded standard normal; a few untimed runs warm
/// caches before `reps` (at least [`MIN_REPS`]) timed runs.
pub fn bench_decode<T: Scalar>(model: &Vae<T>, seconds: f64, reps: usize, seed: u64) -> Result<BenchReport> {
    if !(seconds > 0.0 && seconds.is_finite()) {
        return Err(Error::InvalidParameter(format!("bench duration must be positive, got {seconds}")));
    }
    let windows = bench_windows(seconds, model.sample_rate(), model.window_size());
    let reps = reps.max(MIN_REPS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = standard_normal::<T, _>(&mut rng, windows, model.latent_dim());
    let means: Vec<Vec<T>> = z.rows().into_iter().map(|r| r.to_vec()).collect();
    let stds = vec![vec![T::zero(); model.latent_dim()]; windows];
    let opts = SynthesisOptions::mean_only();

    for _ in 0..WARMUP_REPS {
        std::hint::black_box(decode_path(model, &means, &stds, &opts)?);
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let out = decode_path(model, &means, &stds, &opts)?;
        samples.push(start.elapsed());
        std::hint::black_box(out);
    }
    let mut sorted = samples.clone();
    sorted.sort();
    Ok(BenchReport {
        windows,
        reps,
        median: median(&sorted),
        p95: percentile(&sorted, 0.95),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::VaeHyperParams;

    #[test]
    fn window_count_rule() {
        assert_eq!(bench_windows(1.0, 44_100, 1024), 44);
        assert_eq!(bench_windows(2.0, 44_100, 1024), 87);
        assert_eq!(bench_windows(1.0, 1024, 1024), 1);
    }

    #[test]
    fn statistics() {
        let d: Vec<Duration> = (1..=20).map(Duration::from_millis).collect();
        assert_eq!(median(&d), Duration::from_micros(10_500));
        assert_eq!(percentile(&d, 0.95), Duration::from_millis(19));
        assert_eq!(median(&d[..3]), Duration::from_millis(2));
    }

    #[test]
    fn small_model_report() {
        let m = Vae::<f32>::new(VaeHyperParams {
            window_size: 64,
            latent_dim: 8,
            hidden_sizes: vec![16],
            sample_rate: 8000,
            ..Default::default()
        })
        .unwrap();
        let r = bench_decode(&m, 0.5, 5, 1).unwrap();
        assert_eq!(r.windows, 63);
        assert_eq!(r.reps, MIN_REPS);
        assert_eq!(r.samples.len(), MIN_REPS);
        assert!(r.p95 >= r.median);
        assert!(bench_decode(&m, 0.0, 30, 1).is_err());
    }
}
