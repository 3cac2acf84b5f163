//! Latent paths: encoding audio window by window, blending two paths under a
//! weight curve, and decoding the result back to audio.

mod curve;
mod export;
mod interpolate;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{window, AudioBuffer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vae::{standard_normal, LatentStats, Vae};

pub use curve::{generate_curve, CurveSpec, InterpolationCurve};
pub use export::{export_latents, export_latents_to_file};
pub use interpolate::{
    extended_interpolate, meso_interpolate, pair_window_count, stepwise_interpolate, stepwise_segment_count,
    stepwise_weights, DEFAULT_EXTEND_HOP,
};

/// Lower bound applied to blended standard deviations.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Posterior statistics for consecutive windows of one sound.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPath<T> {
    pub stats: Vec<LatentStats<T>>,
    pub window_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl<T: Scalar> LatentPath<T> {
    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn latent_dim(&self) -> usize {
        self.stats.first().map_or(0, LatentStats::dim)
    }

    pub fn means(&self) -> Vec<Vec<T>> {
        self.stats.iter().map(|s| s.mu.clone()).collect()
    }

    pub fn stds(&self) -> Vec<Vec<T>> {
        self.stats.iter().map(LatentStats::sigma).collect()
    }
}

/// How latent vectors are drawn before decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    /// `z = mean + std * eps` with `eps` from a generator seeded per call.
    Sampled { seed: u64 },
    /// `z = mean`; standard deviations are ignored.
    MeanOnly,
}

impl Default for SynthesisMode {
    fn default() -> Self {
        SynthesisMode::Sampled { seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SynthesisOptions {
    pub mode: SynthesisMode,
    /// Linear crossfade length in samples between consecutive decoded frames.
    pub crossfade: usize,
}

impl SynthesisOptions {
    pub fn mean_only() -> Self {
        Self {
            mode: SynthesisMode::MeanOnly,
            crossfade: 0,
        }
    }

    pub fn sampled(seed: u64) -> Self {
        Self {
            mode: SynthesisMode::Sampled { seed },
            crossfade: 0,
        }
    }
}

/// Encodes every `hop`-spaced window of `buffer`.
pub fn encode_audio<T: Scalar>(model: &Vae<T>, buffer: &AudioBuffer, hop: usize) -> Result<LatentPath<T>> {
    if buffer.sample_rate() != model.sample_rate() {
        return Err(Error::RateMismatch {
            left: buffer.sample_rate(),
            right: model.sample_rate(),
        });
    }
    let frames = window(buffer, model.window_size(), hop)?;
    let x = frames.frames().mapv(T::of_f32);
    let (mu, lv) = model.encode_batch(x.view())?;
    let stats = mu
        .rows()
        .into_iter()
        .zip(lv.rows())
        .map(|(m, l)| LatentStats {
            mu: m.to_vec(),
            logvar: l.to_vec(),
        })
        .collect();
    Ok(LatentPath {
        stats,
        window_size: model.window_size(),
        hop,
        sample_rate: model.sample_rate(),
    })
}

/// `c * a + (1 - c) * b`.
#[inline]
pub fn blend<T: Scalar>(c: T, a: T, b: T) -> T {
    c * a + (T::one() - c) * b
}

/// Blends two windows' statistics with weight `c` on `a`. Means blend linearly;
/// standard deviations blend linearly in sigma and are floored at [`SIGMA_FLOOR`].
pub fn blend_stats<T: Scalar>(c: T, a: &LatentStats<T>, b: &LatentStats<T>) -> Result<(Vec<T>, Vec<T>)> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            what: "blended latent",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let floor = T::of(SIGMA_FLOOR);
    let mean = a.mu.iter().zip(&b.mu).map(|(&x, &y)| blend(c, x, y)).collect();
    let std = a
        .sigma()
        .into_iter()
        .zip(b.sigma())
        .map(|(x, y)| blend(c, x, y).max(floor))
        .collect();
    Ok((mean, std))
}

/// Decodes one latent vector per window and concatenates the frames.
pub fn decode_path<T: Scalar>(
    model: &Vae<T>,
    means: &[Vec<T>],
    stds: &[Vec<T>],
    opts: &SynthesisOptions,
) -> Result<AudioBuffer> {
    let dim = model.latent_dim();
    let ws = model.window_size();
    if means.len() != stds.len() {
        return Err(Error::ShapeMismatch {
            what: "std sequence",
            expected: means.len(),
            got: stds.len(),
        });
    }
    if opts.crossfade >= ws {
        return Err(Error::InvalidParameter(format!(
            "crossfade {} must be shorter than the window ({ws})",
            opts.crossfade
        )));
    }
    let n = means.len();
    let mut z = Array2::<T>::zeros((n, dim));
    for (i, (m, s)) in means.iter().zip(stds).enumerate() {
        if m.len() != dim {
            return Err(Error::ShapeMismatch {
                what: "latent mean",
                expected: dim,
                got: m.len(),
            });
        }
        if s.len() != dim {
            return Err(Error::ShapeMismatch {
                what: "latent std",
                expected: dim,
                got: s.len(),
            });
        }
        if s.iter().any(|&v| !(v >= T::zero())) {
            return Err(Error::InvalidParameter(format!("window {i}: standard deviations must be >= 0")));
        }
        z.row_mut(i).iter_mut().zip(m).for_each(|(dst, &v)| *dst = v);
    }
    if let SynthesisMode::Sampled { seed } = opts.mode {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = standard_normal::<T, _>(&mut rng, n, dim);
        for (i, s) in stds.iter().enumerate() {
            for (j, &sd) in s.iter().enumerate() {
                z[[i, j]] += sd * eps[[i, j]];
            }
        }
    }
    let frames = if n == 0 {
        Array2::zeros((0, ws))
    } else {
        model.decode_batch(z.view())?
    };
    let samples = overlap_concat(&frames, opts.crossfade);
    Ok(AudioBuffer::from_parts(samples, model.sample_rate(), None))
}

fn overlap_concat<T: Scalar>(frames: &Array2<T>, k: usize) -> Vec<f32> {
    let ws = frames.ncols();
    let mut out: Vec<f32> = Vec::with_capacity(frames.nrows() * ws);
    for (i, row) in frames.rows().into_iter().enumerate() {
        let row: Vec<f32> = row.iter().map(|v| v.as_f32()).collect();
        if i == 0 || k == 0 {
            out.extend_from_slice(&row);
            continue;
        }
        let start = out.len() - k;
        for (j, &v) in row[..k].iter().enumerate() {
            let t = (j + 1) as f32 / (k + 1) as f32;
            out[start + j] = out[start + j] * (1.0 - t) + v * t;
        }
        out.extend_from_slice(&row[k..]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::VaeHyperParams;
    use proptest::prelude::*;

    pub(crate) fn model(ws: usize, latent: usize) -> Vae<f32> {
        Vae::new(VaeHyperParams {
            window_size: ws,
            latent_dim: latent,
            hidden_sizes: vec![12],
            sample_rate: 8000,
            seed: 5,
            ..Default::default()
        })
        .unwrap()
    }

    fn noise(len: usize, rate: u32) -> AudioBuffer {
        let s = (0..len).map(|i| ((i * 7919 % 211) as f32 / 105.0 - 1.0) * 0.5).collect();
        AudioBuffer::new(s, rate).unwrap()
    }

    #[test]
    fn encode_window_counts() {
        let m = Vae::<f32>::new(VaeHyperParams {
            hidden_sizes: vec![8],
            latent_dim: 4,
            ..Default::default()
        })
        .unwrap();
        let buf = noise(4096, 44_100);
        assert_eq!(encode_audio(&m, &buf, 1024).unwrap().len(), 4);
        let p = encode_audio(&m, &buf, 256).unwrap();
        assert_eq!(p.len(), 13);
        assert_eq!(p.latent_dim(), 4);
        assert_eq!(p, encode_audio(&m, &buf, 256).unwrap());
    }

    #[test]
    fn encode_errors() {
        let m = model(16, 3);
        assert!(matches!(encode_audio(&m, &noise(10, 8000), 16), Err(Error::TooShort { .. })));
        assert!(matches!(encode_audio(&m, &noise(64, 16000), 16), Err(Error::RateMismatch { .. })));
    }

    #[test]
    fn encode_matches_single_window_forward() {
        let m = model(16, 3);
        let buf = noise(64, 8000);
        let p = encode_audio(&m, &buf, 16).unwrap();
        for (i, s) in p.stats.iter().enumerate() {
            let direct = m.encoder_forward(&buf.samples()[i * 16..(i + 1) * 16]).unwrap();
            for (a, b) in s.mu.iter().zip(&direct.mu) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn decode_lengths_and_modes() {
        let m = model(16, 3);
        let means = vec![vec![0.1, -0.2, 0.3]; 3];
        let stds = vec![vec![0.5; 3]; 3];
        let other_stds = vec![vec![2.0; 3]; 3];
        let a = decode_path(&m, &means, &stds, &SynthesisOptions::mean_only()).unwrap();
        assert_eq!(a.len(), 48);
        let b = decode_path(&m, &means, &other_stds, &SynthesisOptions::mean_only()).unwrap();
        assert_eq!(a, b);
        let s1 = decode_path(&m, &means, &stds, &SynthesisOptions::sampled(4)).unwrap();
        let s2 = decode_path(&m, &means, &stds, &SynthesisOptions::sampled(4)).unwrap();
        let s3 = decode_path(&m, &means, &stds, &SynthesisOptions::sampled(5)).unwrap();
        assert_eq!(s1, s2);
        assert_ne!(s1, s3);
        assert_ne!(s1, a);
        let empty = decode_path::<f32>(&m, &[], &[], &SynthesisOptions::default()).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn decode_errors() {
        let m = model(16, 3);
        let opts = SynthesisOptions::mean_only();
        assert!(matches!(
            decode_path(&m, &[vec![0.0; 2]], &[vec![0.0; 2]], &opts),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            decode_path(&m, &[vec![0.0; 3]], &[], &opts),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(decode_path(&m, &[vec![0.0; 3]], &[vec![-1.0; 3]], &opts).is_err());
    }

    #[test]
    fn crossfade_shortens_by_overlap() {
        let m = model(16, 3);
        let means = vec![vec![0.1, -0.2, 0.3], vec![-0.4, 0.0, 0.9]];
        let stds = vec![vec![0.0; 3]; 2];
        let hard = decode_path(&m, &means, &stds, &SynthesisOptions::mean_only()).unwrap();
        let opts = SynthesisOptions {
            crossfade: 4,
            ..SynthesisOptions::mean_only()
        };
        let soft = decode_path(&m, &means, &stds, &opts).unwrap();
        assert_eq!(soft.len(), 28);
        assert_eq!(&soft.samples()[..12], &hard.samples()[..12]);
        assert_eq!(&soft.samples()[16..], &hard.samples()[20..]);
        let t = 1.0 / 5.0;
        let want = hard.samples()[12] * (1.0 - t) + hard.samples()[16] * t;
        assert_eq!(soft.samples()[12], want);
    }

    #[test]
    fn sigma_floor_under_extrapolation() {
        let a = LatentStats::new(vec![0.0f64], vec![0.0]).unwrap();
        let b = LatentStats::new(vec![1.0], vec![(4.0f64).ln()]).unwrap();
        let (_, std) = blend_stats(-1.0, &a, &b).unwrap();
        // -1 * 1 + 2 * 2 = 3
        assert!((std[0] - 3.0).abs() < 1e-12);
        let (_, std) = blend_stats(3.0, &a, &b).unwrap();
        assert_eq!(std[0], SIGMA_FLOOR);
    }

    proptest! {
        #[test]
        fn blending_is_linear(
            c in -1.0f64..1.0,
            mu1 in prop::collection::vec(-5.0f64..5.0, 4),
            mu2 in prop::collection::vec(-5.0f64..5.0, 4),
            lv1 in prop::collection::vec(-3.0f64..3.0, 4),
            lv2 in prop::collection::vec(-3.0f64..3.0, 4),
        ) {
            let a = LatentStats::new(mu1.clone(), lv1.clone()).unwrap();
            let b = LatentStats::new(mu2.clone(), lv2.clone()).unwrap();
            let (mean, std) = blend_stats(c, &a, &b).unwrap();
            for j in 0..4 {
                prop_assert_eq!(mean[j], c * mu1[j] + (1.0 - c) * mu2[j]);
                let s = c * (lv1[j] * 0.5).exp() + (1.0 - c) * (lv2[j] * 0.5).exp();
                prop_assert_eq!(std[j], s.max(SIGMA_FLOOR));
            }
        }

        #[test]
        fn sampled_seed_determinism(seed in any::<u64>(), sd in 0.01f32..2.0) {
            let m = model(8, 2);
            let means = vec![vec![0.0, 0.5]; 2];
            let stds = vec![vec![sd; 2]; 2];
            let a = decode_path(&m, &means, &stds, &SynthesisOptions::sampled(seed)).unwrap();
            let b = decode_path(&m, &means, &stds, &SynthesisOptions::sampled(seed)).unwrap();
            let c = decode_path(&m, &means, &stds, &SynthesisOptions::sampled(seed.wrapping_add(1))).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_ne!(&a, &c);
        }
    }
}
