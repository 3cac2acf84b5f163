use crate::audio::{truncate_pair, window_count, AudioBuffer};
use crate::error::{Error, Result};
use crate::latent::curve::InterpolationCurve;
use crate::latent::{blend_stats, decode_path, encode_audio, LatentPath, SynthesisOptions};
use crate::scalar::Scalar;
use crate::vae::Vae;

/// Hop used by [`extended_interpolate`] when slicing with overlap.
pub const DEFAULT_EXTEND_HOP: usize = 256;

/// Upper bound on stepwise segments, guarding against tiny steps.
const MAX_SEGMENTS: usize = 100_000;

/// Number of stepwise segments, `floor(range / step) + 1`.
///
/// A relative slack of 1e-9 absorbs representation error so that, for example,
/// `0.8 / 0.2` counts as 4 rather than 3.999....
pub fn stepwise_segment_count(range: f64, step: f64) -> Result<usize> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::BadStep(step));
    }
    if !(range >= 0.0 && range.is_finite()) {
        return Err(Error::InvalidParameter(format!("range must be finite and >= 0, got {range}")));
    }
    let q = range / step;
    let n = (q + q.abs().max(1.0) * 1e-9).floor() + 1.0;
    if n > MAX_SEGMENTS as f64 {
        return Err(Error::InvalidParameter(format!(
            "range {range} / step {step} gives more than {MAX_SEGMENTS} segments"
        )));
    }
    Ok(n as usize)
}

/// Weights `i * step` for each stepwise segment, applied to the first input.
pub fn stepwise_weights(range: f64, step: f64) -> Result<Vec<f64>> {
    let n = stepwise_segment_count(range, step)?;
    Ok((0..n).map(|i| i as f64 * step).collect())
}

/// Windows each input of the truncated pair yields at `hop`.
pub fn pair_window_count(model_window: usize, a: &AudioBuffer, b: &AudioBuffer, hop: usize) -> Result<usize> {
    let len = a.len().min(b.len());
    if len < model_window {
        return Err(Error::TooShort {
            len,
            needed: model_window,
        });
    }
    if hop == 0 {
        return Err(Error::InvalidParameter("hop must be positive".into()));
    }
    Ok(window_count(len, model_window, hop))
}

fn encode_pair<T: Scalar>(
    model: &Vae<T>,
    a: &AudioBuffer,
    b: &AudioBuffer,
    hop: usize,
) -> Result<(LatentPath<T>, LatentPath<T>)> {
    let (a, b) = truncate_pair(a, b)?;
    Ok((encode_audio(model, &a, hop)?, encode_audio(model, &b, hop)?))
}

fn blend_into<T: Scalar>(
    pa: &LatentPath<T>,
    pb: &LatentPath<T>,
    weight: impl Fn(usize) -> T,
    means: &mut Vec<Vec<T>>,
    stds: &mut Vec<Vec<T>>,
) -> Result<()> {
    for (i, (sa, sb)) in pa.stats.iter().zip(&pb.stats).enumerate() {
        let (m, s) = blend_stats(weight(i), sa, sb)?;
        means.push(m);
        stds.push(s);
    }
    Ok(())
}

/// Decodes `floor(range / step) + 1` blends of the two inputs, segment `i`
/// weighting `a` by `i * step` and `b` by `1 - i * step`, and concatenates them.
///
/// Inputs are truncated to equal length and encoded without overlap.
pub fn stepwise_interpolate<T: Scalar>(
    model: &Vae<T>,
    a: &AudioBuffer,
    b: &AudioBuffer,
    range: f64,
    step: f64,
    opts: &SynthesisOptions,
) -> Result<AudioBuffer> {
    let weights = stepwise_weights(range, step)?;
    let ws = model.window_size();
    let (pa, pb) = encode_pair(model, a, b, ws)?;
    let total = weights.len() * pa.len();
    let mut means = Vec::with_capacity(total);
    let mut stds = Vec::with_capacity(total);
    for &w in &weights {
        let w = T::of(w);
        blend_into(&pa, &pb, |_| w, &mut means, &mut stds)?;
    }
    decode_path(model, &means, &stds, opts)
}

/// Per-window curve blend of the two inputs encoded without overlap.
pub fn meso_interpolate<T: Scalar>(
    model: &Vae<T>,
    a: &AudioBuffer,
    b: &AudioBuffer,
    curve: &InterpolationCurve,
    opts: &SynthesisOptions,
) -> Result<AudioBuffer> {
    extended_interpolate(model, a, b, curve, model.window_size(), opts)
}

/// Per-window curve blend of the two inputs sliced every `hop` samples. Decoded
/// frames are concatenated without overlap-add, so the output is about
/// `window_size / hop` times longer than the inputs.
pub fn extended_interpolate<T: Scalar>(
    model: &Vae<T>,
    a: &AudioBuffer,
    b: &AudioBuffer,
    curve: &InterpolationCurve,
    hop: usize,
    opts: &SynthesisOptions,
) -> Result<AudioBuffer> {
    let expected = pair_window_count(model.window_size(), a, b, hop)?;
    if curve.len() != expected {
        return Err(Error::CurveLengthMismatch {
            expected,
            got: curve.len(),
        });
    }
    let (pa, pb) = encode_pair(model, a, b, hop)?;
    let mut means = Vec::with_capacity(expected);
    let mut stds = Vec::with_capacity(expected);
    let values = curve.values();
    blend_into(&pa, &pb, |i| T::of(values[i]), &mut means, &mut stds)?;
    decode_path(model, &means, &stds, opts)
}
