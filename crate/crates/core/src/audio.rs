//! Audio buffers, WAV I/O, normalization, resampling and windowing.
//!
//! Everything downstream consumes [`AudioBuffer`] (mono `f32` in `[-1, 1]`) and
//! [`WindowSet`] (fixed-size frames cut with a hop). Multichannel WAVs are
//! downmixed by arithmetic mean on load.

use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Canonical internal sample rate.
pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;

const PCM16_SCALE: f32 = 32768.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
    source_label: Option<String>,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        Ok(Self::from_parts(samples, sample_rate, None))
    }

    pub(crate) fn from_parts(samples: Vec<f32>, sample_rate: u32, source_label: Option<String>) -> Self {
        debug_assert!(sample_rate > 0);
        Self {
            samples,
            sample_rate,
            source_label,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.source_label = Some(label.into());
        self
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_label(&self) -> Option<&str> {
        self.source_label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Largest absolute sample value, 0 for an empty buffer.
    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    /// First `len` samples (or the whole buffer if shorter).
    pub fn head(&self, len: usize) -> AudioBuffer {
        let end = len.min(self.samples.len());
        Self::from_parts(self.samples[..end].to_vec(), self.sample_rate, self.source_label.clone())
    }
}

/// Sample encoding used when writing WAV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::FormatError(msg) => Error::MalformedWav(format!("{}: {msg}", path.display())),
        hound::Error::Unsupported => {
            Error::UnsupportedEncoding(format!("{}: compressed or unknown format tag", path.display()))
        }
        other => Error::MalformedWav(format!("{}: {other}", path.display())),
    }
}

/// The file opened fine, so a read failure while decoding samples means the
/// data chunk is shorter than its header claims.
fn truncated(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::MalformedWav(format!("{}: truncated data ({io})", path.display())),
        other => map_hound(path, other),
    }
}

/// Decodes a PCM16 or IEEE-float32 WAV file into a mono buffer at its native rate.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(Error::MalformedWav(format!("{}: zero channels", path.display())));
    }
    if spec.sample_rate == 0 {
        return Err(Error::MalformedWav(format!("{}: zero sample rate", path.display())));
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| truncated(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| truncated(path, e))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{}: {bits}-bit {fmt:?}",
                path.display()
            )))
        }
    };

    let channels = spec.channels as usize;
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect()
    };

    Ok(AudioBuffer::from_parts(
        samples,
        spec.sample_rate,
        Some(path.display().to_string()),
    ))
}

/// Writes a mono WAV file. PCM16 rounds to the nearest step and saturates.
pub fn save_wav(buffer: &AudioBuffer, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in &buffer.samples {
                let q = (s * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q).map_err(|e| map_hound(path, e))?;
            }
        }
        WavEncoding::Float32 => {
            for &s in &buffer.samples {
                writer.write_sample(s).map_err(|e| map_hound(path, e))?;
            }
        }
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

/// Scales every sample by the same factor so the peak magnitude becomes exactly 1.
pub fn peak_normalize(buffer: &AudioBuffer) -> AudioBuffer {
    let peak = buffer.peak();
    if peak == 0.0 || !peak.is_finite() {
        return buffer.clone();
    }
    // Division (not multiplication by 1/peak) so the peak sample lands on 1.0 exactly.
    let samples = buffer.samples.iter().map(|s| s / peak).collect();
    AudioBuffer::from_parts(samples, buffer.sample_rate, buffer.source_label.clone())
}

/// Linear-interpolation resampling. Output length is `round(L * target / source)`.
pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::InvalidParameter("target rate must be positive".into()));
    }
    if target_rate == buffer.sample_rate {
        return Ok(buffer.clone());
    }
    let src = &buffer.samples;
    let len = src.len();
    let out_len = (len as f64 * target_rate as f64 / buffer.sample_rate as f64).round() as usize;
    let ratio = buffer.sample_rate as f64 / target_rate as f64;
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let idx = (pos.floor() as usize).min(len - 1);
            let next = (idx + 1).min(len - 1);
            let frac = (pos - idx as f64).clamp(0.0, 1.0) as f32;
            let a = src[idx];
            a + (src[next] - a) * frac
        })
        .collect();
    Ok(AudioBuffer::from_parts(samples, target_rate, buffer.source_label.clone()))
}

/// Number of full frames of `window_size` with stride `hop` in `len` samples.
pub fn window_count(len: usize, window_size: usize, hop: usize) -> usize {
    if window_size == 0 || hop == 0 || len < window_size {
        0
    } else {
        (len - window_size) / hop + 1
    }
}

/// Fixed-size frames sliced from a buffer, in source order. Row `i` starts at sample `i * hop`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    frames: Array2<f32>,
    hop: usize,
    origin_sample_rate: u32,
}

impl WindowSet {
    pub fn frames(&self) -> &Array2<f32> {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> ArrayView1<'_, f32> {
        self.frames.row(i)
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn window_size(&self) -> usize {
        self.frames.ncols()
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn origin_sample_rate(&self) -> u32 {
        self.origin_sample_rate
    }

    /// Start offsets of each frame in the source buffer.
    pub fn offsets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).map(move |i| i * self.hop)
    }
}

/// Slices `buffer` into frames; a trailing partial frame is discarded.
pub fn window(buffer: &AudioBuffer, window_size: usize, hop: usize) -> Result<WindowSet> {
    if window_size == 0 || hop == 0 {
        return Err(Error::InvalidParameter(format!(
            "window size and hop must be positive (got {window_size}, {hop})"
        )));
    }
    if buffer.len() < window_size {
        return Err(Error::TooShort {
            len: buffer.len(),
            needed: window_size,
        });
    }
    let n = window_count(buffer.len(), window_size, hop);
    let mut frames = Array2::zeros((n, window_size));
    for (i, mut row) in frames.rows_mut().into_iter().enumerate() {
        let start = i * hop;
        row.assign(&ArrayView1::from(&buffer.samples[start..start + window_size]));
    }
    Ok(WindowSet {
        frames,
        hop,
        origin_sample_rate: buffer.sample_rate,
    })
}

/// Truncates the longer of two buffers to the length of the shorter, keeping its head.
pub fn truncate_pair(a: &AudioBuffer, b: &AudioBuffer) -> Result<(AudioBuffer, AudioBuffer)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if a.sample_rate != b.sample_rate {
        return Err(Error::RateMismatch {
            left: a.sample_rate,
            right: b.sample_rate,
        });
    }
    let len = a.len().min(b.len());
    Ok((a.head(len), b.head(len)))
}

/// Concatenates buffers that share a sample rate.
pub fn concat(buffers: &[AudioBuffer]) -> Result<AudioBuffer> {
    let first = buffers.first().ok_or(Error::EmptyBuffer)?;
    let mut samples = Vec::with_capacity(buffers.iter().map(AudioBuffer::len).sum());
    for b in buffers {
        if b.sample_rate != first.sample_rate {
            return Err(Error::RateMismatch {
                left: first.sample_rate,
                right: b.sample_rate,
            });
        }
        samples.extend_from_slice(&b.samples);
    }
    Ok(AudioBuffer::from_parts(samples, first.sample_rate, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn buf(samples: Vec<f32>, rate: u32) -> AudioBuffer {
        AudioBuffer::new(samples, rate).unwrap()
    }

    fn write_raw_wav(path: &Path, channels: u16, rate: u32, bits: u16, format: hound::SampleFormat, data: &[f32]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: bits,
            sample_format: format,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in data {
            match format {
                hound::SampleFormat::Float => w.write_sample(s).unwrap(),
                hound::SampleFormat::Int => w.write_sample(s as i16).unwrap(),
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn load_pcm16_mono_native_rate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let data: Vec<f32> = (0..44100).map(|i| (i % 100) as f32).collect();
        write_raw_wav(&p, 1, 44100, 16, hound::SampleFormat::Int, &data);
        let b = load_wav(&p).unwrap();
        assert_eq!(b.len(), 44100);
        assert_eq!(b.sample_rate(), 44100);
    }

    #[test]
    fn pcm16_full_scale_value() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw_wav(&p, 1, 8000, 16, hound::SampleFormat::Int, &[32767.0, -32768.0]);
        let b = load_wav(&p).unwrap();
        assert_eq!(b.samples()[0], 32767.0 / 32768.0);
        assert_eq!(b.samples()[1], -1.0);
    }

    #[test]
    fn stereo_downmix_by_mean() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let data: Vec<f32> = (0..200).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
        write_raw_wav(&p, 2, 22050, 32, hound::SampleFormat::Float, &data);
        let b = load_wav(&p).unwrap();
        assert_eq!(b.len(), 100);
        assert!(b.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn unsupported_bit_depth() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedEncoding(_))));
    }

    #[test]
    fn compressed_format_tag_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("alaw.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 4).to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&6u16.to_le_bytes()); // A-law
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&[0, 1, 2, 3]);
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedEncoding(_))));
    }

    #[test]
    fn garbage_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wav");
        std::fs::write(&p, b"RIFX\0\0\0\0garbage").unwrap();
        assert!(matches!(load_wav(&p), Err(Error::MalformedWav(_))));
    }

    #[test]
    fn truncated_data_chunk_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        save_wav(&buf(vec![0.25; 1000], 8000), &p, WavEncoding::Float32).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 100]).unwrap();
        let r = load_wav(&p);
        assert!(matches!(r, Err(Error::MalformedWav(_))), "{r:?}");
    }

    #[test]
    fn missing_file_is_io() {
        assert!(matches!(load_wav("/nonexistent/x.wav"), Err(Error::Io { .. })));
    }

    #[test]
    fn pcm16_roundtrip_within_one_step() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.wav");
        let src = buf(vec![0.5, -0.3, 0.999_99, 1.0, -1.0, 1e-6], 16000);
        save_wav(&src, &p, WavEncoding::Pcm16).unwrap();
        let back = load_wav(&p).unwrap();
        assert_eq!(back.samples()[0], 0.5);
        for (a, b) in src.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0, "{a} vs {b}");
        }
    }

    #[test]
    fn save_empty_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let r = save_wav(&buf(vec![], 8000), dir.path().join("e.wav"), WavEncoding::Float32);
        assert!(matches!(r, Err(Error::EmptyBuffer)));
    }

    #[test]
    fn peak_normalize_examples() {
        let n = peak_normalize(&buf(vec![0.5, -0.25], 8000));
        assert_eq!(n.samples(), &[1.0, -0.5]);
        let z = peak_normalize(&buf(vec![0.0; 4], 8000));
        assert_eq!(z.samples(), &[0.0; 4]);
        let p = buf(vec![1.0, -0.3, 0.2], 8000);
        assert_eq!(peak_normalize(&p), p);
    }

    #[test]
    fn resample_examples() {
        let b = buf((0..100).map(|i| i as f32 / 100.0).collect(), 44100);
        assert_eq!(resample(&b, 44100).unwrap(), b);
        let down = resample(&b, 16000).unwrap();
        assert_eq!(down.len(), 36);
        assert_eq!(down.sample_rate(), 16000);
        let c = buf(vec![0.37; 333], 22050);
        for rate in [8000, 16000, 44100, 48000, 96000] {
            let r = resample(&c, rate).unwrap();
            assert!(r.samples().iter().all(|&s| s == 0.37), "rate {rate}");
        }
        assert!(resample(&b, 0).is_err());
    }

    #[test]
    fn resample_upsample_interpolates_linearly() {
        let b = buf(vec![0.0, 1.0, 0.0], 100);
        let up = resample(&b, 200).unwrap();
        assert_eq!(up.samples(), &[0.0, 0.5, 1.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn window_counts() {
        let b = buf(vec![0.0; 5000], 44100);
        assert_eq!(window(&b, 1024, 1024).unwrap().len(), 4);
        assert_eq!(window(&b, 1024, 256).unwrap().len(), 16);
        let short = buf(vec![0.0; 1023], 44100);
        assert!(matches!(
            window(&short, 1024, 256),
            Err(Error::TooShort { len: 1023, needed: 1024 })
        ));
    }

    #[test]
    fn window_frames_follow_source() {
        let b = buf((0..20).map(|i| i as f32).collect(), 8000);
        let w = window(&b, 8, 5).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.frame(2).to_vec(), (10..18).map(|i| i as f32).collect::<Vec<_>>());
    }

    #[test]
    fn truncate_pair_keeps_head() {
        let a = buf(vec![0.1; 3 * 100], 100);
        let b = buf((0..500).map(|i| i as f32 / 500.0).collect(), 100);
        let (ta, tb) = truncate_pair(&a, &b).unwrap();
        assert_eq!(ta, a);
        assert_eq!(tb.len(), 300);
        assert_eq!(tb.samples(), &b.samples()[..300]);
        let (ta, tb) = truncate_pair(&b, &a).unwrap();
        assert_eq!((ta.len(), tb.len()), (300, 300));
        let (x, y) = truncate_pair(&a, &a).unwrap();
        assert_eq!((x, y), (a.clone(), a.clone()));
        let other = buf(vec![0.0; 10], 200);
        assert!(matches!(truncate_pair(&a, &other), Err(Error::RateMismatch { .. })));
    }

    proptest! {
        #[test]
        fn window_offsets_are_hop_spaced(len in 1usize..5000, size in 1usize..600, hop in 1usize..600) {
            prop_assume!(len >= size);
            let b = buf(vec![0.0; len], 8000);
            let w = window(&b, size, hop).unwrap();
            prop_assert_eq!(w.len(), (len - size) / hop + 1);
            let offs: Vec<usize> = w.offsets().collect();
            for pair in offs.windows(2) {
                prop_assert_eq!(pair[1] - pair[0], hop);
            }
            prop_assert!(offs.last().unwrap() + size <= len);
        }

        #[test]
        fn peak_normalize_is_idempotent(v in proptest::collection::vec(-4.0f32..4.0, 0..200)) {
            let once = peak_normalize(&buf(v, 8000));
            let twice = peak_normalize(&once);
            prop_assert_eq!(&once, &twice);
            if once.peak() > 0.0 {
                prop_assert_eq!(once.peak(), 1.0);
            }
        }

        #[test]
        fn float32_wav_roundtrip(v in proptest::collection::vec(-1.0f32..=1.0, 1..300), rate in 1u32..200_000) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("r.wav");
            let b = buf(v, rate);
            save_wav(&b, &p, WavEncoding::Float32).unwrap();
            let back = load_wav(&p).unwrap();
            prop_assert_eq!(back.sample_rate(), rate);
            prop_assert_eq!(
                back.samples().iter().map(|s| s.to_bits()).collect::<Vec<_>>(),
                b.samples().iter().map(|s| s.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
