//! Bag-of-frames thumbnails: per-frame spectral features summarized by their
//! means and standard deviations over a whole file.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{window, AudioBuffer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const LOG_FLOOR: f64 = 1e-10;

/// Analysis recipe for a thumbnail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureConfig {
    pub window_size: usize,
    pub hop: usize,
    /// Cepstral coefficients kept, counting the 0th.
    pub n_mfcc: usize,
    pub n_mels: usize,
    pub centroid: bool,
    pub rms: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window_size: 2048,
            hop: 1024,
            n_mfcc: 13,
            n_mels: 40,
            centroid: true,
            rms: true,
        }
    }
}

impl FeatureConfig {
    pub fn per_frame(&self) -> usize {
        self.n_mfcc + usize::from(self.centroid) + usize::from(self.rms)
    }

    /// Thumbnail dimension: means followed by standard deviations.
    pub fn dimension(&self) -> usize {
        2 * self.per_frame()
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 || self.hop == 0 {
            return Err(Error::InvalidParameter(format!(
                "analysis window {} / hop {} out of range",
                self.window_size, self.hop
            )));
        }
        if self.n_mfcc > 0 && self.n_mels == 0 {
            return Err(Error::InvalidParameter("mfcc needs at least one mel band".into()));
        }
        if self.n_mfcc > self.n_mels {
            return Err(Error::InvalidParameter(format!(
                "n_mfcc {} exceeds n_mels {}",
                self.n_mfcc, self.n_mels
            )));
        }
        if self.per_frame() == 0 {
            return Err(Error::InvalidParameter("no features selected".into()));
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.n_mfcc).map(|i| format!("mfcc_{i}")).collect();
        if self.centroid {
            names.push("centroid".into());
        }
        if self.rms {
            names.push("rms".into());
        }
        names
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "win={};hop={};mfcc={};mels={};centroid={};rms={}",
            self.window_size,
            self.hop,
            self.n_mfcc,
            self.n_mels,
            u8::from(self.centroid),
            u8::from(self.rms)
        )
    }
}

impl FromStr for FeatureConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = FeatureConfig::default();
        for field in s.split(';').filter(|f| !f.is_empty()) {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("feature config field `{field}`")))?;
            let bad = || Error::InvalidParameter(format!("feature config value `{field}`"));
            let flag = |v: &str| match v {
                "1" | "true" => Ok(true),
                "0" | "false" => Ok(false),
                _ => Err(bad()),
            };
            match k {
                "win" => cfg.window_size = v.parse().map_err(|_| bad())?,
                "hop" => cfg.hop = v.parse().map_err(|_| bad())?,
                "mfcc" => cfg.n_mfcc = v.parse().map_err(|_| bad())?,
                "mels" => cfg.n_mels = v.parse().map_err(|_| bad())?,
                "centroid" => cfg.centroid = flag(v)?,
                "rms" => cfg.rms = flag(v)?,
                _ => return Err(Error::InvalidParameter(format!("unknown feature config key `{k}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Summary vector of one audio file.
#[derive(Debug, Clone, PartialEq)]
pub struct Thumbnail<T> {
    pub features: Vec<T>,
    pub file_ref: String,
    pub config: FeatureConfig,
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale spanning 0 Hz to Nyquist, one row per
/// band over the `n_fft / 2 + 1` non-negative frequency bins.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let bins = n_fft / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * sample_rate as f64 / n_fft as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = bin_hz(k);
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II, keeping the first `keep` coefficients.
pub fn dct2(x: &[f64], keep: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..keep)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n).cos())
                .sum();
            scale * s
        })
        .collect()
}

struct FrameAnalyzer {
    config: FeatureConfig,
    hann: Vec<f64>,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    filters: Vec<Vec<f64>>,
    bin_hz: Vec<f64>,
    scratch: Vec<Complex<f64>>,
}

impl FrameAnalyzer {
    fn new(config: &FeatureConfig, sample_rate: u32) -> Self {
        let n = config.window_size;
        let hann = (0..n)
            .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
            .collect();
        Self {
            config: config.clone(),
            hann,
            fft: FftPlanner::new().plan_fft_forward(n),
            filters: mel_filterbank(config.n_mels, n, sample_rate),
            bin_hz: (0..n / 2 + 1).map(|k| k as f64 * sample_rate as f64 / n as f64).collect(),
            scratch: vec![Complex::default(); n],
        }
    }

    fn analyze(&mut self, frame: &[f32], out: &mut Vec<f64>) {
        out.clear();
        for ((c, &x), &w) in self.scratch.iter_mut().zip(frame).zip(&self.hann) {
            *c = Complex::new(x as f64 * w, 0.0);
        }
        self.fft.process(&mut self.scratch);
        let bins = self.bin_hz.len();
        let mag: Vec<f64> = self.scratch[..bins].iter().map(|c| c.norm()).collect();

        if self.config.n_mfcc > 0 {
            let log_mel: Vec<f64> = self
                .filters
                .iter()
                .map(|f| {
                    let e: f64 = f.iter().zip(&mag).map(|(w, m)| w * m * m).sum();
                    (e + LOG_FLOOR).ln()
                })
                .collect();
            out.extend(dct2(&log_mel, self.config.n_mfcc));
        }
        if self.config.centroid {
            let total: f64 = mag.iter().sum();
            let c = if total > 0.0 {
                mag.iter().zip(&self.bin_hz).map(|(m, f)| m * f).sum::<f64>() / total
            } else {
                0.0
            };
            out.push(c);
        }
        if self.config.rms {
            let ms = frame.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>() / frame.len() as f64;
            out.push(ms.sqrt());
        }
    }
}

/// Per-frame feature matrix, one row per analysis window.
pub fn frame_features(buffer: &AudioBuffer, config: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let frames = window(buffer, config.window_size, config.hop)?;
    let mut analyzer = FrameAnalyzer::new(config, buffer.sample_rate());
    let mut rows = Vec::with_capacity(frames.len());
    for frame in frames.frames().rows() {
        let mut row = Vec::with_capacity(config.per_frame());
        analyzer.analyze(frame.as_slice().expect("standard layout"), &mut row);
        rows.push(row);
    }
    Ok(rows)
}

/// Means then population standard deviations of every configured feature.
pub fn extract_thumbnail<T: Scalar>(buffer: &AudioBuffer, config: &FeatureConfig) -> Result<Thumbnail<T>> {
    let rows = frame_features(buffer, config)?;
    let d = config.per_frame();
    let mut mean = vec![0.0f64; d];
    let mut m2 = vec![0.0f64; d];
    for (n, row) in rows.iter().enumerate() {
        let n = (n + 1) as f64;
        for j in 0..d {
            let delta = row[j] - mean[j];
            mean[j] += delta / n;
            m2[j] += delta * (row[j] - mean[j]);
        }
    }
    let count = rows.len() as f64;
    let features: Vec<T> = mean
        .iter()
        .copied()
        .chain(m2.iter().map(|&s| (s / count).max(0.0).sqrt()))
        .map(T::of)
        .collect();
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("thumbnail contains non-finite values".into()));
    }
    Ok(Thumbnail {
        features,
        file_ref: buffer.source_label().unwrap_or_default().to_string(),
        config: config.clone(),
    })
}
