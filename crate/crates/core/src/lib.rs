//! Raw-audio variational autoencoder toolkit.
//!
//! * [`audio`]: WAV I/O, normalization, resampling, windowing.
//! * [`vae`]: the autoencoder, its loss and gradient, Adam, training and checkpoints.
//! * [`latent`]: encoding audio into latent paths and the three interpolation strategies.
//! * [`features`] and [`som`]: bag-of-frames thumbnails and Self-Organizing Map clustering.
//! * [`bench`]: decode latency measurement.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! name the common instantiations.

pub mod audio;
pub mod bench;
pub mod container;
mod error;
pub mod features;
pub mod latent;
mod scalar;
pub mod som;
pub mod vae;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use audio::{AudioBuffer, WavEncoding, WindowSet};
pub use latent::{CurveSpec, InterpolationCurve, LatentPath, SynthesisMode, SynthesisOptions};
pub use som::{Cluster, SomMap, SomParams, Thumbnail};
pub use vae::{Checkpoint, LatentStats, Vae, VaeHyperParams};

pub type Vae32 = Vae<f32>;
pub type Vae64 = Vae<f64>;
pub type Checkpoint32 = Checkpoint<f32>;
pub type LatentStats32 = LatentStats<f32>;
pub type LatentPath32 = LatentPath<f32>;
pub type SomMap32 = SomMap<f32>;
pub type SomMap64 = SomMap<f64>;
pub type Thumbnail32 = Thumbnail<f32>;
