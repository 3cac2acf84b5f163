use std::path::Path;

use ndarray::{Array1, Array2};

use crate::container::{ContainerReader, ContainerWriter, VAE_MAGIC};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vae::adam::AdamState;
use crate::vae::model::{Dense, Vae, VaeHyperParams};
use crate::vae::train::EpochLoss;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Trained model plus optimizer state and per-epoch loss history.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model: Vae<T>,
    pub adam: AdamState<T>,
    pub loss_history: Vec<EpochLoss<T>>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn hyper(&self) -> &VaeHyperParams {
        self.model.hyper()
    }
}

fn hyper_header(h: &VaeHyperParams, version: u32, adam_step: u64, epochs_done: usize) -> Vec<(String, String)> {
    let hidden = h
        .hidden_sizes
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",");
    [
        ("format_version", version.to_string()),
        ("window_size", h.window_size.to_string()),
        ("latent_dim", h.latent_dim.to_string()),
        ("hidden_sizes", hidden),
        ("alpha", h.alpha.to_string()),
        ("learning_rate", h.learning_rate.to_string()),
        ("epochs", h.epochs.to_string()),
        ("batch_size", h.batch_size.to_string()),
        ("sample_rate", h.sample_rate.to_string()),
        ("seed", h.seed.to_string()),
        ("adam_step", adam_step.to_string()),
        ("epochs_trained", epochs_done.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn write_layers(w: &mut ContainerWriter, layers: &[Dense<f32>]) {
    for l in layers {
        let (o, i) = l.weight.dim();
        w.tensor(&[o, i], l.weight.as_slice().expect("standard layout"));
        w.tensor(&[o], l.bias.as_slice().expect("standard layout"));
    }
}

fn read_layers(r: &mut ContainerReader<'_>, shapes: &[(usize, usize)]) -> Result<Vec<Dense<f32>>> {
    shapes
        .iter()
        .map(|&(o, i)| {
            let weight = Array2::from_shape_vec((o, i), r.tensor_shaped(&[o, i])?)
                .map_err(|e| Error::CorruptFile(e.to_string()))?;
            let bias = Array1::from(r.tensor_shaped(&[o])?);
            Ok(Dense { weight, bias })
        })
        .collect()
}

fn encode(ckpt: &Checkpoint<f32>, version: u32) -> Vec<u8> {
    let header = hyper_header(ckpt.hyper(), version, ckpt.adam.step, ckpt.loss_history.len());
    let mut w = ContainerWriter::new(VAE_MAGIC, &header);
    write_layers(&mut w, ckpt.model.layers());
    write_layers(&mut w, &ckpt.adam.m);
    write_layers(&mut w, &ckpt.adam.v);
    let losses: Vec<f32> = ckpt.loss_history.iter().flat_map(|l| [l.recon, l.kl]).collect();
    w.tensor(&[ckpt.loss_history.len(), 2], &losses);
    w.finish()
}

/// Serializes a checkpoint to its binary container form.
pub fn checkpoint_to_bytes(ckpt: &Checkpoint<f32>) -> Vec<u8> {
    encode(ckpt, CHECKPOINT_FORMAT_VERSION)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint<f32>> {
    let mut r = ContainerReader::open(bytes, VAE_MAGIC)?;
    let version = r.get("format_version")?;
    if version != CHECKPOINT_FORMAT_VERSION.to_string() {
        return Err(Error::FormatVersionMismatch {
            found: version.to_string(),
            supported: CHECKPOINT_FORMAT_VERSION,
        });
    }
    r.verify()?;

    let hidden_raw = r.get("hidden_sizes")?;
    let hidden_sizes = if hidden_raw.is_empty() {
        Vec::new()
    } else {
        hidden_raw
            .split(',')
            .map(|s| s.parse().map_err(|_| Error::CorruptFile(format!("bad hidden size `{s}`"))))
            .collect::<Result<Vec<usize>>>()?
    };
    let hyper = VaeHyperParams {
        window_size: r.parse("window_size")?,
        latent_dim: r.parse("latent_dim")?,
        hidden_sizes,
        alpha: r.parse("alpha")?,
        learning_rate: r.parse("learning_rate")?,
        epochs: r.parse("epochs")?,
        batch_size: r.parse("batch_size")?,
        sample_rate: r.parse("sample_rate")?,
        seed: r.parse("seed")?,
    };
    hyper
        .validate()
        .map_err(|e| Error::CorruptFile(format!("invalid hyperparameters: {e}")))?;
    let step: u64 = r.parse("adam_step")?;
    let epochs_done: usize = r.parse("epochs_trained")?;

    let shapes = hyper.layer_shapes();
    let layers = read_layers(&mut r, &shapes)?;
    let m = read_layers(&mut r, &shapes)?;
    let v = read_layers(&mut r, &shapes)?;
    let losses = r.tensor_shaped(&[epochs_done, 2])?;
    r.finish()?;

    Ok(Checkpoint {
        model: Vae::from_layers(hyper, layers)?,
        adam: AdamState { m, v, step },
        loss_history: losses
            .chunks_exact(2)
            .map(|c| EpochLoss { recon: c[0], kl: c[1] })
            .collect(),
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_bytes(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
