use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::latent::LatentPath;
use crate::scalar::Scalar;

/// Writes `idx,mu_0..mu_{M-1},lv_0..lv_{M-1}` followed by one row per window.
///
/// `latent_dim` sets the header width, so an empty path still gets a full header.
pub fn export_latents<T: Scalar, W: Write>(path: &LatentPath<T>, latent_dim: usize, out: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    write!(w, "idx")?;
    for j in 0..latent_dim {
        write!(w, ",mu_{j}")?;
    }
    for j in 0..latent_dim {
        write!(w, ",lv_{j}")?;
    }
    writeln!(w)?;
    for (i, s) in path.stats.iter().enumerate() {
        write!(w, "{i}")?;
        for v in s.mu.iter().chain(&s.logvar) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn export_latents_to_file<T: Scalar>(path: &LatentPath<T>, latent_dim: usize, file: impl AsRef<Path>) -> Result<()> {
    let file = file.as_ref();
    let f = std::fs::File::create(file).map_err(|e| Error::io(file, e))?;
    export_latents(path, latent_dim, f).map_err(|e| Error::io(file, e))
}
