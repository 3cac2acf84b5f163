//! Kohonen Self-Organizing Map over file thumbnails, best-matching-unit queries,
//! cluster listings and cluster concatenation.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{concat, resample, AudioBuffer};
use crate::container::{ContainerReader, ContainerWriter, SOM_MAGIC};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::scalar::Scalar;

pub use crate::features::{extract_thumbnail, Thumbnail};

pub const SOM_FORMAT_VERSION: u32 = 1;

/// Prototypes start at randomly chosen samples pulled this far toward the data mean.
const INIT_SHRINK: f64 = 0.1;

/// Concatenated cluster durations inside this band (seconds) pass without a warning.
pub const TARGET_DURATION_SECS: (f64, f64) = (10.0, 30.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SomParams {
    pub width: usize,
    pub height: usize,
    pub epochs: usize,
    pub lr0: f64,
    /// Initial Gaussian neighbourhood radius in grid units.
    pub radius0: f64,
    /// Radius reached at the last presentation.
    pub radius_final: f64,
    pub seed: u64,
}

impl SomParams {
    /// Defaults for a `width x height` grid: 100 epochs, lr 0.1, radius from half
    /// the longer side (at least 1) down to 1.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            epochs: 100,
            lr0: 0.1,
            radius0: (width.max(height) as f64 / 2.0).max(1.0),
            radius_final: 1.0,
            seed: 0,
        }
    }

    pub fn units(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("grid {}x{} must be at least 1x1", self.width, self.height));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.radius0 > 0.0 && self.radius0.is_finite() && self.radius_final > 0.0 && self.radius_final.is_finite()) {
            return bad(format!(
                "radii must be positive, got {} -> {}",
                self.radius0, self.radius_final
            ));
        }
        Ok(())
    }
}

/// Grid side for `n` files: `max(2, round(sqrt(5 * sqrt(n))))`.
pub fn default_grid(n: usize) -> usize {
    ((5.0 * (n as f64).sqrt()).sqrt().round() as usize).max(2)
}

/// Trained map. Prototypes live in standardized feature space, one row per
/// unit in row-major `(y, x)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SomMap<T> {
    pub params: SomParams,
    pub feature_config: FeatureConfig,
    pub prototypes: Array2<T>,
    pub mean: Vec<T>,
    pub scale: Vec<T>,
    /// Mean distance of each training vector to its BMU: entry 0 for the
    /// freshly initialized map, entry `e` after epoch `e`.
    pub qe_history: Vec<T>,
}

/// Files mapped to one grid unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub unit: (usize, usize),
    pub members: Vec<String>,
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ShapeMismatch { what, expected, got });
    }
    Ok(())
}

fn sq_dist<T: Scalar>(a: ArrayView1<'_, T>, b: &[T]) -> T {
    a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum()
}

/// Row-major argmin with strict comparison, so ties keep the smallest `(y, x)`.
fn nearest<T: Scalar>(prototypes: &Array2<T>, v: &[T]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (u, row) in prototypes.rows().into_iter().enumerate() {
        let d = sq_dist(row, v);
        if d < best.1 {
            best = (u, d);
        }
    }
    best
}

impl<T: Scalar> SomMap<T> {
    pub fn width(&self) -> usize {
        self.params.width
    }

    pub fn height(&self) -> usize {
        self.params.height
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn unit_index(&self, x: usize, y: usize) -> usize {
        y * self.params.width + x
    }

    pub fn unit_coords(&self, index: usize) -> (usize, usize) {
        (index % self.params.width, index / self.params.width)
    }

    /// Prototype of unit `(x, y)` in standardized space.
    pub fn prototype(&self, x: usize, y: usize) -> ArrayView1<'_, T> {
        self.prototypes.row(self.unit_index(x, y))
    }

    /// Prototype of unit `(x, y)` mapped back to raw feature units.
    pub fn prototype_original(&self, x: usize, y: usize) -> Vec<T> {
        self.prototype(x, y)
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&p, (&m, &s))| p * s + m)
            .collect()
    }

    pub fn standardize(&self, features: &[T]) -> Result<Vec<T>> {
        check_dim("SOM query", self.dim(), features.len())?;
        Ok(features
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    /// Grid coordinate `(x, y)` of the unit nearest to `features`.
    pub fn best_matching_unit(&self, features: &[T]) -> Result<(usize, usize)> {
        let z = self.standardize(features)?;
        Ok(self.unit_coords(nearest(&self.prototypes, &z).0))
    }

    /// Mean Euclidean distance, in standardized space, of each vector to its BMU.
    pub fn quantization_error(&self, data: &[Vec<T>]) -> Result<T> {
        if data.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut total = T::zero();
        for v in data {
            let z = self.standardize(v)?;
            total += nearest(&self.prototypes, &z).1.sqrt();
        }
        Ok(total / T::of(data.len() as f64))
    }
}

/// Per-feature mean and spread computed in `f64`; a (near) constant feature gets spread 1.
fn standardization<T: Scalar>(data: &[Vec<T>], dim: usize) -> (Vec<T>, Vec<T>) {
    let n = data.len() as f64;
    let mut mean = vec![0.0f64; dim];
    for v in data {
        for (m, &x) in mean.iter_mut().zip(v) {
            *m += x.as_f64();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; dim];
    for v in data {
        for ((s, &x), m) in var.iter_mut().zip(v).zip(&mean) {
            let d = x.as_f64() - m;
            *s += d * d;
        }
    }
    let scale = var
        .iter()
        .zip(&mean)
        .map(|(&s, m)| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 * m.abs().max(1.0) {
                sd
            } else {
                1.0
            }
        })
        .map(T::of)
        .collect();
    (mean.into_iter().map(T::of).collect(), scale)
}

/// Trains a map on thumbnails that all share one feature configuration.
pub fn train_som<T: Scalar>(thumbnails: &[Thumbnail<T>], params: &SomParams) -> Result<SomMap<T>> {
    let first = thumbnails.first().ok_or(Error::EmptyInput)?;
    for t in thumbnails {
        if t.config != first.config {
            return Err(Error::ConfigMismatch {
                map: first.config.to_string(),
                thumbnail: t.config.to_string(),
            });
        }
    }
    let data: Vec<Vec<T>> = thumbnails.iter().map(|t| t.features.clone()).collect();
    train_som_vectors(&data, &first.config, params)
}

/// Trains a map on raw vectors of dimension `config.dimension()`.
///
/// Features are standardized, prototypes start at randomly chosen data points,
/// and every presentation moves all prototypes toward the sample by
/// `lr * exp(-d^2 / (2 r^2))`, `d` being grid distance to the BMU. `lr` and `r`
/// decay exponentially per presentation from `(lr0, radius0)` to
/// `(0.01 lr0, radius_final)`. The presentation order is reshuffled each epoch.
pub fn train_som_vectors<T: Scalar>(data: &[Vec<T>], config: &FeatureConfig, params: &SomParams) -> Result<SomMap<T>> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let dim = config.dimension();
    for v in data {
        check_dim("SOM training vector", dim, v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite SOM training vector".into()));
        }
    }
    let (mean, scale) = standardization(data, dim);
    let z: Vec<Vec<T>> = data
        .iter()
        .map(|v| {
            v.iter()
                .zip(mean.iter().zip(&scale))
                .map(|(&x, (&m, &s))| (x - m) / s)
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let units = params.units();
    let n = z.len();
    let picks: Vec<usize> = if n >= units {
        rand::seq::index::sample(&mut rng, n, units).into_vec()
    } else {
        (0..units).map(|_| rng.random_range(0..n)).collect()
    };
    let mut prototypes = Array2::<T>::zeros((units, dim));
    for (u, &p) in picks.iter().enumerate() {
        prototypes
            .row_mut(u)
            .iter_mut()
            .zip(&z[p])
            .for_each(|(d, &s)| *d = s * T::of(INIT_SHRINK));
    }

    let coords: Vec<(f64, f64)> = (0..units)
        .map(|u| ((u % params.width) as f64, (u / params.width) as f64))
        .collect();
    let total_steps = params.epochs * n;
    let last = (total_steps.max(2) - 1) as f64;
    let lr_ratio = 0.01f64;
    let r_ratio = params.radius_final / params.radius0;

    let mut order: Vec<usize> = (0..n).collect();
    let mut map = SomMap {
        params: params.clone(),
        feature_config: config.clone(),
        prototypes,
        mean,
        scale,
        qe_history: Vec::with_capacity(params.epochs + 1),
    };
    let qe_now = |p: &Array2<T>| z.iter().map(|v| nearest(p, v).1.sqrt()).sum::<T>() / T::of(n as f64);
    map.qe_history.push(qe_now(&map.prototypes));
    let mut step = 0usize;
    let mut h = vec![T::zero(); units];
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let t = step as f64 / last;
            let lr = params.lr0 * lr_ratio.powf(t);
            let r = params.radius0 * r_ratio.powf(t);
            let two_r2 = 2.0 * r * r;
            let x = &z[i];
            let (bmu, _) = nearest(&map.prototypes, x);
            let (bx, by) = coords[bmu];
            for (u, hu) in h.iter_mut().enumerate() {
                let (ux, uy) = coords[u];
                let d2 = (ux - bx).powi(2) + (uy - by).powi(2);
                *hu = T::of(lr * (-d2 / two_r2).exp());
            }
            for (mut row, &hu) in map.prototypes.rows_mut().into_iter().zip(&h) {
                if hu == T::zero() {
                    continue;
                }
                row.iter_mut().zip(x).for_each(|(p, &xv)| *p += hu * (xv - *p));
            }
            step += 1;
        }
        let qe = qe_now(&map.prototypes);
        if !qe.is_finite() {
            return Err(Error::NonFinite {
                epoch: map.qe_history.len(),
            });
        }
        map.qe_history.push(qe);
    }
    Ok(map)
}

/// Maps every thumbnail to its BMU. Only occupied units are returned, largest
/// first; equal counts keep row-major `(y, x)` order.
pub fn assign_clusters<T: Scalar>(map: &SomMap<T>, thumbnails: &[Thumbnail<T>]) -> Result<Vec<Cluster>> {
    let mut members: Vec<Vec<String>> = vec![Vec::new(); map.params.units()];
    for t in thumbnails {
        if t.config != map.feature_config {
            return Err(Error::ConfigMismatch {
                map: map.feature_config.to_string(),
                thumbnail: t.config.to_string(),
            });
        }
        let (x, y) = map.best_matching_unit(&t.features)?;
        members[map.unit_index(x, y)].push(t.file_ref.clone());
    }
    let mut clusters: Vec<Cluster> = members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(u, m)| Cluster {
            unit: map.unit_coords(u),
            members: m,
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then((a.unit.1, a.unit.0).cmp(&(b.unit.1, b.unit.0)))
    });
    Ok(clusters)
}

/// One line per cluster: `x,y: file1;file2;...`.
pub fn format_clusters(clusters: &[Cluster]) -> String {
    let mut s = String::new();
    for c in clusters {
        let _ = writeln!(s, "{},{}: {}", c.unit.0, c.unit.1, c.members.join(";"));
    }
    s
}

/// Parses an `x,y` unit coordinate.
pub fn parse_unit(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidParameter(format!("unit must look like `x,y`, got `{s}`"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    Ok((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
}

/// Loads the members in lexicographic order, resamples each to `target_rate`
/// and concatenates them.
pub fn concatenate_cluster(
    cluster: &Cluster,
    mut loader: impl FnMut(&str) -> Result<AudioBuffer>,
    target_rate: u32,
) -> Result<AudioBuffer> {
    if cluster.members.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut names: Vec<&String> = cluster.members.iter().collect();
    names.sort();
    let buffers = names
        .into_iter()
        .map(|m| resample(&loader(m)?, target_rate))
        .collect::<Result<Vec<_>>>()?;
    concat(&buffers)
}

/// Warning text when a concatenated cluster falls outside [`TARGET_DURATION_SECS`].
pub fn duration_warning(buffer: &AudioBuffer) -> Option<String> {
    let d = buffer.duration();
    let (lo, hi) = TARGET_DURATION_SECS;
    if (lo..=hi).contains(&d) {
        None
    } else {
        Some(format!("concatenated cluster lasts {d:.2} s, outside the {lo}-{hi} s target band"))
    }
}

fn encode(map: &SomMap<f32>, version: u32) -> Vec<u8> {
    let p = &map.params;
    let header: Vec<(String, String)> = [
        ("format_version", version.to_string()),
        ("width", p.width.to_string()),
        ("height", p.height.to_string()),
        ("dim", map.dim().to_string()),
        ("epochs", p.epochs.to_string()),
        ("lr0", p.lr0.to_string()),
        ("radius0", p.radius0.to_string()),
        ("radius_final", p.radius_final.to_string()),
        ("seed", p.seed.to_string()),
        ("feature_config", map.feature_config.to_string()),
        ("qe_entries", map.qe_history.len().to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let mut w = ContainerWriter::new(SOM_MAGIC, &header);
    let protos = map.prototypes.as_standard_layout();
    w.tensor(&[p.units(), map.dim()], protos.as_slice().expect("standard layout"));
    w.tensor(&[map.dim()], &map.mean);
    w.tensor(&[map.dim()], &map.scale);
    w.tensor(&[map.qe_history.len()], &map.qe_history);
    w.finish()
}

pub fn som_to_bytes(map: &SomMap<f32>) -> Vec<u8> {
    encode(map, SOM_FORMAT_VERSION)
}

pub fn som_from_bytes(bytes: &[u8]) -> Result<SomMap<f32>> {
    let mut r = ContainerReader::open(bytes, SOM_MAGIC)?;
    let version = r.get("format_version")?;
    if version != SOM_FORMAT_VERSION.to_string() {
        return Err(Error::FormatVersionMismatch {
            found: version.to_string(),
            supported: SOM_FORMAT_VERSION,
        });
    }
    r.verify()?;
    let params = SomParams {
        width: r.parse("width")?,
        height: r.parse("height")?,
        epochs: r.parse("epochs")?,
        lr0: r.parse("lr0")?,
        radius0: r.parse("radius0")?,
        radius_final: r.parse("radius_final")?,
        seed: r.parse("seed")?,
    };
    params
        .validate()
        .map_err(|e| Error::CorruptFile(format!("invalid SOM parameters: {e}")))?;
    let dim: usize = r.parse("dim")?;
    let feature_config: FeatureConfig = r
        .get("feature_config")?
        .parse()
        .map_err(|e| Error::CorruptFile(format!("bad feature_config: {e}")))?;
    if feature_config.dimension() != dim {
        return Err(Error::CorruptFile(format!(
            "feature_config dimension {} does not match stored dimension {dim}",
            feature_config.dimension()
        )));
    }
    let qe_entries: usize = r.parse("qe_entries")?;
    let protos = r.tensor_shaped(&[params.units(), dim])?;
    let mean = r.tensor_shaped(&[dim])?;
    let scale = r.tensor_shaped(&[dim])?;
    let qe_history = r.tensor_shaped(&[qe_entries])?;
    r.finish()?;
    Ok(SomMap {
        prototypes: Array2::from_shape_vec((params.units(), dim), protos).map_err(|e| Error::CorruptFile(e.to_string()))?,
        params,
        feature_config,
        mean,
        scale,
        qe_history,
    })
}

pub fn save_som(map: &SomMap<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, som_to_bytes(map)).map_err(|e| Error::io(path, e))
}

pub fn load_som(path: impl AsRef<Path>) -> Result<SomMap<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    som_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Feature recipe whose thumbnail dimension is `2 * k`.
    fn cfg(k: usize) -> FeatureConfig {
        FeatureConfig {
            n_mfcc: k,
            n_mels: k.max(1),
            centroid: false,
            rms: false,
            ..Default::default()
        }
    }

    fn thumbs(data: &[Vec<f64>], k: usize) -> Vec<Thumbnail<f64>> {
        data.iter()
            .enumerate()
            .map(|(i, v)| Thumbnail {
                features: v.clone(),
                file_ref: format!("f{i:03}.wav"),
                config: cfg(k),
            })
            .collect()
    }

    fn gaussian(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0 + 1.0).collect())
            .collect()
    }

    #[test]
    fn grid_rule() {
        assert_eq!(default_grid(1), 2);
        assert_eq!(default_grid(100), 7);
        assert_eq!(default_grid(53_318), 34);
    }

    #[test]
    fn empty_and_bad_input() {
        assert!(matches!(train_som::<f64>(&[], &SomParams::new(2, 2)), Err(Error::EmptyInput)));
        let data = gaussian(5, 4, 0);
        assert!(matches!(
            train_som_vectors(&data, &cfg(3), &SomParams::new(2, 2)),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(train_som_vectors(&data, &cfg(2), &SomParams::new(0, 2)).is_err());
        let mut t = thumbs(&data, 2);
        t[3].config.hop = 512;
        assert!(matches!(train_som(&t, &SomParams::new(2, 2)), Err(Error::ConfigMismatch { .. })));
    }

    #[test]
    fn deterministic() {
        let t = thumbs(&gaussian(40, 4, 1), 2);
        let p = SomParams { seed: 9, epochs: 20, ..SomParams::new(3, 2) };
        assert_eq!(train_som(&t, &p).unwrap(), train_som(&t, &p).unwrap());
    }

    #[test]
    fn one_by_one_reaches_mean() {
        let data = gaussian(3000, 4, 2);
        let p = SomParams {
            epochs: 100,
            lr0: 5e-4,
            seed: 4,
            ..SomParams::new(1, 1)
        };
        let map = train_som_vectors(&data, &cfg(2), &p).unwrap();
        // oracle: mean of the standardized data, computed directly
        let mut want = vec![0.0; 4];
        for v in &data {
            let z = map.standardize(v).unwrap();
            want.iter_mut().zip(&z).for_each(|(w, x)| *w += x / data.len() as f64);
        }
        let dist = map
            .prototype(0, 0)
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(dist < 1e-3, "distance {dist}");
    }

    #[test]
    fn bmu_rules() {
        let data = gaussian(30, 4, 3);
        let mut map = train_som_vectors(&data, &cfg(2), &SomParams { epochs: 5, ..SomParams::new(3, 2) }).unwrap();
        let raw = map.prototype_original(2, 1);
        assert_eq!(map.best_matching_unit(&raw).unwrap(), (2, 1));
        assert!(matches!(map.best_matching_unit(&[0.0; 3]), Err(Error::ShapeMismatch { .. })));
        map.prototypes.fill(0.0);
        assert_eq!(map.best_matching_unit(&raw).unwrap(), (0, 0));
        // Units (1,0) and (0,1) equidistant; (1,0) comes first in (y, x) order.
        map.prototypes.fill(100.0);
        map.prototypes.row_mut(1).fill(1.0);
        map.prototypes.row_mut(3).fill(1.0);
        assert_eq!(map.best_matching_unit(&map.mean.clone()).unwrap(), (1, 0));
    }

    #[test]
    fn clusters_partition() {
        let data = gaussian(25, 4, 5);
        let t = thumbs(&data, 2);
        let map = train_som(&t, &SomParams { epochs: 10, ..SomParams::new(3, 3) }).unwrap();
        let cl = assign_clusters(&map, &t).unwrap();
        assert_eq!(cl.iter().map(|c| c.members.len()).sum::<usize>(), 25);
        assert!(cl.windows(2).all(|w| w[0].members.len() >= w[1].members.len()));
        let mut all: Vec<String> = cl.iter().flat_map(|c| c.members.clone()).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 25);

        let one = assign_clusters(&map, &t[..1]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].members, vec!["f000.wav".to_string()]);

        let same = thumbs(&vec![data[0].clone(); 6], 2);
        assert_eq!(assign_clusters(&map, &same).unwrap().len(), 1);

        let mut other = t[0].clone();
        other.config.n_mels = 30;
        assert!(matches!(assign_clusters(&map, &[other]), Err(Error::ConfigMismatch { .. })));
    }

    #[test]
    fn listing_format() {
        let cl = vec![
            Cluster {
                unit: (3, 1),
                members: vec!["a.wav".into(), "b.wav".into()],
            },
            Cluster {
                unit: (0, 0),
                members: vec!["c.wav".into()],
            },
        ];
        assert_eq!(format_clusters(&cl), "3,1: a.wav;b.wav\n0,0: c.wav\n");
        assert_eq!(parse_unit("3, 1").unwrap(), (3, 1));
        assert!(parse_unit("3").is_err());
    }

    #[test]
    fn concatenation_order_and_band() {
        let lens = [("b", 2usize), ("c", 3), ("a", 1)];
        let cluster = Cluster {
            unit: (0, 0),
            members: lens.iter().map(|(n, _)| n.to_string()).collect(),
        };
        let loader = |name: &str| {
            let (i, secs) = lens.iter().enumerate().find(|(_, (n, _))| *n == name).map(|(i, l)| (i, l.1)).unwrap();
            AudioBuffer::new(vec![i as f32; secs * 100], 100)
        };
        let out = concatenate_cluster(&cluster, loader, 100).unwrap();
        assert_eq!(out.len(), 600);
        assert_eq!(out.samples()[0], 2.0); // "a" first
        assert_eq!(out.samples()[100], 0.0); // then "b"
        assert_eq!(out.samples()[300], 1.0);
        assert!(duration_warning(&out).is_some());

        let single = Cluster {
            unit: (0, 0),
            members: vec!["x".into()],
        };
        let buf = AudioBuffer::new(vec![0.25; 1500], 100).unwrap();
        let got = concatenate_cluster(&single, |_| Ok(buf.clone()), 100).unwrap();
        assert_eq!(got.samples(), buf.samples());
        assert!(duration_warning(&got).is_none());
        let empty = Cluster { unit: (0, 0), members: vec![] };
        assert!(concatenate_cluster(&empty, |_| Ok(buf.clone()), 100).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let data: Vec<Vec<f32>> = gaussian(20, 30, 6)
            .into_iter()
            .map(|v| v.into_iter().map(|x| x as f32).collect())
            .collect();
        let map = train_som_vectors(&data, &FeatureConfig::default(), &SomParams { epochs: 4, seed: 1, ..SomParams::new(2, 3) }).unwrap();
        let bytes = som_to_bytes(&map);
        assert_eq!(&bytes[..7], b"RASOM\0\x01");
        let back = som_from_bytes(&bytes).unwrap();
        assert_eq!(back, map);
        assert_eq!(som_to_bytes(&back), bytes);
        assert!(matches!(som_from_bytes(&bytes[..bytes.len() - 9]), Err(Error::CorruptFile(_))));
        assert!(matches!(som_from_bytes(&encode(&map, 2)), Err(Error::FormatVersionMismatch { .. })));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.rasom");
        save_som(&map, &p).unwrap();
        assert_eq!(load_som(&p).unwrap(), map);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn quantization_error_settles(seed in any::<u64>(), n in 2usize..40, w in 1usize..4, h in 1usize..4) {
            let data = gaussian(n, 4, seed);
            let p = SomParams { epochs: 30, seed, ..SomParams::new(w, h) };
            let map = train_som_vectors(&data, &cfg(2), &p).unwrap();
            let qe = &map.qe_history;
            prop_assert_eq!(qe.len(), 31);
            for pair in qe.windows(2) {
                prop_assert!(pair[1] <= pair[0] * 1.05, "{:?}", qe);
            }
            // A single unit settles on the mean, not the distance-minimizing median,
            // and a radius-1 neighbourhood keeps sparse small maps partly collapsed.
            if w * h >= 2 && n >= 2 * w * h {
                prop_assert!(qe[30] < qe[0], "{:?}", qe);
            }
            let direct = map.quantization_error(&data).unwrap();
            prop_assert!((direct - qe[30]).abs() < 1e-9);
        }

        #[test]
        fn bmu_is_idempotent(seed in any::<u64>(), q in prop::collection::vec(-5.0f64..5.0, 4)) {
            let data = gaussian(12, 4, seed);
            let map = train_som_vectors(&data, &cfg(2), &SomParams { epochs: 3, seed, ..SomParams::new(3, 3) }).unwrap();
            let a = map.best_matching_unit(&q).unwrap();
            prop_assert_eq!(a, map.best_matching_unit(&q).unwrap());
            let p = map.prototype_original(a.0, a.1);
            let zq = map.standardize(&q).unwrap();
            let dq: f64 = map.prototype(a.0, a.1).iter().zip(&zq).map(|(x, y)| (x - y).powi(2)).sum();
            for u in 0..9 {
                let (x, y) = map.unit_coords(u);
                let d: f64 = map.prototype(x, y).iter().zip(&zq).map(|(x, y)| (x - y).powi(2)).sum();
                prop_assert!(d >= dq);
            }
            prop_assert_eq!(p.len(), 4);
        }
    }
}
