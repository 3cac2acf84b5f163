use std::path::{Path, PathBuf};

use latent_audio::audio::{load_wav, peak_normalize, resample, save_wav, window};
use latent_audio::bench::bench_decode;
use latent_audio::features::FeatureConfig;
use latent_audio::latent::{
    encode_audio, export_latents_to_file, extended_interpolate, generate_curve, meso_interpolate, pair_window_count,
    stepwise_interpolate, stepwise_segment_count, DEFAULT_EXTEND_HOP,
};
use latent_audio::som::{
    assign_clusters, concatenate_cluster, default_grid, duration_warning, extract_thumbnail, format_clusters,
    load_som, parse_unit, save_som, train_som, SomParams,
};
use latent_audio::vae::{load_checkpoint, save_checkpoint, train_with};
use latent_audio::{
    AudioBuffer, CurveSpec, Error, SynthesisMode, SynthesisOptions, Thumbnail, Vae, VaeHyperParams, WavEncoding,
    WindowSet,
};
use rayon::prelude::*;

use crate::config::{Cmd, RunConfig};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cfg: &mut RunConfig) -> Result<()> {
    match cfg.cmd {
        Cmd::Train => train(cfg),
        Cmd::SynthStep | Cmd::SynthMeso | Cmd::SynthExtend => synth(cfg),
        Cmd::SomBuild => som_build(cfg),
        Cmd::SomClusters => som_clusters(cfg),
        Cmd::SomConcat => som_concat(cfg),
        Cmd::Bench => bench(cfg),
        Cmd::ExportLatents => export(cfg),
    }
}

/// `*.wav` files directly inside `dir`, sorted by name.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::usage(format!("cannot read dataset directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| x.eq_ignore_ascii_case("wav"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_at(path: &Path, rate: u32, normalize: bool) -> Result<AudioBuffer> {
    let buf = resample(&load_wav(path)?, rate)?;
    Ok(if normalize { peak_normalize(&buf) } else { buf })
}

fn hyper_from(cfg: &RunConfig) -> Result<VaeHyperParams> {
    let hidden_raw = cfg.raw("hidden_sizes");
    let hidden_sizes = if hidden_raw.trim().is_empty() {
        Vec::new()
    } else {
        hidden_raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("invalid hidden size `{s}`")))
            })
            .collect::<Result<Vec<usize>>>()?
    };
    let hyper = VaeHyperParams {
        window_size: cfg.get("window_size")?,
        latent_dim: cfg.get("latent_dim")?,
        hidden_sizes,
        alpha: cfg.get("alpha")?,
        learning_rate: cfg.get("learning_rate")?,
        epochs: cfg.get("epochs")?,
        batch_size: cfg.get("batch_size")?,
        sample_rate: cfg.get("sample_rate")?,
        seed: cfg.get("seed")?,
    };
    hyper.validate()?;
    Ok(hyper)
}

fn train(cfg: &mut RunConfig) -> Result<()> {
    let hyper = hyper_from(cfg)?;
    let dataset_dir = PathBuf::from(cfg.required("dataset_dir")?);
    let out_dir = PathBuf::from(cfg.required("out_dir")?);
    let hop: usize = cfg.get("train_hop")?;

    let files = list_wavs(&dataset_dir)?;
    let mut sets: Vec<WindowSet> = Vec::new();
    for f in &files {
        let buf = load_at(f, hyper.sample_rate, true)?;
        match window(&buf, hyper.window_size, hop) {
            Ok(w) => sets.push(w),
            Err(Error::TooShort { len, .. }) => {
                eprintln!("skipping {}: {len} samples is shorter than one window", f.display())
            }
            Err(e) => return Err(e.into()),
        }
    }
    let windows: usize = sets.iter().map(WindowSet::len).sum();
    eprintln!("training on {windows} windows from {} files", sets.len());

    let every = (hyper.epochs / 10).max(1);
    let ckpt = train_with::<f32>(&sets, &hyper, |epoch, l| {
        if epoch == 1 || epoch % every == 0 {
            eprintln!("epoch {epoch:>5}  recon {:.6}  kl {:.4}", l.recon, l.kl);
        }
    })?;

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let model_path = out_dir.join("model.ravae");
    save_checkpoint(&ckpt, &model_path)?;
    let mut log = String::from("epoch,recon,kl,total\n");
    for (i, l) in ckpt.loss_history.iter().enumerate() {
        log.push_str(&format!("{},{},{},{}\n", i + 1, l.recon, l.kl, l.total(hyper.alpha)));
    }
    let log_path = out_dir.join("loss.csv");
    std::fs::write(&log_path, log).map_err(|e| CliError::usage(format!("cannot write {}: {e}", log_path.display())))?;
    cfg.write_sidecar(&model_path)?;
    println!("{}", model_path.display());
    Ok(())
}

fn load_model(cfg: &RunConfig) -> Result<Vae<f32>> {
    Ok(load_checkpoint(cfg.required("model")?)?.model)
}

fn synthesis_options(cfg: &RunConfig) -> Result<SynthesisOptions> {
    let mode = match cfg.required("mode")? {
        "mean" => SynthesisMode::MeanOnly,
        "sample" => SynthesisMode::Sampled { seed: cfg.get("seed")? },
        other => return Err(CliError::usage(format!("mode must be `mean` or `sample`, got `{other}`"))),
    };
    Ok(SynthesisOptions {
        mode,
        crossfade: cfg.get("crossfade")?,
    })
}

fn synth(cfg: &mut RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let rate = model.sample_rate();
    let ws = model.window_size();
    let normalize = cfg.flag("normalize_inputs")?;
    let a = load_at(Path::new(cfg.required("input1")?), rate, normalize)?;
    let b = load_at(Path::new(cfg.required("input2")?), rate, normalize)?;
    let output = PathBuf::from(cfg.required("output")?);
    let opts = synthesis_options(cfg)?;

    let audio = match cfg.cmd {
        Cmd::SynthStep => {
            let (r, s): (f64, f64) = (cfg.get("range")?, cfg.get("step")?);
            let out = stepwise_interpolate(&model, &a, &b, r, s, &opts)?;
            eprintln!("{} segments", stepwise_segment_count(r, s)?);
            out
        }
        Cmd::SynthMeso => {
            let spec: CurveSpec = cfg.required("curve")?.parse()?;
            let curve = generate_curve(&spec, pair_window_count(ws, &a, &b, ws)?)?;
            meso_interpolate(&model, &a, &b, &curve, &opts)?
        }
        Cmd::SynthExtend => {
            let hop = if cfg.raw("hop").is_empty() {
                DEFAULT_EXTEND_HOP
            } else {
                cfg.get("hop")?
            };
            cfg.set("hop", hop.to_string());
            let spec: CurveSpec = cfg.required("curve")?.parse()?;
            let curve = generate_curve(&spec, pair_window_count(ws, &a, &b, hop)?)?;
            extended_interpolate(&model, &a, &b, &curve, hop, &opts)?
        }
        _ => unreachable!("not a synthesis command"),
    };
    save_wav(&audio, &output, WavEncoding::Float32)?;
    cfg.write_sidecar(&output)?;
    eprintln!("{} samples ({:.2} s)", audio.len(), audio.duration());
    println!("{}", output.display());
    Ok(())
}

fn feature_config_from(cfg: &RunConfig) -> Result<FeatureConfig> {
    let fc = FeatureConfig {
        window_size: cfg.get("feature_window")?,
        hop: cfg.get("feature_hop")?,
        n_mfcc: cfg.get("n_mfcc")?,
        n_mels: cfg.get("n_mels")?,
        centroid: cfg.flag("centroid")?,
        rms: cfg.flag("rms")?,
    };
    fc.validate()?;
    Ok(fc)
}

/// Thumbnails of every dataset file, computed in parallel and returned in name order.
fn thumbnails(dir: &Path, rate: u32, fc: &FeatureConfig) -> Result<Vec<Thumbnail<f32>>> {
    let files = list_wavs(dir)?;
    let results: Vec<Result<Option<Thumbnail<f32>>>> = files
        .par_iter()
        .map(|f| {
            let buf = load_at(f, rate, false)?.with_label(file_name(f));
            match extract_thumbnail(&buf, fc) {
                Ok(t) => Ok(Some(t)),
                Err(Error::TooShort { len, .. }) => {
                    eprintln!("skipping {}: {len} samples is shorter than one analysis window", f.display());
                    Ok(None)
                }
                Err(e) => Err(e.into()),
            }
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        if let Some(t) = r? {
            out.push(t);
        }
    }
    if out.is_empty() {
        return Err(CliError::Lib(Error::EmptyInput));
    }
    Ok(out)
}

fn som_build(cfg: &mut RunConfig) -> Result<()> {
    let fc = feature_config_from(cfg)?;
    let rate: u32 = cfg.get("sample_rate")?;
    let thumbs = thumbnails(Path::new(cfg.required("dataset_dir")?), rate, &fc)?;
    let output = PathBuf::from(cfg.required("output")?);

    let side = default_grid(thumbs.len());
    let mut width: usize = cfg.get("som_width")?;
    let mut height: usize = cfg.get("som_height")?;
    if width == 0 {
        width = side;
    }
    if height == 0 {
        height = side;
    }
    let mut params = SomParams::new(width, height);
    params.epochs = cfg.get("som_epochs")?;
    params.lr0 = cfg.get("som_lr0")?;
    let radius0: f64 = cfg.get("som_radius0")?;
    if radius0 > 0.0 {
        params.radius0 = radius0;
    }
    params.radius_final = cfg.get("som_radius_final")?;
    params.seed = cfg.get("seed")?;
    cfg.set("som_width", width.to_string());
    cfg.set("som_height", height.to_string());
    cfg.set("som_radius0", params.radius0.to_string());

    let map = train_som(&thumbs, &params)?;
    save_som(&map, &output)?;
    cfg.write_sidecar(&output)?;
    let qe = &map.qe_history;
    eprintln!(
        "{} files on a {width}x{height} grid; quantization error {:.4} -> {:.4}",
        thumbs.len(),
        qe[1],
        qe[qe.len() - 1]
    );
    println!("{}", output.display());
    Ok(())
}

fn clusters_for(cfg: &RunConfig) -> Result<Vec<latent_audio::Cluster>> {
    let map = load_som(cfg.required("map")?)?;
    let thumbs = thumbnails(
        Path::new(cfg.required("dataset_dir")?),
        cfg.get("sample_rate")?,
        &map.feature_config,
    )?;
    Ok(assign_clusters(&map, &thumbs)?)
}

fn som_clusters(cfg: &mut RunConfig) -> Result<()> {
    print!("{}", format_clusters(&clusters_for(cfg)?));
    Ok(())
}

fn som_concat(cfg: &mut RunConfig) -> Result<()> {
    let unit = parse_unit(cfg.required("unit")?)?;
    let rate: u32 = cfg.get("sample_rate")?;
    let dir = PathBuf::from(cfg.required("dataset_dir")?);
    let output = PathBuf::from(cfg.required("output")?);
    let clusters = clusters_for(cfg)?;
    let cluster = clusters
        .iter()
        .find(|c| c.unit == unit)
        .ok_or_else(|| CliError::usage(format!("unit {},{} holds no files", unit.0, unit.1)))?;
    let audio = concatenate_cluster(cluster, |name| load_wav(dir.join(name)), rate)?;
    if let Some(w) = duration_warning(&audio) {
        eprintln!("warning: {w}");
    }
    save_wav(&audio, &output, WavEncoding::Float32)?;
    cfg.write_sidecar(&output)?;
    eprintln!("{} members, {:.2} s", cluster.members.len(), audio.duration());
    println!("{}", output.display());
    Ok(())
}

fn bench(cfg: &mut RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let r = bench_decode(&model, cfg.get("seconds")?, cfg.get("reps")?, cfg.get("seed")?)?;
    println!(
        "windows={} reps={} median_ms={:.3} p95_ms={:.3}",
        r.windows,
        r.reps,
        r.median.as_secs_f64() * 1e3,
        r.p95.as_secs_f64() * 1e3
    );
    Ok(())
}

fn export(cfg: &mut RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let hop = if cfg.raw("hop").is_empty() {
        model.window_size()
    } else {
        cfg.get("hop")?
    };
    cfg.set("hop", hop.to_string());
    let input = load_at(Path::new(cfg.required("input1")?), model.sample_rate(), cfg.flag("normalize_inputs")?)?;
    let output = PathBuf::from(cfg.required("output")?);
    let path = encode_audio(&model, &input, hop)?;
    export_latents_to_file(&path, model.latent_dim(), &output)?;
    cfg.write_sidecar(&output)?;
    eprintln!("{} windows", path.len());
    println!("{}", output.display());
    Ok(())
}
