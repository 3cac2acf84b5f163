//! Flat `key=value` run configuration shared by every subcommand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmd {
    Train,
    SynthStep,
    SynthMeso,
    SynthExtend,
    SomBuild,
    SomClusters,
    SomConcat,
    Bench,
    ExportLatents,
}

impl Cmd {
    #[cfg(test)]
    pub const ALL: [Cmd; 9] = [
        Cmd::Train,
        Cmd::SynthStep,
        Cmd::SynthMeso,
        Cmd::SynthExtend,
        Cmd::SomBuild,
        Cmd::SomClusters,
        Cmd::SomConcat,
        Cmd::Bench,
        Cmd::ExportLatents,
    ];

    /// Name as typed on the command line and stored under `command=`.
    pub fn name(self) -> &'static str {
        match self {
            Cmd::Train => "train",
            Cmd::SynthStep => "synth step",
            Cmd::SynthMeso => "synth meso",
            Cmd::SynthExtend => "synth extend",
            Cmd::SomBuild => "som build",
            Cmd::SomClusters => "som clusters",
            Cmd::SomConcat => "som concat",
            Cmd::Bench => "bench",
            Cmd::ExportLatents => "export-latents",
        }
    }
}

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
    pub commands: &'static [Cmd],
}

use Cmd::*;

const SYNTH: &[Cmd] = &[SynthStep, SynthMeso, SynthExtend];
const MODEL_USERS: &[Cmd] = &[SynthStep, SynthMeso, SynthExtend, Bench, ExportLatents];

/// Every recognized key. An empty default means "required" or "derived"; see the help text.
pub const KEYS: &[Key] = &[
    Key { name: "dataset_dir", default: "", help: "directory of WAV files", commands: &[Train, SomBuild, SomClusters, SomConcat] },
    Key { name: "out_dir", default: "", help: "directory receiving model.ravae and loss.csv", commands: &[Train] },
    Key { name: "seed", default: "0", help: "random seed", commands: &[Train, SynthStep, SynthMeso, SynthExtend, SomBuild, Bench] },
    Key { name: "window_size", default: "1024", help: "samples per VAE window", commands: &[Train] },
    Key { name: "latent_dim", default: "256", help: "latent dimension", commands: &[Train] },
    Key { name: "hidden_sizes", default: "512", help: "comma-separated encoder hidden widths", commands: &[Train] },
    Key { name: "alpha", default: "0.0001", help: "KL weight", commands: &[Train] },
    Key { name: "learning_rate", default: "0.0001", help: "Adam learning rate", commands: &[Train] },
    Key { name: "epochs", default: "500", help: "training epochs", commands: &[Train] },
    Key { name: "batch_size", default: "128", help: "windows per mini-batch", commands: &[Train] },
    Key { name: "sample_rate", default: "44100", help: "working sample rate in Hz", commands: &[Train, SomBuild, SomClusters, SomConcat] },
    Key { name: "train_hop", default: "256", help: "hop between training windows", commands: &[Train] },
    Key { name: "model", default: "", help: "checkpoint file", commands: MODEL_USERS },
    Key { name: "input1", default: "", help: "first input WAV", commands: &[SynthStep, SynthMeso, SynthExtend, ExportLatents] },
    Key { name: "input2", default: "", help: "second input WAV", commands: SYNTH },
    Key { name: "output", default: "", help: "output file", commands: &[SynthStep, SynthMeso, SynthExtend, SomBuild, SomConcat, ExportLatents] },
    Key { name: "mode", default: "sample", help: "mean | sample", commands: SYNTH },
    Key { name: "crossfade", default: "0", help: "linear crossfade between frames, in samples", commands: SYNTH },
    Key { name: "normalize_inputs", default: "false", help: "peak-normalize inputs before encoding", commands: &[SynthStep, SynthMeso, SynthExtend, ExportLatents] },
    Key { name: "range", default: "1", help: "stepwise interpolation range", commands: &[SynthStep] },
    Key { name: "step", default: "0.25", help: "stepwise interpolation step", commands: &[SynthStep] },
    Key { name: "curve", default: "lin:0:1", help: "curve spec: const:c | lin:a:b | sine:p=..,ph=..,a=..,o=.. | bp:i=v,..", commands: &[SynthMeso, SynthExtend] },
    Key { name: "hop", default: "", help: "slicing hop (extend: 256, export-latents: window size)", commands: &[SynthExtend, ExportLatents] },
    Key { name: "map", default: "", help: "SOM map file", commands: &[SomClusters, SomConcat] },
    Key { name: "som_width", default: "0", help: "grid width (0: derive from file count)", commands: &[SomBuild] },
    Key { name: "som_height", default: "0", help: "grid height (0: derive from file count)", commands: &[SomBuild] },
    Key { name: "som_epochs", default: "100", help: "SOM epochs", commands: &[SomBuild] },
    Key { name: "som_lr0", default: "0.1", help: "initial SOM learning rate", commands: &[SomBuild] },
    Key { name: "som_radius0", default: "0", help: "initial neighbourhood radius (0: half the longer side)", commands: &[SomBuild] },
    Key { name: "som_radius_final", default: "1", help: "final neighbourhood radius", commands: &[SomBuild] },
    Key { name: "feature_window", default: "2048", help: "thumbnail analysis window", commands: &[SomBuild] },
    Key { name: "feature_hop", default: "1024", help: "thumbnail analysis hop", commands: &[SomBuild] },
    Key { name: "n_mfcc", default: "13", help: "cepstral coefficients per frame", commands: &[SomBuild] },
    Key { name: "n_mels", default: "40", help: "mel bands", commands: &[SomBuild] },
    Key { name: "centroid", default: "true", help: "include spectral centroid", commands: &[SomBuild] },
    Key { name: "rms", default: "true", help: "include RMS energy", commands: &[SomBuild] },
    Key { name: "unit", default: "", help: "grid unit as x,y", commands: &[SomConcat] },
    Key { name: "seconds", default: "1", help: "audio duration to decode per repetition", commands: &[Bench] },
    Key { name: "reps", default: "30", help: "timed repetitions (at least 30)", commands: &[Bench] },
];

pub fn keys_for(cmd: Cmd) -> impl Iterator<Item = &'static Key> {
    KEYS.iter().filter(move |k| k.commands.contains(&cmd))
}

fn find(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cmd: Cmd,
    values: BTreeMap<&'static str, String>,
}

/// Parses `key=value` lines; `#` starts a comment line. Unknown keys are errors.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", lineno + 1)))?;
        let k = k.trim();
        if k != "command" && find(k).is_none() {
            return Err(CliError::usage(format!("config line {}: unknown key `{k}`", lineno + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Defaults, then the config file (if any), then command-line overrides.
    pub fn resolve(cmd: Cmd, file: Option<&Path>, overrides: &[(&'static str, String)]) -> Result<Self, CliError> {
        let mut values: BTreeMap<&'static str, String> =
            keys_for(cmd).map(|k| (k.name, k.default.to_string())).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_config_text(&text)? {
                if k == "command" {
                    if v != cmd.name() {
                        return Err(CliError::usage(format!(
                            "config {} was written by `{v}`, not `{}`",
                            path.display(),
                            cmd.name()
                        )));
                    }
                    continue;
                }
                // Keys belonging to other commands are allowed in shared files.
                if let Some(slot) = values.get_mut(k.as_str()) {
                    *slot = v;
                }
            }
        }
        for (k, v) in overrides {
            values.insert(k, v.clone());
        }
        Ok(Self { cmd, values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn set(&mut self, key: &'static str, value: impl Into<String>) {
        self.values.insert(key, value.into());
    }

    pub fn required(&self, key: &str) -> Result<&str, CliError> {
        let v = self.raw(key);
        if v.is_empty() {
            return Err(CliError::usage(format!("missing required `{key}` (flag --{})", key.replace('_', "-"))));
        }
        Ok(v)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.required(key)?;
        v.parse()
            .map_err(|_| CliError::usage(format!("invalid value `{v}` for `{key}`")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.required(key)? {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(CliError::usage(format!("invalid boolean `{v}` for `{key}`"))),
        }
    }

    /// Text form: `command=...` then every key in table order.
    pub fn to_text(&self) -> String {
        let mut s = format!("command={}\n", self.cmd.name());
        for k in keys_for(self.cmd) {
            let _ = writeln!(s, "{}={}", k.name, self.raw(k.name));
        }
        s
    }

    /// Writes the resolved config to `<artifact>.cfg`.
    pub fn write_sidecar(&self, artifact: &Path) -> Result<(), CliError> {
        let mut name = artifact.as_os_str().to_owned();
        name.push(".cfg");
        std::fs::write(&name, self.to_text())
            .map_err(|e| CliError::usage(format!("cannot write sidecar {}: {e}", Path::new(&name).display())))
    }
}
