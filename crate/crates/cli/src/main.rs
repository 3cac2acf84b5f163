//! `latent-audio`: train the raw-audio VAE, build SOM maps, synthesize
//! interpolations, benchmark decoding and export latent paths.
//!
//! Every flag mirrors a key of the flat `key=value` run configuration; pass
//! `--config FILE` to start from a file (for example a `.cfg` sidecar written by
//! an earlier run) and override individual keys with flags.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};

use config::{keys_for, Cmd, RunConfig};
use error::CliError;

fn leaf(cmd: Cmd, name: &'static str, about: &'static str) -> Command {
    let mut c = Command::new(name).about(about).arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("key=value file applied before flags"),
    );
    for k in keys_for(cmd) {
        let mut help = k.help.to_string();
        if !k.default.is_empty() {
            help.push_str(&format!(" [default: {}]", k.default));
        }
        c = c.arg(
            Arg::new(k.name)
                .long(k.name.replace('_', "-"))
                .value_name("VALUE")
                .help(help),
        );
    }
    c
}

fn cli() -> Command {
    Command::new("latent-audio")
        .about("Raw-audio VAE, latent interpolation and SOM clustering")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(leaf(Cmd::Train, "train", "train a VAE on a directory of WAV files"))
        .subcommand(
            Command::new("synth")
                .about("interpolate between two sounds in latent space")
                .subcommand_required(true)
                .subcommand(leaf(Cmd::SynthStep, "step", "stepwise blends, one segment per weight"))
                .subcommand(leaf(Cmd::SynthMeso, "meso", "per-window blend following a curve"))
                .subcommand(leaf(Cmd::SynthExtend, "extend", "overlapped slicing, stretched output")),
        )
        .subcommand(
            Command::new("som")
                .about("Self-Organizing Map over file thumbnails")
                .subcommand_required(true)
                .subcommand(leaf(Cmd::SomBuild, "build", "train and save a map"))
                .subcommand(leaf(Cmd::SomClusters, "clusters", "list files per map unit"))
                .subcommand(leaf(Cmd::SomConcat, "concat", "concatenate the files of one unit")),
        )
        .subcommand(leaf(Cmd::Bench, "bench", "time decoding of random latents"))
        .subcommand(leaf(Cmd::ExportLatents, "export-latents", "write per-window latent statistics as CSV"))
}

fn select(m: &ArgMatches) -> (Cmd, &ArgMatches) {
    let (name, sub) = m.subcommand().expect("subcommand required");
    match name {
        "train" => (Cmd::Train, sub),
        "bench" => (Cmd::Bench, sub),
        "export-latents" => (Cmd::ExportLatents, sub),
        "synth" | "som" => {
            let (leaf, leaf_m) = sub.subcommand().expect("subcommand required");
            let cmd = match (name, leaf) {
                ("synth", "step") => Cmd::SynthStep,
                ("synth", "meso") => Cmd::SynthMeso,
                ("synth", "extend") => Cmd::SynthExtend,
                ("som", "build") => Cmd::SomBuild,
                ("som", "clusters") => Cmd::SomClusters,
                ("som", "concat") => Cmd::SomConcat,
                _ => unreachable!("clap rejects unknown subcommands"),
            };
            (cmd, leaf_m)
        }
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}

fn run(m: &ArgMatches) -> Result<(), CliError> {
    let (cmd, sub) = select(m);
    let overrides: Vec<(&'static str, String)> = keys_for(cmd)
        .filter_map(|k| sub.get_one::<String>(k.name).map(|v| (k.name, v.clone())))
        .collect();
    let file = sub.get_one::<String>("config").map(PathBuf::from);
    let mut cfg = RunConfig::resolve(cmd, file.as_deref(), &overrides)?;
    commands::run(&mut cfg)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
