use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stereoconf::cli::{cmd_adapt, cmd_cues, cmd_datagen, cmd_eval, cmd_stereo, cmd_train, Overrides};
use stereoconf::config::RunConfig;
use stereoconf::matcher::Algorithm;

#[derive(Parser)]
#[command(version, about = "Self-supervised stereo confidence toolkit")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true, value_parser = ["wta", "box", "sgm"])]
    algo: Option<String>,
    /// Also compute right-reference disparities.
    #[arg(long, global = true)]
    right: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic stereo scenes.
    Datagen,
    /// Compute disparity maps.
    Stereo,
    /// Compute confidence cues and criteria masks.
    Cues,
    /// Train the confidence network on proxy labels.
    Train,
    /// Stream frames through online adaptation.
    Adapt,
    /// Evaluate confidence measures.
    Eval,
}

fn run(args: Args) -> stereoconf::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        seed: args.seed,
        force: args.force,
        algo: args.algo.as_deref().map(str::parse::<Algorithm>).transpose()?,
        right: args.right,
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    let force = args.force;
    match args.command {
        Command::Datagen => cmd_datagen(&cfg, force).map(drop),
        Command::Stereo => cmd_stereo(&cfg, force),
        Command::Cues => cmd_cues(&cfg, force),
        Command::Train => cmd_train(&cfg, force),
        Command::Adapt => cmd_adapt(&cfg, force).map(drop),
        Command::Eval => cmd_eval(&cfg, force).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Ok(threads) = std::env::var("STEREOCONF_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring STEREOCONF_THREADS={threads:?}"),
        }
    }
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
