//! `kplsrt`: batch pipeline for kernel-PLS facial animation retargeting.

mod commands;
mod config;
mod formats;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{override_fields, Components, KernelKind, ProjectConfig};

/// Environment variable holding the log filter, e.g. `info` or `debug`.
const LOG_ENV: &str = "KPLSRT_LOG";

#[derive(Parser, Debug)]
#[command(
    name = "kplsrt",
    version,
    about = "Retarget facial animation with kernel PLS"
)]
struct Cli {
    /// Project configuration (TOML). Flags override its values.
    #[arg(long, global = true, env = "KPLSRT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a retargeting model on correspondence files.
    Train(TrainArgs),
    /// Retarget a source sequence with a trained model.
    Retarget(RetargetArgs),
    /// Run the A → B → A evaluation and write a report.
    EvalCyclic(EvalArgs),
    /// Write a seeded synthetic world (rigs, correspondences, sequence).
    Synth(SynthArgs),
    /// Print model metadata.
    Inspect(InspectArgs),
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// Kernel family.
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    /// Gaussian width; defaults to a leave-one-out multiple of the median pairwise distance.
    #[arg(long)]
    sigma: Option<f64>,
    /// Polynomial degree.
    #[arg(long)]
    degree: Option<u32>,
    /// Polynomial offset.
    #[arg(long)]
    offset: Option<f64>,
    /// Latent components: a positive integer or `auto` (leave-one-out).
    #[arg(long, value_parser = Components::parse)]
    components: Option<Components>,
    /// Largest component count tried by `auto`.
    #[arg(long)]
    p_max: Option<usize>,
    /// Remove per-frame head rotation before regression.
    #[arg(long)]
    remove_rotation: Option<bool>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Source correspondence sequence (CSV).
    #[arg(long)]
    source: Option<PathBuf>,
    /// Target correspondence sequence (CSV), row-aligned with `--source`.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    model_args: ModelArgs,
}

#[derive(Args, Debug)]
struct RetargetArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Source sequence (CSV).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output sequence (CSV).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Directory written by `synth`; supplies any path not given explicitly.
    #[arg(long)]
    world_dir: Option<PathBuf>,
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    /// Rig JSON of the source face.
    #[arg(long)]
    rig_a: Option<PathBuf>,
    /// Held-out source sequence (CSV).
    #[arg(long)]
    sequence: Option<PathBuf>,
    /// Output report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Output per-frame errors (CSV: frame, method, error).
    #[arg(long)]
    frames_csv: Option<PathBuf>,
    /// Methods to compare, first one is the reference of the ordering lines.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[command(flatten)]
    model_args: ModelArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the source rig on both sides with the identity map.
    #[arg(long)]
    identity: Option<bool>,
    /// Warp amplitude of the expression map.
    #[arg(long)]
    nonlinearity: Option<f64>,
    /// Source blendshapes driven by products of expression channels.
    #[arg(long)]
    corrective_shapes: Option<usize>,
    /// Number of correspondence pairs.
    #[arg(long)]
    pairs: Option<usize>,
    /// Frames in the held-out sequence.
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    model: Option<PathBuf>,
}

fn apply_model_args(config: &mut ProjectConfig, args: &ModelArgs) {
    override_fields!(config, args; kernel, sigma, degree, offset, components, p_max, remove_rotation);
}

fn run(cli: Cli) -> Result<()> {
    let mut config = ProjectConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Train(args) => {
            override_fields!(config, args; source, target, model);
            apply_model_args(&mut config, &args.model_args);
            commands::train(&config)
        }
        Command::Retarget(args) => {
            override_fields!(config, args; model, input, output);
            commands::retarget(&config)
        }
        Command::EvalCyclic(args) => {
            override_fields!(config, args; world_dir, source, target, rig_a, sequence, report, frames_csv, methods);
            apply_model_args(&mut config, &args.model_args);
            commands::eval_cyclic(&config)
        }
        Command::Synth(args) => {
            override_fields!(config, args; out_dir, seed);
            let mut world = config.world.unwrap_or_default();
            if let Some(v) = args.identity {
                world.identity = v;
            }
            if let Some(v) = args.nonlinearity {
                world.nonlinearity = v;
            }
            if let Some(v) = args.corrective_shapes {
                world.corrective_shapes = v;
            }
            if let Some(v) = args.pairs {
                world.pairs = v;
            }
            if let Some(v) = args.frames {
                world.sequence_frames = v;
            }
            config.world = Some(world);
            commands::synth(&config)
        }
        Command::Inspect(args) => {
            override_fields!(config, args; model);
            commands::inspect(&config)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
