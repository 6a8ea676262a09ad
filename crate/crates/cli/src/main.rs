use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mggen_core::compositor::OutputFormat;

mod bench;
mod bundle;
mod commands;
mod exit;

use exit::Failure;

/// Turn a single raster design into an animated video.
#[derive(Parser, Debug)]
#[command(name = "mggen", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split an image into a layered document bundle.
    Decompose {
        image: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        clients: ClientsArg,
    },
    /// Write an animation script for a document.
    Plan {
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        planner: PlannerArgs,
        #[command(flatten)]
        clients: ClientsArg,
    },
    /// Render a script against a document.
    Render {
        manifest: PathBuf,
        script: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Decompose, plan and render in one go, keeping every intermediate.
    Pipeline {
        image: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        planner: PlannerArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        clients: ClientsArg,
    },
    /// Time a synthetic render (1280x720, 8 layers, 5 s at 25 fps by default).
    Bench(bench::BenchArgs),
    /// Write a seeded synthetic design with ground-truth fixture clients.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct ClientsArg {
    /// Client configuration file (TOML). Without it, builtin clients are used.
    #[arg(long)]
    clients: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlannerArgs {
    /// Free-text motion instruction.
    #[arg(long)]
    direction: Option<String>,
    #[arg(long, value_enum, default_value = "rules")]
    mode: commands::Mode,
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u32).range(1..))]
    fps: u32,
    /// png_seq or y4m; repeat for both.
    #[arg(long = "format", default_value = "png_seq")]
    formats: Vec<OutputFormat>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Decompose { image, out, clients } => commands::decompose(&image, &out, clients.clients.as_deref()),
        Command::Plan { manifest, out, planner, clients } => {
            commands::plan(&manifest, &out, planner.direction.as_deref(), planner.mode, clients.clients.as_deref())
        }
        Command::Render { manifest, script, out, output } => commands::render(&manifest, &script, &out, output.fps, &output.formats),
        Command::Pipeline { image, out, planner, output, clients } => commands::pipeline(&commands::PipelineJob {
            image: &image,
            out: &out,
            direction: planner.direction.as_deref(),
            mode: planner.mode,
            clients: clients.clients.as_deref(),
            fps: output.fps,
            formats: &output.formats,
        }),
        Command::Bench(args) => bench::run(&args),
        Command::Synth { seed, out } => commands::synth(seed, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
