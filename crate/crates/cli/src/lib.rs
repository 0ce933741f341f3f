//! The `mvs` command line: reproducible pipelines over the toolkit with
//! machine-readable CSV outputs.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

mod commands;
mod common;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "mvs",
    about = "Multi-view stereo toolkit: synthetic scenes, plane-sweep depth, losses, style transfer, fusion and benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view scene with exact ground truth.
    Synth(commands::synth::SynthArgs),
    /// Plane-sweep depth estimation over a scene.
    Sweep(commands::sweep::SweepArgs),
    /// Warp source views onto a reference and report photometric error.
    Warp(commands::warp::WarpArgs),
    /// Compute the training-loss terms and their weighted combination.
    Losses(commands::losses::LossesArgs),
    /// Whitening-coloring style transfer between two images.
    Wct(commands::wct::WctArgs),
    /// Edge-guided propagation filtering of a distorted image.
    Gpm(commands::gpm::GpmArgs),
    /// Fuse per-view depth maps into a point cloud.
    Fuse(commands::fuse::FuseArgs),
    /// Point-cloud benchmark: precision/recall/F-score and DTU metrics.
    Eval(commands::eval::EvalArgs),
    /// Distribution-gap (MMD) confusion matrix between scenes.
    Mmd(commands::mmd::MmdArgs),
    /// Semi-supervised labeled/unlabeled split generation.
    Split(commands::split::SplitArgs),
}

/// Parse and execute. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(args) => commands::synth::execute(args),
        Command::Sweep(args) => commands::sweep::execute(args),
        Command::Warp(args) => commands::warp::execute(args),
        Command::Losses(args) => commands::losses::execute(args),
        Command::Wct(args) => commands::wct::execute(args),
        Command::Gpm(args) => commands::gpm::execute(args),
        Command::Fuse(args) => commands::fuse::execute(args),
        Command::Eval(args) => commands::eval::execute(args),
        Command::Mmd(args) => commands::mmd::execute(args),
        Command::Split(args) => commands::split::execute(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
