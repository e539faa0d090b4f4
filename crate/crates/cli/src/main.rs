//! `geovo` command-line tool.
//!
//! Exit status: 0 on success, 1 on a library error (its name goes to stderr),
//! 2 on a usage error.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "geovo", version, about = "Epipolar and photometric supervision toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// `key = value` run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path; tabular results go to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic scene: images, depth, intrinsics, poses and matches.
    Synth(commands::SynthArgs),
    /// Synthesize the target view from a source image, target depth and motion.
    Warp(commands::WarpArgs),
    /// Evaluate the weighted loss and its terms.
    Loss(commands::LossArgs),
    /// Estimate F with RANSAC and sample the inlier matches.
    Fmatrix(commands::FmatrixArgs),
    /// Refine relative poses by direct minimization of the total loss.
    Refine(commands::RefineArgs),
    /// Depth metrics between a prediction and ground truth.
    EvalDepth(commands::EvalDepthArgs),
    /// Trajectory and snippet errors, plus an SVG overlay.
    EvalOdom(commands::EvalOdomArgs),
    /// Chain overlapping snippets into a full trajectory.
    Chain(commands::ChainArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::Context::new(&cli.common).and_then(|ctx| match &cli.command {
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Warp(a) => commands::warp(&ctx, a),
        Command::Loss(a) => commands::loss(&ctx, a),
        Command::Fmatrix(a) => commands::fmatrix(&ctx, a),
        Command::Refine(a) => commands::refine(&ctx, a),
        Command::EvalDepth(a) => commands::eval_depth(&ctx, a),
        Command::EvalOdom(a) => commands::eval_odom(&ctx, a),
        Command::Chain(a) => commands::chain(&ctx, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(1)
        }
    }
}
