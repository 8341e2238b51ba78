//! `trayforge`: pack trays, simulate transport collisions, estimate poses and
//! replay assembly event streams.
//!
//! Exit codes: 0 ok, 1 I/O or malformed input, 2 tray width (or depth)
//! overflow, 3 tray length overflow, 4 invalid layout, 5 bad mask,
//! 6 singular calibration, 7 incomplete assembly, 64 usage.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "trayforge", version, about = "Sterile tray layout planning and assembly tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pack a checklist into a tray and write the layout JSON.
    Pack(PackArgs),
    /// Run the transport collision study on a layout and its baselines.
    Simulate(SimulateArgs),
    /// Estimate the planar pose of an instrument mask.
    Pose(PoseArgs),
    /// Feed detection events through the assembly sequencer.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct PackArgs {
    /// Instrument catalog JSON.
    #[arg(long)]
    pub catalog: PathBuf,
    /// Procedure checklist JSON.
    #[arg(long)]
    pub checklist: PathBuf,
    /// Tray dimensions JSON.
    #[arg(long)]
    pub tray: PathBuf,
    /// Padding JSON.
    #[arg(long)]
    pub padding: PathBuf,
    /// Where to write the layout JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Also render a top view as SVG.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Displacement,
    Tilt,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Packed layout JSON; baselines are generated from the same instruments.
    #[arg(long)]
    pub layout: PathBuf,
    /// Only run this baseline instead of all three trays.
    #[arg(long, value_enum)]
    pub baseline: Option<BaselineArg>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Displacement)]
    pub mode: ModeArg,
    /// Base seed; trial i uses seed + i.
    #[arg(long, env = "TRAYFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Where to write the study reports JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PoseArgs {
    /// Binary mask as PGM, or a contour CSV with `x,y` rows.
    #[arg(long)]
    pub mask: PathBuf,
    /// Calibration JSON with the pixel-to-world homography.
    #[arg(long)]
    pub calib: PathBuf,
    /// Pixels per contour unit when the mask is a CSV contour.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Packed layout JSON.
    #[arg(long)]
    pub layout: PathBuf,
    /// Detection events, one JSON object per line.
    #[arg(long)]
    pub events: PathBuf,
    /// Where to write the actions, one JSON object per line.
    #[arg(long)]
    pub out: PathBuf,
}

/// A failed run: exit code plus the message for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

pub const EXIT_IO: u8 = 1;
pub const EXIT_WIDTH: u8 = 2;
pub const EXIT_LENGTH: u8 = 3;
pub const EXIT_LAYOUT: u8 = 4;
pub const EXIT_MASK: u8 = 5;
pub const EXIT_CALIBRATION: u8 = 6;
pub const EXIT_INCOMPLETE: u8 = 7;
pub const EXIT_USAGE: u8 = 64;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Pack(args) => commands::pack(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Pose(args) => commands::pose(&args),
        Command::Replay(args) => commands::replay(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
