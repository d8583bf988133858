//! `portwatch`: run missions, score plans, benchmark planners, export grids
//! and replay recorded runs.

mod commands;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Stub,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Text,
    Tsv,
}

#[derive(Debug, Parser)]
#[command(name = "portwatch", version, about = "USV-UAV port inspection mission engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// World description (JSON); the bundled port when omitted.
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Mission file (JSON).
    #[arg(long)]
    pub mission: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Stub)]
    pub planner: Mode,
    #[arg(long, value_enum, default_value_t = Mode::Stub)]
    pub inspector: Mode,
    /// Overrides the world's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 2)]
    pub max_replans: u32,
    /// Root directory for run output.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    /// Directory of task files.
    #[arg(long)]
    pub tasks: PathBuf,
    /// Replay recorded planner responses instead of calling a planner.
    #[arg(long, conflicts_with = "live")]
    pub transcripts: Option<PathBuf>,
    /// Call the configured remote planner.
    #[arg(long)]
    pub live: bool,
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Trials per cell for stub and live runs.
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// Cells run concurrently.
    #[arg(long, default_value_t = 4)]
    pub parallel: usize,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    pub format: TableFormat,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan and execute a mission, writing a report, events and traces.
    Run(RunArgs),
    /// Score a plan document against a rubric or task file.
    Score {
        plan: PathBuf,
        #[arg(long)]
        rubric: PathBuf,
    },
    /// Benchmark planners over a directory of tasks.
    Bench(BenchArgs),
    /// Write the world's occupancy grid as a PGM image.
    ExportGrid {
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overlay the USV route between two landmarks.
        #[arg(long, num_args = 2, value_names = ["FROM", "TO"])]
        route: Option<Vec<String>>,
    },
    /// Print a recorded run's event stream.
    Replay { run: PathBuf },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Score { plan, rubric } => commands::score(&plan, &rubric),
        Command::Bench(args) => commands::bench(&args),
        Command::ExportGrid { world, out, route } => commands::export_grid(world.as_deref(), &out, route.as_deref()),
        Command::Replay { run } => commands::replay(&run),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("portwatch: {e}");
            ExitCode::from(2)
        }
    }
}
