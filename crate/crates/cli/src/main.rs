use std::path::PathBuf;

use clap::Parser;
use cwbnlw_cli::{Mode, Overrides};

#[derive(Parser, Debug)]
#[command(
    name = "cwbnlw",
    version,
    about = "Solver and verification runs for time-periodic fractional nonlinear waves"
)]
struct Args {
    #[arg(value_enum)]
    mode: Mode,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Instance dump to re-check (coupling mode).
    #[arg(long)]
    replay: Option<PathBuf>,
}

fn main() {
    let args = Args::parse();
    let code = cwbnlw_cli::run(
        args.mode,
        &args.config,
        &Overrides {
            seed: args.seed,
            out: args.out,
            replay: args.replay,
        },
    );
    std::process::exit(code);
}
