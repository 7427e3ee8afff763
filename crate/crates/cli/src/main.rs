use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use degenspec_cli::commands::{run, Command, RunOptions};
use degenspec_cli::exit;

#[derive(Parser)]
#[command(name = "degenspec", version, about = "Weak-coupling bound states for degenerate kinetic symbols")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Surface operator V_S (and W_S for r < 2): spectra and eigenvectors.
    Surface(Args),
    /// One Birman-Schwinger root solve.
    Solve(Args),
    /// Coupling sweep with the small-coupling gates.
    Sweep(Args),
    /// Integrability conditions on the potential.
    CheckHypotheses(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long)]
    index: Option<usize>,
    #[arg(long)]
    force: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "DEGENSPEC_THREADS", hide = true)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG as u8 } else { 0 });
        }
    };
    let (cmd, args) = match cli.command {
        Cmd::Surface(a) => (Command::Surface, a),
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::CheckHypotheses(a) => (Command::CheckHypotheses, a),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("cannot size the thread pool: {e}");
        }
    }
    degenspec::linalg::use_sequential_kernels();
    let opts = RunOptions { config: args.config, out: args.out, lambda: args.lambda, index: args.index, force: args.force };
    match run(cmd, &opts) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for p in &outcome.written {
                log::info!("wrote {}", p.display());
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("degenspec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
