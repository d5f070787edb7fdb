use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use nlrg::cli::{self, ExitCode, RunConfig};

#[derive(Parser)]
#[command(
    name = "nlrg",
    version,
    about = "Nonlocal fronts and one-dimensional symmetry checks"
)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` config file; `NLRG_*` variables override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build and validate the kernel.
    KernelCheck,
    /// Solve for the 1D front.
    SolveProfile,
    /// Relax 2D initial data to a solution bundle.
    Relax2d,
    /// Run the rigidity diagnostics on a bundle.
    Verify {
        /// Bundle directory (default: `verify.bundle`, else `<out>/bundle`).
        bundle: Option<PathBuf>,
    },
}

fn run(args: Args) -> nlrg::Result<cli::Outcome> {
    let cfg = RunConfig::load(
        args.config.as_deref(),
        std::env::vars(),
        args.out.as_deref(),
    )?;
    match args.command {
        Command::KernelCheck => cli::cmd_kernel_check(&cfg, args.seed),
        Command::SolveProfile => cli::cmd_solve_profile(&cfg),
        Command::Relax2d => cli::cmd_relax2d(&cfg),
        Command::Verify { bundle } => {
            let dir = bundle.unwrap_or_else(|| cli::bundle_path(&cfg));
            cli::cmd_verify(&cfg, &dir, args.seed)
        }
    }
}

fn main() {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            process::exit(ExitCode::ConfigError.code());
        }
    }
    let code = match run(args) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            outcome.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::for_error(&e)
        }
    };
    process::exit(code.code());
}
