use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kdv5::Error;
use kdv5_cli::app::{self, Command, Overrides};

/// Fifth-order KdV on the half-line: solve, verify and probe scenarios.
#[derive(Parser)]
#[command(name = "kdv5", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the scenario's pipeline and write fields, traces and reports.
    Solve(Common),
    /// Evaluate the scenario's checks; exits 0 only if all pass.
    Verify(Common),
    /// Ensemble maximum of a bilinear ratio.
    ProbeBilinear(Common),
}

#[derive(Args)]
struct Common {
    scenario: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the boundary quadrature depth.
    #[arg(long)]
    depth: Option<usize>,
}

/// 0 success, 1 failed checks, 2 invalid input, 3 numerical failure.
fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::ProbeBilinear(a) => (Command::ProbeBilinear, a),
    };
    let ov = Overrides { seed: args.seed, depth: args.depth };
    let result = app::load(&args.scenario, cmd, ov).and_then(|sc| app::run(cmd, &sc, &args.out));
    match result {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{} {}: {:.6e} (tolerance {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
            }
            println!("wrote {} files to {}", outcome.files.len(), args.out.display());
            if outcome.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation { .. } | Error::Json(_) | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
