use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shellmatch::{pipeline, verify, Error, RunConfig};

#[derive(Parser)]
#[command(name = "shellmatch", version, about = "Match implicit shapes with narrow-band shell energies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every job of a config file.
    Run { config: PathBuf },
    /// Run the randomized algebraic property suites.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print the reports as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run only the band-width convergence study of a config file.
    Gamma { config: PathBuf },
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    let trailer = serde_json::json!({ "status": "error", "kind": err.kind(), "message": err.to_string() });
    eprintln!("{trailer}");
    ExitCode::from(1)
}

fn run(config: &Path, gamma_only: bool) -> ExitCode {
    let result = RunConfig::load(config).and_then(|c| if gamma_only { pipeline::run_gamma(&c) } else { pipeline::run(&c) });
    match result {
        Ok(outcome) => {
            for p in &outcome.outputs {
                println!("{}", p.display());
            }
            if outcome.line_search_failed {
                eprintln!("warning: a level stopped after a failed line search; results are partial");
                eprintln!("{}", serde_json::json!({ "status": "line_search_failed" }));
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = shellmatch::configure_threads() {
        return fail(&e);
    }
    match cli.command {
        Command::Run { config } => run(&config, false),
        Command::Gamma { config } => run(&config, true),
        Command::Verify { seed, json } => {
            let reports = verify::run_all(seed);
            if json {
                println!("{}", shellmatch::report::to_json(&reports).trim_end());
            } else {
                for r in &reports {
                    let verdict = if r.passed() { "ok  " } else { "FAIL" };
                    println!(
                        "{verdict} {:<48} cases {:>6}  worst {:>10.3e}  bound {:>8.1e}  {:.2}s",
                        r.name, r.cases, r.worst, r.bound, r.seconds
                    );
                }
            }
            if reports.iter().all(|r| r.passed()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
