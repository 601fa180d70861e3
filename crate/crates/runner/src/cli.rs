//! Command-line interface of the `chbohm` binary.

use std::path::PathBuf;

use crate::{catalog, runner, RunError, RunOptions, Scenario};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "chbohm",
    version,
    about = "Two-beam histories and Bohmian trajectory experiments"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "CHBOHM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (default: the scenario's output.dir, else out/<name>).
        #[arg(long, env = "CHBOHM_OUT")]
        out: Option<PathBuf>,
        /// Base seed; experiment i uses seed + i.
        #[arg(long, env = "CHBOHM_SEED")]
        seed: Option<u64>,
    },
    /// List the bundled scenarios.
    List,
    /// Run every bundled scenario twice and compare the outputs.
    Check {
        /// Scratch directory for the two runs.
        #[arg(long, env = "CHBOHM_OUT", default_value = "out/check")]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Scenario TOML file.
    scenario: Option<PathBuf>,
    /// Name of a bundled scenario (see `chbohm list`).
    #[arg(long)]
    bundled: Option<String>,
}

fn fail(e: RunError) -> u8 {
    eprintln!("error: {e}");
    e.exit_code() as u8
}

/// Executes a parsed command line and returns the process exit status.
pub fn execute(cli: Cli) -> u8 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} threads: {e}");
            return 2;
        }
    }
    match cli.command {
        Command::List => {
            for name in catalog::names() {
                match catalog::load(name) {
                    Ok(s) => println!("{name:<24} {}", s.description),
                    Err(e) => println!("{name:<24} (broken: {e})"),
                }
            }
            0
        }
        Command::Run { source, out, seed } => {
            let scenario = match (&source.scenario, &source.bundled) {
                (Some(p), _) => Scenario::load(p),
                (None, Some(n)) => catalog::load(n),
                (None, None) => unreachable!("clap requires a source"),
            };
            let scenario = match scenario {
                Ok(s) => s,
                Err(e) => return fail(e.into()),
            };
            match runner::run_scenario(&scenario, &RunOptions { out, seed }) {
                Ok(o) => {
                    for e in &o.report.experiments {
                        let mark = if e.pass { "PASS" } else { "FAIL" };
                        println!("{mark}  {}  {}", e.experiment, e.paper_claim);
                        for c in &e.failed_checks {
                            println!("      failed: {c}");
                        }
                    }
                    println!("wrote {}", o.dir.display());
                    0
                }
                Err(e) => fail(e),
            }
        }
        Command::Check { out } => match runner::check_bundled(&out) {
            Ok(rows) => {
                print!("{}", runner::format_check_table(&rows));
                if rows.iter().all(|r| r.pass()) {
                    0
                } else {
                    1
                }
            }
            Err(e) => fail(e),
        },
    }
}
