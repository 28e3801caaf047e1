use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ergoverify::campaign::{emit_report, list_probes, run_campaign, RunOptions};
use ergoverify::Error;

#[derive(Parser)]
#[command(name = "ergoverify", version, about = "Run verification campaigns and emit their reports")]
struct Cli {
    /// Worker threads for ensembles (default: ERGOVERIFY_THREADS, then all cores).
    #[arg(long, global = true, env = "ERGOVERIFY_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign config; exits 1 when an asserted probe fails.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Print the probe registry.
    ListProbes {
        /// Emit JSON lines instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Write summary.txt and per-probe tables for a finished run.
    Report {
        /// Run directory holding manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(e: &Error) -> ExitCode {
    let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
    eprintln!("{body}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&Error::Config(format!("thread pool: {e}")));
        }
    }
    match cli.command {
        Command::Run { config, out, seed_override } => match run_campaign(&config, &RunOptions { out, seed_override }) {
            Ok(m) => {
                for e in &m.verdicts {
                    let tag = if e.verdict.pass { "PASS" } else { "FAIL" };
                    println!("{:<24} {tag} {}", e.verdict.probe, if e.asserted { "" } else { "(report only)" });
                }
                println!("config digest {}", m.config_digest);
                if m.passed {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => fail(&e),
        },
        Command::ListProbes { json } => {
            for p in list_probes() {
                if json {
                    println!("{}", serde_json::to_string(&p).expect("registry serializes"));
                } else {
                    println!("{:<24} {}", p.name, p.paper_ref);
                }
            }
            ExitCode::SUCCESS
        }
        Command::Report { out } => match emit_report(&out) {
            Ok(r) => {
                print!("{}", r.summary);
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
