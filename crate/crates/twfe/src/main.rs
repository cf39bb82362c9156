use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twfe::config::{Format, RunConfig};
use twfe::report::format_float;
use twfe::{run, selfcheck};

#[derive(Parser)]
#[command(name = "twfe", version, about = "Two-way fixed effects decompositions and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses and simulations in a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `formats` from the config; repeatable
        #[arg(long, value_enum)]
        format: Vec<Format>,
    },
    /// Check TWFE against its decompositions on random panels
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output_dir, format } => run_command(&config, output_dir, format),
        Command::Selfcheck { seed, draws, inject_fault } => selfcheck_command(seed, draws, inject_fault),
    }
}

fn run_command(path: &Path, output_dir: Option<PathBuf>, format: Vec<Format>) -> ExitCode {
    let mut cfg = match RunConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    if !format.is_empty() {
        let mut f = format;
        f.sort();
        f.dedup();
        cfg.formats = f;
    }
    match run::run(&cfg) {
        Ok((outcome, written)) => {
            for r in &outcome.analyses {
                for row in &r.summary {
                    let se = row.se.map(|s| format!(" (se {})", format_float(s))).unwrap_or_default();
                    println!("{} [{}] {}: {}{se}", r.name, r.operation, row.term, format_float(row.estimate));
                }
            }
            for (name, rep) in &outcome.simulations {
                let s = &rep.summary;
                println!(
                    "{name} [theorem2_audit] mean estimate {} (mc se {}), tau {}, coverage {}",
                    format_float(s.mean_estimate),
                    format_float(s.mc_se),
                    format_float(s.mean_tau),
                    format_float(s.coverage)
                );
            }
            println!("wrote {} files to {}", written.len(), cfg.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn selfcheck_command(seed: u64, draws: usize, inject_fault: bool) -> ExitCode {
    match selfcheck::selfcheck(seed, draws, inject_fault) {
        Ok(rep) => {
            println!("selfcheck: {} panels, seed {seed}, max relative gap {:e}", rep.draws.len(), rep.max_relative_gap);
            if rep.passed() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                eprintln!("selfcheck failed: gap exceeds {:e}", selfcheck::TOLERANCE);
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
