use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfields::scenario::{run_scenario, selftest, Mode, Overrides};

#[derive(Parser)]
#[command(
    name = "qfields",
    version,
    about = "Observable fields of a wave function on a periodic grid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: fields, checks and flow lines.
    Run(Common),
    /// Verification report only.
    Verify(Common),
    /// Field CSVs only.
    Fields(Common),
    /// Flow lines only.
    Flow(Common),
    /// Built-in oracle suite.
    Selftest {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn init_threads(flag: Option<usize>) -> Result<(), String> {
    let env = match std::env::var("QFIELDS_THREADS") {
        Ok(v) => Some(
            v.parse::<usize>()
                .map_err(|_| format!("QFIELDS_THREADS={v} is not a count"))?,
        ),
        Err(_) => None,
    };
    if let Some(n) = env.or(flag) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Run(c) => (Mode::Run, c),
        Command::Verify(c) => (Mode::Verify, c),
        Command::Fields(c) => (Mode::Fields, c),
        Command::Flow(c) => (Mode::Flow, c),
        Command::Selftest { threads, .. } => {
            if let Err(e) = init_threads(threads) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            return match selftest() {
                Ok(report) => {
                    for c in &report.checks {
                        let verdict = if c.passed { "PASS" } else { "FAIL" };
                        println!(
                            "{verdict} {} {:.3e} (tol {:.1e})",
                            c.name,
                            c.measure(),
                            c.tolerance
                        );
                    }
                    ExitCode::from(u8::from(!report.all_passed()))
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            };
        }
    };
    if let Err(e) = init_threads(common.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let overrides = Overrides {
        out: common.out,
        seed: common.seed,
    };
    match run_scenario(&common.config, mode, &overrides) {
        Ok(outcome) => {
            if let Some(report) = &outcome.report {
                for c in report.failures() {
                    eprintln!(
                        "FAIL {} {:.3e} (tol {:.1e})",
                        c.name,
                        c.measure(),
                        c.tolerance
                    );
                }
            }
            println!("wrote {}", outcome.out_dir.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
