use clap::{Parser, Subcommand};
use lazy_tso_cli::bench::{render_table, run_bench};
use lazy_tso_cli::check::{check, load_program, parse_unroll, CheckOptions, Mode};
use lazy_tso_cli::report::exit_code;
use std::path::PathBuf;
use std::process::ExitCode;

/// Goal reachability of concurrent programs under TSO.
#[derive(Parser)]
#[command(name = "lazy-tso", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one program file.
    Check {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "lazy")]
        mode: Mode,
        /// Unrolling bounds LO:HI for cyclic programs.
        #[arg(long, value_parser = parse_unroll)]
        unroll: Option<(usize, usize)>,
        /// Remove the first store of every extended sequence.
        #[arg(long)]
        delete_first_store: bool,
        /// Witnesses requested from the oracle per iteration.
        #[arg(long, value_name = "N")]
        witnesses_per_round: Option<usize>,
        /// Write the report as JSON to PATH.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
        /// Partial-order reduction of thread-local steps.
        #[arg(long)]
        por: bool,
        /// Maximum number of states per exploration.
        #[arg(long, value_name = "N")]
        state_budget: Option<usize>,
    },
    /// Run a corpus of programs against their expected verdicts.
    Bench {
        dir: PathBuf,
        /// Write all rows as JSON to PATH.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Check {
            file,
            mode,
            unroll,
            delete_first_store,
            witnesses_per_round,
            json,
            por,
            state_budget,
        } => {
            if mode == Mode::TsoBrute && unroll.is_some() {
                anyhow::bail!("--unroll does not apply to tso-brute");
            }
            let p = load_program(&file)?;
            let opts = CheckOptions {
                mode,
                unroll,
                delete_first_store,
                witnesses_per_round,
                por,
                state_budget,
            };
            let report = check(&p, &opts);
            print!("{}", report.render());
            if let Some(path) = json {
                std::fs::write(&path, report.to_json() + "\n")?;
            }
            Ok(exit_code(report.verdict))
        }
        Command::Bench { dir, json } => {
            let rows = run_bench(&dir)?;
            print!("{}", render_table(&rows));
            if let Some(path) = json {
                std::fs::write(&path, serde_json::to_string_pretty(&rows)? + "\n")?;
            }
            let failed = rows.iter().filter(|r| !r.ok()).count();
            if failed > 0 {
                eprintln!("{failed} of {} programs did not match", rows.len());
                return Ok(1);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { 3 } else { 0 };
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
