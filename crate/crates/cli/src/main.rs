use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use amrt::assess::{Approach, AssessmentMatrix, Format};
use amrt::scenario::{run_scenario, Overrides, Scenario};
use amrt_core::adm::{self, LoadError};
use amrt_core::Metamodel;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amrt", version, about = "Run and check adaptation models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its JSONL trace.
    Run {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Trace file; standard output when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// coupled, decoupled or both.
        #[arg(long)]
        engine: Option<String>,
        /// Overrides `ticks` from the scenario.
        #[arg(long)]
        ticks: Option<u64>,
        /// Overrides `seed` from the scenario.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse, resolve and statically check `.adm` files.
    Check {
        /// Files compiled together as one bundle.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Metamodel JSON the bundle is checked against.
        #[arg(long)]
        metamodel: PathBuf,
    },
    /// Print the requirements assessment table.
    Assess {
        /// stitch, story-diagrams or self; all when omitted.
        #[arg(long)]
        approach: Option<String>,
        /// text or csv.
        #[arg(long, default_value = "text")]
        format: String,
    },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn run(scenario: PathBuf, trace: Option<PathBuf>, overrides: Overrides) -> ExitCode {
    let s = match Scenario::load(&scenario, &overrides) {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    for w in &s.warnings {
        eprintln!("{w}");
    }
    let mut out: Box<dyn Write> = match &trace {
        Some(p) => match File::create(p) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => return usage(format!("cannot create `{}`: {e}", p.display())),
        },
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let result = run_scenario(&s, &mut out).and_then(|summary| {
        out.flush().map_err(amrt::scenario::RunError::Trace)?;
        Ok(summary)
    });
    match result {
        Ok(summary) => {
            if trace.is_some() {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&summary).expect("summary serializes")
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn check(files: Vec<PathBuf>, metamodel: PathBuf) -> ExitCode {
    let mm = match std::fs::read_to_string(&metamodel) {
        Ok(text) => match Metamodel::from_json(&text) {
            Ok(mm) => mm,
            Err(e) => return usage(e),
        },
        Err(e) => return usage(format!("cannot read `{}`: {e}", metamodel.display())),
    };
    match adm::load_files(&files, &mm) {
        Ok((_, warnings)) => {
            for w in warnings {
                println!("{w}");
            }
            ExitCode::SUCCESS
        }
        Err(LoadError::Io(p, e)) => usage(format!("cannot read `{p}`: {e}")),
        Err(LoadError::Invalid(diags)) => {
            for d in diags {
                println!("{d}");
            }
            ExitCode::from(1)
        }
    }
}

fn assess(approach: Option<String>, format: String) -> ExitCode {
    let format: Format = match format.parse() {
        Ok(f) => f,
        Err(e) => return usage(e),
    };
    let approach: Option<Approach> = match approach.map(|a| a.parse()).transpose() {
        Ok(a) => a,
        Err(e) => return usage(e),
    };
    print!("{}", AssessmentMatrix::fixture().render(format, approach));
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            trace,
            engine,
            ticks,
            seed,
        } => run(
            scenario,
            trace,
            Overrides {
                engine_mode: engine,
                ticks,
                seed,
            },
        ),
        Command::Check { files, metamodel } => check(files, metamodel),
        Command::Assess { approach, format } => assess(approach, format),
    }
}
