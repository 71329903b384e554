//! `parareg` command-line front end.
//!
//! Every verb reads one JSON config, writes a versioned JSON report (plus
//! fields or CSV series where relevant) and exits with
//! 0 all PASS, 1 any FAIL, 2 usage or config error, 3 internal error.

mod verbs;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parareg::{Error, Verdict};

#[derive(Parser)]
#[command(name = "parareg", version, about = "Time-regularity checks for parabolic p-Laplace systems")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Solve one structure preset and store the solution field.
    Solve { config: PathBuf },
    /// Apply a Bessel potential of complex order to a field.
    Potential { config: PathBuf },
    /// Hölder estimates along the time lines of a field.
    Holder { config: PathBuf },
    /// Interpolation inequality and three-lines checks on a probe suite.
    InterpCheck { config: PathBuf },
    /// Sampled Mihlin constant of a symbol.
    Mihlin { config: PathBuf },
    /// Full regularity pipeline.
    Pipeline { config: PathBuf },
}

pub enum Failure {
    Usage(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let mut root = &e;
        while let Error::Stage { source, .. } = root {
            root = source;
        }
        match root {
            Error::InvalidArgument(_)
            | Error::InvalidGrid(_)
            | Error::StructureViolation(_)
            | Error::Json(_)
            | Error::DivergentKernel { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<Verdict, Failure> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure::Usage("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    match &cli.verb {
        Verb::Solve { config } => verbs::solve(config, out),
        Verb::Potential { config } => verbs::potential(config, out),
        Verb::Holder { config } => verbs::holder(config, out),
        Verb::InterpCheck { config } => verbs::interp_check(config, out),
        Verb::Mihlin { config } => verbs::mihlin(config, out),
        Verb::Pipeline { config } => verbs::pipeline(config, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Verdict::Fail) => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}
