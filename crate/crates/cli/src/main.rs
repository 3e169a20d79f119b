//! `bestseller-lab`: ingest, embed, project and evaluate book corpora.

mod commands;
mod run_manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bestseller_core::Execution;

/// Exit codes: 0 success, 1 usage or config error, 2 partial grid failure,
/// 3 I/O error.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Io(_) => 3,
        }
    }
}

pub trait OrFailure<T> {
    fn usage(self) -> Result<T, Failure>;
    fn io(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFailure<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn io(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Io(e.into()))
    }
}

#[derive(Parser, Debug)]
#[command(name = "bestseller-lab", version, about = "Best-seller identification from full book texts")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct Global {
    /// Master seed; every random stage derives its own stream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap (1 runs everything sequentially).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Bit-reproducible output: single-threaded doc2vec training.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

impl Global {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn exec(&self) -> Execution {
        if self.threads == Some(1) {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load a manifest, strip boilerplate, balance and write a corpus archive.
    Ingest(commands::IngestArgs),
    /// Preprocess an archive and write a BoW or doc2vec matrix.
    Embed(commands::EmbedArgs),
    /// Leave-one-out projection, density curves and discriminative words.
    Project(commands::ProjectArgs),
    /// Run the cross-validated classification grid.
    Evaluate(commands::EvaluateArgs),
    /// Render a saved evaluation report as a table.
    Report(commands::ReportArgs),
}

fn init_threads(threads: Option<usize>) -> Result<(), Failure> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--threads must be at least 1")));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().usage()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = init_threads(cli.global.threads).and_then(|_| commands::run(&cli));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let (Failure::Usage(e) | Failure::Io(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
