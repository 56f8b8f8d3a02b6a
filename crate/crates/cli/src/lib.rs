//! The `objectness` command-line tool as a library, so that pipelines and
//! tests can drive subcommands without spawning processes.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::fmt;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult, EXIT_CONTRACT, EXIT_INCOMPLETE, EXIT_IO, EXIT_OK};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "OBJECTNESS_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Verbosity(pub u8);

impl Verbosity {
    pub fn info(self, args: fmt::Arguments) {
        if self.0 >= 1 {
            eprintln!("{args}");
        }
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`], if set. Results never
/// depend on the thread count.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // A pool that already exists (a second call in one process) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let v = Verbosity(cli.verbose);
    match &cli.command {
        Command::Synth(a) => commands::synth::run(a, v),
        Command::Train(a) => commands::train::run(a, v),
        Command::Segment(a) => commands::segment::run(a, v),
        Command::Eval(a) => commands::eval::run(a, v),
        Command::Retarget(a) => commands::retarget::run(a, v),
        Command::BuildIndex(a) => commands::retrieve::build_index(a, v),
        Command::Retrieve(a) => commands::retrieve::retrieve(a, v),
        Command::RetrieveEval(a) => commands::retrieve::retrieve_eval(a, v),
        Command::DiffReports(a) => commands::diff::run(a, v),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONTRACT } else { EXIT_OK };
        }
    };
    match configure_threads().and_then(|()| run(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
