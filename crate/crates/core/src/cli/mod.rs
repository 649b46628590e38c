mod commands;
pub mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;

pub use settings::{resolve, DataSource, Settings};

#[derive(Parser, Debug)]
#[command(name = "mdmt", version, about = "Multi-dataset multi-task training and comparison")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the synthetic task datasets as manifests plus PGM images.
    Generate,
    /// Run one experiment over every fold of a split.
    Train {
        /// stl_tau1, stl_tau2, ft or mdmt.
        #[arg(long)]
        experiment: Option<String>,
        /// cv:K or loco.
        #[arg(long)]
        split: Option<String>,
    },
    /// Paired one-tailed t-tests of experiment A against experiment B.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// auto, backbone or fold.
        #[arg(long)]
        pairing: Option<String>,
        #[arg(long)]
        task: Option<String>,
    },
    /// Summary table of mean(sd) cells across result files.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        task: Option<String>,
    },
    /// Every experiment for every seed and split, then comparisons and a report.
    Pipeline {
        /// Number of seeds, counted up from --seed.
        #[arg(long)]
        seeds: Option<usize>,
        /// Comma-separated splits such as `cv:5,loco`.
        #[arg(long)]
        splits: Option<String>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let text = e.to_string();
            let text = text.trim_start_matches("error: ").trim_end();
            return Err(crate::Error::Config(text.to_string()));
        }
        Err(e) => {
            use std::io::Write;
            // A closed pipe (as with `| head`) is not an error for help text.
            let _ = write!(std::io::stdout(), "{e}");
            return Ok(());
        }
    };
    commands::dispatch(cli)
}

/// Entry point for the binary: runs and maps errors to exit codes.
pub fn main() -> std::process::ExitCode {
    match run(std::env::args_os()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(e.exit_code() as u8)
        }
    }
}
