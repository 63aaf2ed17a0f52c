use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use cfguide::commands::{
    cmd_analyze, cmd_generate, cmd_guide, cmd_serve, CommandError, GenerateOptions, GuideOptions,
    ServeOptions, DATA_DIR_ENV, DEFAULT_PORT,
};
use cfguide::guidance::ReportMode;
use clap::{Parser, Subcommand};

/// Counterfactual guidance for exploratory filtering.
#[derive(Parser)]
#[command(name = "cfguide", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a causal graph and write data.csv, config.json, truth.json.
    Generate {
        /// Causal graph JSON (default: the built-in 14-factor study graph).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(short, long, default_value_t = 1000)]
        n: usize,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Guidance report for filters, or a variable ranking without them.
    Guide {
        csv: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// var=lo:hi, repeatable.
        #[arg(long = "filter")]
        filters: Vec<String>,
        #[arg(long, default_value = "cf", value_parser = parse_mode)]
        mode: ReportMode,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = DATA_DIR_ENV)]
        data_dir: Option<PathBuf>,
        /// Compute guidance on a seeded subsample of at most this many rows.
        #[arg(long)]
        row_cap: Option<usize>,
    },
    /// Behavior and search-tree metrics for a JSONL interaction log.
    Analyze {
        log: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<ReportMode, String> {
    s.parse()
}

fn run(cli: Cli) -> Result<Option<String>, CommandError> {
    match cli.command {
        Command::Generate { spec, n, out, seed } => {
            cmd_generate(&GenerateOptions { spec, n, out, seed }).map(Some)
        }
        Command::Guide { csv, config, filters, mode } => {
            cmd_guide(&GuideOptions { csv, config, filters, mode }).map(Some)
        }
        Command::Serve { port, host, data_dir, row_cap } => {
            cmd_serve(&ServeOptions { host, port, data_dir, row_cap }).map(|_| None)
        }
        Command::Analyze { log, truth } => cmd_analyze(&log, truth.as_deref()).map(Some),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Some(out)) => {
            // a closed pipe (`| head`) is not an error worth a panic
            let _ = writeln!(std::io::stdout(), "{out}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
