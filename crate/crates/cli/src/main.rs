mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{Failure, Outcome, EXIT_IO, EXIT_VALIDATION};
use config::RunConfig;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Least-energy solutions of (−Δ)^s u + u = |u|^{q−2}u on polygonal cells.
#[derive(Parser, Debug)]
#[command(name = "fraclap", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize on one cell and write the Nehari-scaled field and a report.
    Solve,
    /// Solve over the configured list of R.
    Sweep,
    /// Reflect or phase-extend a stored field over several cells.
    Extend {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write a PGM (real) or PPM (complex) image of a stored field.
    Render {
        #[arg(long)]
        input: PathBuf,
        /// Mark density maxima.
        #[arg(long)]
        overlay: bool,
    },
    /// Residuals, concentration report and decay profile of a stored field.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
    },
    /// Check the extension energy identity, trace relation and cutoff defects.
    Stverify,
}

fn load_config(cli: &Cli, required: bool) -> Result<Option<RunConfig>, Failure> {
    let Some(path) = &cli.config else {
        return if required {
            Err(Failure { code: EXIT_VALIDATION, message: "this command needs --config".into() })
        } else {
            Ok(None)
        };
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) })?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })?;
    cfg.apply_seed(cli.seed.unwrap_or(cfg.seed));
    Ok(Some(cfg))
}

fn run(cli: &Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure { code: EXIT_VALIDATION, message: "--threads must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: EXIT_VALIDATION, message: e.to_string() })?;
    }
    std::fs::create_dir_all(&cli.out)?;
    let out: &Path = &cli.out;
    match &cli.command {
        Command::Solve => commands::solve(&load_config(cli, true)?.expect("required"), out),
        Command::Sweep => commands::sweep(&load_config(cli, true)?.expect("required"), out),
        Command::Extend { input } => commands::extend(input, &load_config(cli, true)?.expect("required"), out),
        Command::Render { input, overlay } => commands::render(input, load_config(cli, false)?.as_ref(), *overlay, out),
        Command::Diagnose { input } => commands::diagnose(input, load_config(cli, false)?.as_ref(), out),
        Command::Stverify => commands::stverify(&load_config(cli, true)?.expect("required"), out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            // a closed pipe downstream is not a failure of the run
            let line = serde_json::to_string(&report).expect("report serializes");
            let _ = writeln!(std::io::stdout().lock(), "{line}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
