use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vortiline::config::{parse_config, RunConfig};
use vortiline::frame::Model;
use vortiline::{pipeline, Error};

/// Caps the worker count; unset means one worker.
const THREADS_VAR: &str = "VORTILINE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "vortiline", version, about = "Vortex-line growth diagnostics for SQG and 3D Euler flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate an SQG configuration, writing snapshots and a time series.
    RunSqg(RunArgs),
    /// Integrate a 3D Euler configuration, writing snapshots and a time series.
    RunEuler3d(RunArgs),
    /// Trace one segment from the maximum of a single snapshot.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        /// Output CSV; defaults to `<output.dir>/curve.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Track a segment through all snapshots and write diagnostics, envelopes and a report.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        /// Run directory or snapshot directory; defaults to `output.dir`.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Defaults to `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the velocity-split check on the Clebsch family.
    AppendixCheck {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render report.svg from envelope.csv and identity.csv in a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Defaults to `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(path: &Path) -> Result<(RunConfig, String), Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Precondition(format!("cannot read config {}: {e}", path.display())))?;
    Ok((parse_config(&text)?, text))
}

fn run_model(args: &RunArgs, model: Model) -> Result<(), Error> {
    let (cfg, text) = load(&args.config)?;
    if cfg.model != model {
        return Err(Error::Precondition(format!(
            "config has model = {}, expected {}",
            cfg.model.as_str(),
            model.as_str()
        )));
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let m = pipeline::run_simulation(&cfg, &text, &out)?;
    println!(
        "{}: {} snapshots to t = {} in {}",
        m.command,
        m.snapshots.len(),
        m.end_time,
        out.display()
    );
    Ok(())
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::RunSqg(a) => run_model(&a, Model::Sqg),
        Command::RunEuler3d(a) => run_model(&a, Model::Euler3d),
        Command::Trace { config, snapshot, out } => {
            let (cfg, _) = load(&config)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.join(pipeline::CURVE));
            let step = pipeline::trace(&snapshot, &cfg, &out)?;
            let d = &step.diagnostics;
            println!(
                "traced length {} with {} samples, int kappa = {}, int tau = {} -> {}",
                d.length,
                d.samples,
                d.int_kappa,
                d.int_tau,
                out.display()
            );
            Ok(())
        }
        Command::Diagnose { config, snapshots, out } => {
            let (cfg, text) = load(&config)?;
            let snapshots = snapshots.unwrap_or_else(|| cfg.output_dir.clone());
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let m = pipeline::diagnose(&snapshots, &cfg, &text, &out)?;
            if let Some(f) = &m.flags {
                println!(
                    "diagnose: {} windows, {} flag-clean, {} envelope violations -> {}",
                    f.windows,
                    f.clean,
                    f.violations,
                    out.display()
                );
            }
            Ok(())
        }
        Command::AppendixCheck { config, out } => {
            let (cfg, text) = load(&config)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let r = pipeline::appendix(&cfg, &text, &out)?;
            let worst = r.members.iter().map(|m| m.max_relative_error).fold(0.0, f64::max);
            println!(
                "appendix-check: split error {worst:.3e}, log-velocity spread {:.3}, near spread {:.3} -> {}",
                r.log_velocity.spread,
                r.near_spread,
                out.display()
            );
            Ok(())
        }
        Command::Report { dir } => {
            pipeline::report(&dir)?;
            println!("report: {}", dir.join(pipeline::REPORT).display());
            Ok(())
        }
    }
}

fn thread_count() -> Result<usize, Error> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Precondition(format!("{THREADS_VAR} must be a positive integer, got `{v}`"))),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_count().and_then(|n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
        execute(cli.command)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
