use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use floquet_otoc::config::RunConfig;
use floquet_otoc::runner::{default_analysis_dir, reanalyze, run};
use floquet_otoc::{Error, Result};

#[derive(Parser)]
#[command(version, about = "OTOC simulation of disordered kicked Ising circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configured sweep and write records, aggregates and summary.
    Run {
        config: PathBuf,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute aggregates and the crossover from stored records.
    Analyze {
        records: PathBuf,
        #[arg(long)]
        w_min: Option<f64>,
        #[arg(long)]
        w_max: Option<f64>,
        /// Output directory (defaults to the records' directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the configured coupling graph as JSON.
    ExportGraph { config: PathBuf },
}

fn with_threads<T>(threads: Option<usize>, job: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(job)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            config,
            threads,
            output_dir,
            seed,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let analysis = with_threads(threads, || run(&cfg))?;
            for c in &analysis.summary.crossover {
                match c.w_c {
                    Some(w) => eprintln!("{}: W_c = {w:.4} +/- {:.4}", c.quantity.name(), c.uncertainty.unwrap_or(0.0)),
                    None => eprintln!("{}: no crossover ({})", c.quantity.name(), c.diagnostic.as_deref().unwrap_or("")),
                }
            }
            eprintln!("wrote {}", cfg.output_dir.display());
        }
        Command::Analyze {
            records,
            w_min,
            w_max,
            out,
            threads,
        } => {
            let out = out.unwrap_or_else(|| default_analysis_dir(&records));
            with_threads(threads, || reanalyze(&records, &out, w_min, w_max))?;
            eprintln!("wrote {}", out.display());
        }
        Command::ExportGraph { config } => {
            let cfg = RunConfig::load(&config)?;
            let (graph, _) = cfg.resolve()?;
            println!("{}", serde_json::to_string_pretty(&graph.to_export())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
