use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use npogd::harness::{
    project_request, run_experiment, trace_csv, verify_suite, ExperimentConfig, Level,
    ProjectRequest,
};
use npogd::{gen_instance, run, Error};

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "npogd",
    version,
    about = "Nested projected online gradient descent experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Run one instance and write the per-round trace as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Generator seed; defaults to the first seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Horizon; defaults to the first horizon of the config.
        #[arg(long)]
        horizon: Option<usize>,
        /// Trace CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a sweep over horizons and seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV path; a `.summary.json` goes next to it unless the config names one.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the property suite.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: LevelArg,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a point onto an intersection of bodies read from JSON.
    Project {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Json(_)
            | Error::InvalidArgument(_)
            | Error::Generation(_) => Failure::Config(e.to_string()),
            other => Failure::Failed(other.to_string()),
        }
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::Failed(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    Ok(ExperimentConfig::load(path)?)
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            config,
            seed,
            horizon,
            out,
        } => {
            let cfg = read_config(&config)?;
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let horizon = horizon.unwrap_or(cfg.horizons[0]);
            let inst = gen_instance(&cfg.generator_spec(horizon, seed))?;
            let schedule = cfg.schedule.resolve(&inst)?;
            let trace = run(&inst, &schedule, &cfg.start, &cfg.projection_options())?;
            for w in &trace.warnings {
                eprintln!("warning: {w}");
            }
            write_out(out.as_deref(), &trace_csv(&trace))
        }
        Command::Sweep {
            config,
            seed,
            out,
            workers,
        } => {
            let mut cfg = read_config(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            if out.is_some() {
                cfg.csv_out = out;
            }
            cfg.validate()?;
            let result = run_experiment(&cfg)?;
            let json = cfg.json_out.clone().or_else(|| {
                cfg.csv_out
                    .as_ref()
                    .map(|p| p.with_extension("summary.json"))
            });
            match &cfg.csv_out {
                Some(_) => result.write(cfg.csv_out.as_deref(), json.as_deref())?,
                None => print!("{}", result.to_csv()),
            }
            for c in result.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!(
                    "cell T={} seed={} failed: {}",
                    c.horizon,
                    c.seed,
                    c.error.as_deref().unwrap_or("")
                );
            }
            if result.failed_cells > 0 {
                return Err(Failure::Failed(format!(
                    "{} cells failed",
                    result.failed_cells
                )));
            }
            Ok(())
        }
        Command::Verify { level, out } => {
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Full => Level::Full,
            };
            let report = verify_suite(level);
            println!("{report}");
            if let Some(p) = out {
                let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
                write_out(Some(&p), &json)?;
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Failed("verification failed".into()))
            }
        }
        Command::Project { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
            let req: ProjectRequest =
                serde_json::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
            let res = project_request(&req)?;
            let json = serde_json::to_string_pretty(&res).map_err(Error::from)?;
            write_out(out.as_deref(), &format!("{json}\n"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Failed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}
