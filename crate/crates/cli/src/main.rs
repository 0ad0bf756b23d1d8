use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparsebeam::channel::ChannelFile;
use sparsebeam::coneprog::DenominatorBound;
use sparsebeam::experiment::{certify_channel_file, generate_channels, solve_channel_file, MatrixRecord, SolveRecord};
use sparsebeam::{run_sweep, Error, ExperimentConfig, Scheme};

/// Robust multi-user beamforming experiments.
#[derive(Parser, Debug)]
#[command(name = "sparsebeam", version)]
struct Cli {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for `sweep` (all cores when absent).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the solver's iteration log as CSV to stderr (`solve` only).
    #[arg(long, global = true)]
    solver_log: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the effective configuration (defaults, file, then flags).
    Config,
    /// Draw a channel set and its estimates.
    Gen {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Solve one design on a channel file.
    Solve {
        #[arg(long)]
        channels: PathBuf,
        #[arg(long, default_value = "l1_robust")]
        scheme: Scheme,
        #[arg(long)]
        gamma_db: Option<f64>,
        #[command(flatten)]
        bound: BoundArg,
        /// Include the beamforming matrix in the record.
        #[arg(long)]
        with_w: bool,
        /// Also write the conic program as JSON.
        #[arg(long)]
        dump_problem: Option<PathBuf>,
    },
    /// Power sweep over the uncertainty and SINR grids.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<Scheme>>,
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        gammas_db: Option<Vec<f64>>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        max_attempts: Option<usize>,
        #[command(flatten)]
        bound: BoundArg,
        /// Summary CSV (defaults to `<out>.summary.csv`, or stderr).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Worst-case and Monte Carlo check of a beamformer.
    Certify {
        #[arg(long)]
        channels: PathBuf,
        /// `solve --with-w` output or a bare `{"re": .., "im": ..}` matrix.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        gamma_db: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct BoundArg {
    /// Denominator bound of the robust designs: `stacked` or `triangle`.
    #[arg(long, value_parser = parse_bound)]
    bound: Option<DenominatorBound>,
}

fn parse_bound(s: &str) -> Result<DenominatorBound, String> {
    match s {
        "stacked" => Ok(DenominatorBound::Stacked),
        "triangle" => Ok(DenominatorBound::Triangle),
        _ => Err(format!("unknown bound '{s}' (expected stacked or triangle)")),
    }
}

enum Failure {
    Config(String),
    Io(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            Error::NotPositiveDefinite => Failure::Solver(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    let result = match path {
        Some(p) => fs::write(p, bytes).map_err(|e| format!("{}: {e}", p.display())),
        None => io::stdout().write_all(bytes).map_err(|e| e.to_string()),
    };
    result.map_err(Failure::Io)
}

fn json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => {
            serde_json::from_str(&read(path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match &cli.command {
        Command::Config => {}
        Command::Gen { epsilon } => {
            config.epsilon = epsilon.unwrap_or(config.epsilon);
        }
        Command::Solve { gamma_db, bound, .. } => {
            config.gamma_db = gamma_db.unwrap_or(config.gamma_db);
            config.bound = bound.bound.unwrap_or(config.bound);
        }
        Command::Sweep {
            schemes,
            epsilons,
            gammas_db,
            runs,
            max_attempts,
            bound,
            ..
        } => {
            if let Some(s) = schemes {
                config.schemes = s.clone();
            }
            if let Some(e) = epsilons {
                config.epsilons = e.clone();
            }
            if let Some(g) = gammas_db {
                config.gammas_db = g.clone();
            }
            config.runs = runs.unwrap_or(config.runs);
            config.max_attempts = max_attempts.unwrap_or(config.max_attempts);
            config.bound = bound.bound.unwrap_or(config.bound);
        }
        Command::Certify { gamma_db, samples, .. } => {
            config.gamma_db = gamma_db.unwrap_or(config.gamma_db);
            config.mc_samples = samples.unwrap_or(config.mc_samples);
        }
    }
    if cli.solver_log {
        config.solver.log_interval = Some(config.solver.log_interval.unwrap_or(1));
    }
    config.validate()?;
    Ok(config)
}

fn load_channels(path: &Path) -> Result<ChannelFile, Failure> {
    ChannelFile::from_json(&read(path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn load_weights(path: &Path, n_t: usize) -> Result<sparsebeam::CMat, Failure> {
    let text = read(path)?;
    let matrix = match serde_json::from_str::<SolveRecord>(&text) {
        Ok(record) => record.w.ok_or_else(|| {
            Failure::Config(format!(
                "{}: result has no beamformer (solve with --with-w)",
                path.display()
            ))
        })?,
        Err(_) => serde_json::from_str::<MatrixRecord>(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
    };
    Ok(matrix.to_matrix(n_t)?)
}

fn summary_path(out: Option<&Path>, explicit: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| {
        out.map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            p.with_file_name(format!("{stem}.summary.csv"))
        })
    })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = load_config(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Config => write_out(out, &json(&config)?),
        Command::Gen { .. } => write_out(out, &json(&generate_channels(&config)?)?),
        Command::Solve {
            channels,
            scheme,
            with_w,
            dump_problem,
            ..
        } => {
            let file = load_channels(channels)?;
            let (record, sol) =
                solve_channel_file(&file, *scheme, config.gamma_db, config.bound, &config.solver, *with_w)?;
            if let Some(path) = dump_problem {
                let bytes = json(&sol.program.to_file())?;
                fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            }
            if cli.solver_log {
                let mut log = String::from("iter,primal_residual,dual_residual,objective\n");
                for h in &sol.result.history {
                    log.push_str(&format!(
                        "{},{},{},{}\n",
                        h.iter, h.primal_residual, h.dual_residual, h.objective
                    ));
                }
                io::stderr()
                    .write_all(log.as_bytes())
                    .map_err(|e| Failure::Io(e.to_string()))?;
            }
            write_out(out, &json(&record)?)?;
            if record.power.is_none() {
                return Err(Failure::Solver(format!(
                    "{scheme}: solver stopped with status {:?}",
                    record.status
                )));
            }
            Ok(())
        }
        Command::Sweep { summary, .. } => {
            let result = run_sweep(&config, cli.threads)?;
            let mut rows = Vec::new();
            result.write_rows(&mut rows)?;
            write_out(out, &rows)?;
            let mut sum = Vec::new();
            result.write_summary(&mut sum)?;
            match summary_path(out, summary.as_deref()) {
                Some(path) => fs::write(&path, sum).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
                None => io::stderr().write_all(&sum).map_err(|e| Failure::Io(e.to_string())),
            }
        }
        Command::Certify { channels, weights, .. } => {
            let file = load_channels(channels)?;
            let w = load_weights(weights, file.system().n_t())?;
            write_out(out, &json(&certify_channel_file(&file, &w, &config)?)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
