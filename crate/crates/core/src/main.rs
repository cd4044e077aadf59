use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use snls::cli_io::{self, emit_plot_data, error_json, Experiment, RunConfig};
use snls::SnlsError;

#[derive(Parser)]
#[command(name = "snls", version, about = "Spectral NLS simulator for steplike potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "SNLS_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the equation and record conserved quantities.
    Evolve(RunArgs),
    /// Wave-operator gaps and channel extraction for a nonlinear run.
    Channels(RunArgs),
    /// Free/shifted channel extraction for the linear flow.
    #[command(alias = "linear_channels")]
    LinearChannels(RunArgs),
    /// Morawetz density, integral and identity residual.
    Morawetz(RunArgs),
    /// Dispersive decay ratio of the perturbed flow.
    Decay(RunArgs),
    /// Greedy profile decomposition of a synthetic family.
    Profiles(RunArgs),
    /// Distance between the perturbed and flat flows of translated data.
    #[command(alias = "translation_gap")]
    TranslationGap(RunArgs),
    /// Finite-sample hypothesis checks for the configured potential.
    #[command(alias = "check_potential")]
    CheckPotential(RunArgs),
    /// One-parameter sweep over another experiment.
    Sweep(RunArgs),
    /// Extract columns of a series.csv as whitespace-delimited plot data.
    #[command(alias = "plot_data")]
    PlotData {
        #[arg(long)]
        series: PathBuf,
        /// Comma-separated column names.
        #[arg(long, value_delimiter = ',', required = true)]
        columns: Vec<String>,
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn run_experiment(experiment: Experiment, args: &RunArgs) -> Result<(), SnlsError> {
    let cfg = RunConfig::from_path(&args.config)?;
    let out = args.output_dir.clone().unwrap_or_else(|| cfg.output_dir());
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(SnlsError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| SnlsError::Config(format!("thread pool: {e}")))?;
    log::info!("{experiment}: {} -> {}", args.config.display(), out.display());
    pool.install(|| cli_io::run(&cfg, experiment, &out))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Evolve(a) => run_experiment(Experiment::Evolve, a),
        Command::Channels(a) => run_experiment(Experiment::Channels, a),
        Command::LinearChannels(a) => run_experiment(Experiment::LinearChannels, a),
        Command::Morawetz(a) => run_experiment(Experiment::Morawetz, a),
        Command::Decay(a) => run_experiment(Experiment::Decay, a),
        Command::Profiles(a) => run_experiment(Experiment::Profiles, a),
        Command::TranslationGap(a) => run_experiment(Experiment::TranslationGap, a),
        Command::CheckPotential(a) => run_experiment(Experiment::CheckPotential, a),
        Command::Sweep(a) => run_experiment(Experiment::Sweep, a),
        Command::PlotData {
            series,
            columns,
            output,
        } => emit_plot_data(series, columns, output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
