use clap::{Parser, Subcommand};
use sparsefda::cli::{execute_with_threads, ConfigArgs};

#[derive(Parser)]
#[command(name = "sparsefda", version, about = "Sparse functional data analysis of cohort trajectories")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read long-format measurements and scalar covariates.
    Ingest(ConfigArgs),
    /// Apply quality-control filters.
    Qc(ConfigArgs),
    /// Fit functional principal components per variable.
    Fpca(ConfigArgs),
    /// Cross-covariance surface of two variables.
    Crosscov(ConfigArgs),
    /// Correlation surfaces and trajectories.
    Corr(ConfigArgs),
    /// Concurrent functional regression.
    Fcr(ConfigArgs),
    /// Residualize the outcome with a mixed model.
    Residualize(ConfigArgs),
    /// Regress the outcome on component scores.
    ScoreLm(ConfigArgs),
    /// Bootstrap score models and correlations.
    Bootstrap(ConfigArgs),
    /// Generate a synthetic cohort.
    Simulate(ConfigArgs),
    /// Design counts of observation times.
    Designplot(ConfigArgs),
    /// Run every stage and write a manifest.
    Pipeline(ConfigArgs),
}

impl Command {
    fn split(&self) -> (&'static str, &ConfigArgs) {
        match self {
            Command::Ingest(a) => ("ingest", a),
            Command::Qc(a) => ("qc", a),
            Command::Fpca(a) => ("fpca", a),
            Command::Crosscov(a) => ("crosscov", a),
            Command::Corr(a) => ("corr", a),
            Command::Fcr(a) => ("fcr", a),
            Command::Residualize(a) => ("residualize", a),
            Command::ScoreLm(a) => ("score-lm", a),
            Command::Bootstrap(a) => ("bootstrap", a),
            Command::Simulate(a) => ("simulate", a),
            Command::Designplot(a) => ("designplot", a),
            Command::Pipeline(a) => ("pipeline", a),
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, args) = cli.command.split();
    let code = match args.resolve().and_then(|cfg| execute_with_threads(name, &cfg, cli.threads)) {
        Ok(manifest) => manifest.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
