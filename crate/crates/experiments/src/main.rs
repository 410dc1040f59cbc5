//! Command-line front end for the numerical studies.
//!
//! Exit codes: 0 on success, 1 when a tolerance-gated study (oracle,
//! roundtrip) breaches its gate, 2 on invalid configuration or I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eki_experiments::config::{self, FileConfig, Overrides, Study};
use eki_experiments::studies;

#[derive(Parser)]
#[command(
    name = "experiments",
    version,
    about = "Ensemble Kalman inversion studies: oracle checks, contraction and coverage sweeps, figure panels, round-trip suite"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the fixed-time ensemble against the closed-form posterior; exits 1 on breach
    Oracle(CommonArgs),
    /// Estimation error against sample size, with fitted decay slope
    Contraction(CommonArgs),
    /// Credible-band coverage of the truth against sample size
    Coverage(CommonArgs),
    /// Coefficient and potential panels with bands, as CSV and SVG
    Figure1(CommonArgs),
    /// Forward/inverse round-trip refinement suite; exits 1 on breach
    Roundtrip(CommonArgs),
}

impl Command {
    fn split(self) -> (Study, CommonArgs) {
        match self {
            Command::Oracle(a) => (Study::Oracle, a),
            Command::Contraction(a) => (Study::Contraction, a),
            Command::Coverage(a) => (Study::Coverage, a),
            Command::Figure1(a) => (Study::Figure1, a),
            Command::Roundtrip(a) => (Study::Roundtrip, a),
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Flat TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replicate-parallel studies
    #[arg(long)]
    jobs: Option<usize>,
    /// Sample size; repeat the flag to sweep (replaces the configured list)
    #[arg(long = "n")]
    n: Vec<u64>,
    /// Model dimension override
    #[arg(long)]
    dim: Option<usize>,
    /// Prior regularity alpha
    #[arg(long)]
    alpha: Option<f64>,
    /// Filter step size dt
    #[arg(long)]
    dt: Option<f64>,
    /// Ensemble size J
    #[arg(long)]
    particles: Option<usize>,
    /// Stopping-threshold constant C
    #[arg(long = "kappa-const")]
    kappa_const: Option<f64>,
    /// Replicates per sample size
    #[arg(long)]
    replicates: Option<usize>,
    /// Draw observations without noise
    #[arg(long)]
    noise_free: bool,
}

fn run(study: Study, args: CommonArgs) -> studies::StudyResult<bool> {
    let file = match &args.config {
        Some(path) => config::load_file(path)?,
        None => FileConfig::default(),
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        jobs: args.jobs,
        n: args.n,
        dim: args.dim,
        alpha: args.alpha,
        dt: args.dt,
        particles: args.particles,
        kappa_const: args.kappa_const,
        replicates: args.replicates,
        noise_free: if args.noise_free { Some(true) } else { None },
    };
    let spec = config::build_spec(study, &file, &overrides)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()?;
    let pass = pool.install(|| studies::execute(&spec))?;
    let summary = std::fs::read_to_string(spec.output_dir.join("summary.txt"))?;
    print!("{summary}");
    println!("output_dir: {}", spec.output_dir.display());
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (study, args) = cli.command.split();
    match run(study, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
