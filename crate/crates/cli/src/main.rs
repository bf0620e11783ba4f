use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use switchmd_cli::bench::{
    emit_report, run_bench, Algorithm, BenchConfig, GeometryKind, OutputFormat, SetKind,
};

/// Benchmark runner for the switching mirror-descent solvers on seeded
/// Fermat–Torricelli–Steiner instances with max-of-linear constraints.
#[derive(Parser, Debug)]
#[command(name = "switchmd", version, about)]
struct Cli {
    /// Solver to benchmark.
    #[arg(long, value_enum)]
    algorithm: Algorithm,

    /// Target accuracy; repeat for several rows (e.g. --eps 0.5 --eps 0.25).
    #[arg(long = "eps")]
    eps: Vec<f64>,

    /// Inexactness budget delta.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,

    /// Dimension.
    #[arg(long, default_value_t = 500)]
    n: usize,

    /// Number of anchor points.
    #[arg(long, default_value_t = 100)]
    r: usize,

    /// Number of constraint rows.
    #[arg(long, default_value_t = 200)]
    m: usize,

    /// Instance seed; fixes every reported number except wall times.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Upper bound on d(x*).
    #[arg(long = "theta0-sq", default_value_t = 2.0)]
    theta0_sq: f64,

    #[arg(long, value_enum, default_value_t = GeometryKind::Euclidean)]
    geometry: GeometryKind,

    /// Feasible set.
    #[arg(long = "set", value_enum, default_value_t = SetKind::UnitBall)]
    set: SetKind,

    /// Start from (1/sqrt(n), ..., 1/sqrt(n)) instead of argmin of d.
    #[arg(long = "paper-start")]
    paper_start: bool,

    /// Stochastic mode: trials aggregated per row.
    #[arg(long, default_value_t = 10)]
    trials: usize,

    /// Online mode: rounds per run.
    #[arg(long, default_value_t = 100)]
    rounds: usize,

    /// Stochastic mode: additive uniform noise amplitude.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,

    /// Report format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,

    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write a per-step trace: one `k,kind(P|N),h,g_value` line per step.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = BenchConfig {
        algorithm: cli.algorithm,
        epsilons: cli.eps,
        delta: cli.delta,
        n: cli.n,
        r: cli.r,
        m: cli.m,
        seed: cli.seed,
        theta0_sq: cli.theta0_sq,
        geometry: cli.geometry,
        set: cli.set,
        paper_start: cli.paper_start,
        trials: cli.trials,
        rounds: cli.rounds,
        noise: cli.noise,
        trace: cli.trace,
    };
    let rows = match run_bench(&config) {
        Ok(rows) => rows,
        Err(error) => {
            eprintln!("switchmd: {error}");
            return ExitCode::FAILURE;
        }
    };
    for row in rows.iter().filter(|row| !row.is_solved()) {
        if let switchmd_cli::bench::RowOutcome::Failed { message } = &row.outcome {
            eprintln!("switchmd: 1/eps = {}: {message}", row.inv_epsilon);
        }
    }
    let report = emit_report(&rows, cli.format);
    match &cli.out {
        Some(path) => {
            if let Err(error) = std::fs::write(path, report) {
                eprintln!("switchmd: cannot write {}: {error}", path.display());
                return ExitCode::FAILURE;
            }
        }
        None => print!("{report}"),
    }
    if rows.iter().all(|row| row.is_solved()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
