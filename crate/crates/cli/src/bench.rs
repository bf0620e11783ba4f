//! Batch benchmark runner and report emitter.
//!
//! For each requested accuracy the runner solves the seeded instance with
//! the selected algorithm and emits one row:
//!
//! ```text
//! inv_eps,iter,time_sec,f_best,g_out,productive,nonproductive
//! ```
//!
//! `time_sec` is measured around the solver loop only (instance generation
//! and report evaluation excluded). Solver failures become error rows (CSV
//! prints `nan` fields, JSON carries the message) without aborting the
//! remaining accuracies. With `--seed` fixed, every number except `time_sec`
//! is reproducible bit-for-bit.
//!
//! Aggregation choices for the modes without a single deterministic run:
//! stochastic rows sum iteration counts over trials and report the mean
//! `f_best` and worst `g_out`; online rows report the realized average
//! objective as `f_best` and the worst constraint value over productive
//! iterates as `g_out`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use switchmd::geometry::{FeasibleSet, Geometry};
use switchmd::model::Functional;
use switchmd::online::{self, FixedStream, OnlineConfig};
use switchmd::problems::{
    analytic, constraint_functional, generate_fts, objective_functional, row_functionals,
    sqrt_n_start, FtsInstance,
};
use switchmd::solvers::{
    solve_model_general, solve_multi_v1, solve_multi_v2, solve_relative_v1, solve_relative_v2,
    RunReport, SolverConfig, StepKind, StepLedger,
};
use switchmd::stochastic::{solve_stochastic, Noise, StochasticOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Algorithm {
    /// Model-general scheme with steps eps/M^2.
    Alg1,
    /// Relative-Lipschitz scheme, version 1 (steps eps/M).
    Alg2,
    /// Relative-Lipschitz scheme, version 2 (steps eps/M^2).
    Alg2Mod,
    /// Version 1 with one functional per constraint row.
    MultiV1,
    /// Version 2 with one functional per constraint row.
    MultiV2,
    /// Stochastic oracles with additive uniform noise.
    Stochastic,
    /// Online rounds over single-anchor distance objectives.
    Online,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum GeometryKind {
    Euclidean,
    Entropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SetKind {
    /// Unit Euclidean ball at the origin.
    UnitBall,
    /// Standard simplex.
    Simplex,
    /// The box [-1, 1]^n.
    Cube,
    /// Unconstrained.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub algorithm: Algorithm,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub seed: u64,
    pub theta0_sq: f64,
    pub geometry: GeometryKind,
    pub set: SetKind,
    /// Start from (1/sqrt(n), ..., 1/sqrt(n)) instead of argmin_Q d.
    pub paper_start: bool,
    /// Stochastic mode: independent solves aggregated into one row.
    pub trials: usize,
    /// Online mode: rounds per run.
    pub rounds: usize,
    /// Stochastic mode: additive uniform noise amplitude per coordinate.
    pub noise: f64,
    /// Per-step trace sink: `k,kind(P|N),h,g_value` lines, one per step.
    pub trace: Option<PathBuf>,
}

impl BenchConfig {
    pub fn new(algorithm: Algorithm, epsilons: Vec<f64>) -> Self {
        BenchConfig {
            algorithm,
            epsilons,
            delta: 0.0,
            n: 50,
            r: 20,
            m: 20,
            seed: 0,
            theta0_sq: 2.0,
            geometry: GeometryKind::Euclidean,
            set: SetKind::UnitBall,
            paper_start: false,
            trials: 10,
            rounds: 100,
            noise: 0.1,
            trace: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RowOutcome {
    Solved {
        iterations: usize,
        time_sec: f64,
        f_best: f64,
        g_out: f64,
        productive: usize,
        nonproductive: usize,
    },
    Failed {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub inv_epsilon: f64,
    pub outcome: RowOutcome,
}

impl BenchRow {
    pub fn is_solved(&self) -> bool {
        matches!(self.outcome, RowOutcome::Solved { .. })
    }
}

struct TraceSink {
    writer: Option<BufWriter<File>>,
}

impl TraceSink {
    fn open(path: &Option<PathBuf>) -> std::io::Result<Self> {
        Ok(TraceSink {
            writer: match path {
                Some(p) => Some(BufWriter::new(File::create(p)?)),
                None => None,
            },
        })
    }

    fn record(&mut self, ledger: &StepLedger) -> std::io::Result<()> {
        if let Some(writer) = &mut self.writer {
            for record in &ledger.records {
                let kind = match record.kind {
                    StepKind::Productive => 'P',
                    StepKind::NonProductive => 'N',
                };
                writeln!(
                    writer,
                    "{},{},{},{}",
                    record.index, kind, record.step_size, record.constraint_value
                )?;
            }
        }
        Ok(())
    }

    fn finish(mut self) -> std::io::Result<()> {
        if let Some(writer) = &mut self.writer {
            writer.flush()?;
        }
        Ok(())
    }
}

fn build_set(config: &BenchConfig) -> FeasibleSet {
    match config.set {
        SetKind::UnitBall => FeasibleSet::unit_ball(config.n),
        SetKind::Simplex => FeasibleSet::simplex(config.n),
        SetKind::Cube => FeasibleSet::box_set(vec![-1.0; config.n], vec![1.0; config.n])
            .expect("static bounds"),
        SetKind::Free => FeasibleSet::whole_space(config.n),
    }
}

fn solver_config(config: &BenchConfig, epsilon: f64, m_g: f64) -> SolverConfig {
    let mut cfg = SolverConfig::new(epsilon, 1.0, m_g, config.theta0_sq);
    cfg.delta = config.delta;
    if config.paper_start {
        cfg.x0 = Some(sqrt_n_start(config.n));
    }
    cfg
}

fn report_outcome(report: &RunReport, f: &Functional, g: &Functional) -> RowOutcome {
    RowOutcome::Solved {
        iterations: report.iterations,
        time_sec: report.wall_time.as_secs_f64(),
        f_best: f.value(&report.x_hat),
        g_out: g.value(&report.x_hat),
        productive: report.ledger.productive_count(),
        nonproductive: report.ledger.nonproductive_count(),
    }
}

/// Run the configured benchmark: the instance is generated once from
/// `(n, r, m, seed)`, then solved per accuracy.
pub fn run_bench(config: &BenchConfig) -> std::io::Result<Vec<BenchRow>> {
    let instance = Arc::new(generate_fts(config.n, config.r, config.m, config.seed));
    let geom = match config.geometry {
        GeometryKind::Euclidean => Geometry::Euclidean,
        GeometryKind::Entropy => Geometry::Entropy,
    };
    let q = build_set(config);
    let mut trace = TraceSink::open(&config.trace)?;
    let mut rows = Vec::with_capacity(config.epsilons.len());
    for &epsilon in &config.epsilons {
        let outcome = run_one(config, &instance, &geom, &q, epsilon, &mut trace)?;
        rows.push(BenchRow {
            inv_epsilon: 1.0 / epsilon,
            outcome,
        });
    }
    trace.finish()?;
    Ok(rows)
}

fn run_one(
    config: &BenchConfig,
    instance: &Arc<FtsInstance>,
    geom: &Geometry,
    q: &FeasibleSet,
    epsilon: f64,
    trace: &mut TraceSink,
) -> std::io::Result<RowOutcome> {
    let m_g = instance.max_constraint_norm();
    let build = || -> switchmd::Result<(Functional, Functional)> {
        Ok((
            objective_functional(instance.clone(), config.delta)?,
            constraint_functional(instance.clone(), config.delta)?,
        ))
    };
    let result: switchmd::Result<RowOutcome> = (|| {
        match config.algorithm {
            Algorithm::Alg1 => {
                let (f, g) = build()?;
                let mut cfg = solver_config(config, epsilon, m_g);
                cfg.step_f = Some(epsilon); // eps / M_f^2 with M_f = 1
                cfg.step_g = Some(epsilon / (m_g * m_g));
                let report = solve_model_general(&f, &g, geom, q, &cfg)?;
                trace.record(&report.ledger).map_err(io_to_config)?;
                Ok(report_outcome(&report, &f, &g))
            }
            Algorithm::Alg2 => {
                let (f, g) = build()?;
                let cfg = solver_config(config, epsilon, m_g);
                let report = solve_relative_v1(&f, &g, geom, q, &cfg)?;
                trace.record(&report.ledger).map_err(io_to_config)?;
                Ok(report_outcome(&report, &f, &g))
            }
            Algorithm::Alg2Mod => {
                let (f, g) = build()?;
                let cfg = solver_config(config, epsilon, m_g);
                let report = solve_relative_v2(&f, &g, geom, q, &cfg)?;
                trace.record(&report.ledger).map_err(io_to_config)?;
                Ok(report_outcome(&report, &f, &g))
            }
            Algorithm::MultiV1 | Algorithm::MultiV2 => {
                let (f, g) = build()?;
                let rows = row_functionals(instance, config.delta)?;
                let row_refs: Vec<&Functional> = rows.iter().collect();
                let cfg = solver_config(config, epsilon, m_g);
                let report = match config.algorithm {
                    Algorithm::MultiV1 => solve_multi_v1(&f, &row_refs, geom, q, &cfg)?,
                    _ => solve_multi_v2(&f, &row_refs, geom, q, &cfg)?,
                };
                trace.record(&report.ledger).map_err(io_to_config)?;
                Ok(report_outcome(&report, &f, &g))
            }
            Algorithm::Stochastic => {
                run_stochastic(config, instance, geom, q, epsilon, m_g, trace)
            }
            Algorithm::Online => run_online(config, instance, geom, q, epsilon, m_g, trace),
        }
    })();
    Ok(match result {
        Ok(outcome) => outcome,
        Err(error) => RowOutcome::Failed {
            message: error.to_string(),
        },
    })
}

fn io_to_config(error: std::io::Error) -> switchmd::Error {
    switchmd::Error::Config(format!("trace write failed: {error}"))
}

fn run_stochastic(
    config: &BenchConfig,
    instance: &Arc<FtsInstance>,
    geom: &Geometry,
    q: &FeasibleSet,
    epsilon: f64,
    m_g: f64,
    trace: &mut TraceSink,
) -> switchmd::Result<RowOutcome> {
    let (f, g) = (
        objective_functional(instance.clone(), config.delta)?,
        constraint_functional(instance.clone(), config.delta)?,
    );
    let spread = config.noise * (config.n as f64).sqrt();
    let m_f_noisy = 1.0 + spread;
    let m_g_noisy = m_g + spread;
    let noise = Noise::Uniform {
        amplitude: config.noise,
    };
    let f_model = f.model().clone();
    let g_model = g.model().clone();
    let f_value: switchmd::model::ValueFn = {
        let f = f.clone();
        Arc::new(move |x: &[f64]| f.value(x))
    };
    let g_value: switchmd::model::ValueFn = {
        let g = g.clone();
        Arc::new(move |x: &[f64]| g.value(x))
    };
    let f_oracle = StochasticOracle::with_noise(
        f_value,
        Arc::new(move |x: &[f64]| f_model.term_at(x).slope),
        noise,
        m_f_noisy,
    )?;
    let g_oracle = StochasticOracle::with_noise(
        g_value,
        Arc::new(move |x: &[f64]| g_model.term_at(x).slope),
        noise,
        m_g_noisy,
    )?;
    let mut cfg = solver_config(config, epsilon, m_g);
    cfg.step_f = Some(epsilon / (m_f_noisy * m_f_noisy));
    cfg.step_g = Some(epsilon / (m_g_noisy * m_g_noisy));
    if config.trials == 0 {
        return Err(switchmd::Error::Config("stochastic mode needs trials >= 1".into()));
    }
    let mut iterations = 0usize;
    let mut productive = 0usize;
    let mut nonproductive = 0usize;
    let mut time = Duration::ZERO;
    let mut f_sum = 0.0;
    let mut g_worst = f64::NEG_INFINITY;
    for trial in 0..config.trials {
        let report =
            solve_stochastic(&f_oracle, &g_oracle, geom, q, &cfg, config.seed, trial as u64)?;
        trace.record(&report.ledger).map_err(io_to_config)?;
        iterations += report.iterations;
        productive += report.ledger.productive_count();
        nonproductive += report.ledger.nonproductive_count();
        time += report.wall_time;
        f_sum += f.value(&report.x_hat);
        g_worst = g_worst.max(g.value(&report.x_hat));
    }
    Ok(RowOutcome::Solved {
        iterations,
        time_sec: time.as_secs_f64(),
        f_best: f_sum / config.trials as f64,
        g_out: g_worst,
        productive,
        nonproductive,
    })
}

fn run_online(
    config: &BenchConfig,
    instance: &Arc<FtsInstance>,
    geom: &Geometry,
    q: &FeasibleSet,
    epsilon: f64,
    m_g: f64,
    trace: &mut TraceSink,
) -> switchmd::Result<RowOutcome> {
    let g = constraint_functional(instance.clone(), config.delta)?;
    // Round i serves the distance to anchor P_{(i-1) mod r}; every per-round
    // constant is 1.
    let objectives: Vec<Functional> = (0..config.rounds)
        .map(|i| analytic::distance_to(instance.points[i % instance.r].clone()))
        .collect();
    let mut stream = FixedStream::new(objectives);
    let mut cfg = OnlineConfig::new(epsilon, m_g.max(1.0), config.theta0_sq);
    cfg.delta = config.delta;
    if config.paper_start {
        cfg.x0 = Some(sqrt_n_start(config.n));
    }
    let report = online::solve_online(&mut stream, &g, geom, q, &cfg)?;
    trace.record(&report.ledger).map_err(io_to_config)?;
    let g_worst = report
        .productive_iterates
        .iter()
        .map(|x| g.value(x))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RowOutcome::Solved {
        iterations: config.rounds + report.nonproductive,
        time_sec: report.wall_time.as_secs_f64(),
        f_best: report.average_objective(),
        g_out: g_worst,
        productive: config.rounds,
        nonproductive: report.nonproductive,
    })
}

pub const CSV_HEADER: &str = "inv_eps,iter,time_sec,f_best,g_out,productive,nonproductive";

fn format_inv_eps(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

/// CSV form: 6 decimal places for times and function values; error rows
/// print `nan` fields.
pub fn csv_report(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        match &row.outcome {
            RowOutcome::Solved {
                iterations,
                time_sec,
                f_best,
                g_out,
                productive,
                nonproductive,
            } => {
                out.push_str(&format!(
                    "{},{},{:.6},{:.6},{:.6},{},{}\n",
                    format_inv_eps(row.inv_epsilon),
                    iterations,
                    time_sec,
                    f_best,
                    g_out,
                    productive,
                    nonproductive
                ));
            }
            RowOutcome::Failed { .. } => {
                out.push_str(&format!(
                    "{},0,nan,nan,nan,0,0\n",
                    format_inv_eps(row.inv_epsilon)
                ));
            }
        }
    }
    out
}

/// JSON form: an array of objects with the CSV keys at full precision;
/// error rows carry an `error` message instead of result fields.
pub fn json_report(rows: &[BenchRow]) -> String {
    let items: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| match &row.outcome {
            RowOutcome::Solved {
                iterations,
                time_sec,
                f_best,
                g_out,
                productive,
                nonproductive,
            } => serde_json::json!({
                "inv_eps": row.inv_epsilon,
                "iter": iterations,
                "time_sec": time_sec,
                "f_best": f_best,
                "g_out": g_out,
                "productive": productive,
                "nonproductive": nonproductive,
            }),
            RowOutcome::Failed { message } => serde_json::json!({
                "inv_eps": row.inv_epsilon,
                "error": message,
            }),
        })
        .collect();
    serde_json::to_string_pretty(&items).expect("plain data")
}

pub fn emit_report(rows: &[BenchRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => csv_report(rows),
        OutputFormat::Json => json_report(rows),
    }
}
