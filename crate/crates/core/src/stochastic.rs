//! Switching mirror descent with unbiased stochastic subgradients.
//!
//! The solver mirrors the model-general deterministic loop: the productivity
//! test evaluates the constraint's *exact* value, while each mirror step uses
//! a fresh subgradient sample — from the objective's oracle on productive
//! steps, from the constraint's on non-productive ones. Upon stopping the
//! constraint bound `g(x̂) ≤ ε + δ` holds deterministically and the objective
//! gap `E[f(x̂)] - f(x*) ≤ ε + δ` holds in expectation over the oracle noise.
//!
//! Sampling is driven by ChaCha8 streams keyed by
//! `(seed, trial, step index, oracle id)` — see [`crate::rng`] — so trials
//! are order-independent and every run is reproducible bit-for-bit.

use crate::error::{Error, Result};
use crate::geometry::{FeasibleSet, Geometry};
use crate::model::{ModelTerm, SubgradientFn, ValueFn};
use crate::rng;
use crate::solvers::{run_switching, EngineSpec, Guarantee, RunReport, SolverConfig, StopRule};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub type SampleFn = Arc<dyn Fn(&[f64], &mut ChaCha8Rng) -> Vec<f64> + Send + Sync>;

/// Zero-mean bounded perturbation added to an exact subgradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Noise {
    None,
    /// Independent ±amplitude per coordinate.
    SignFlip { amplitude: f64 },
    /// Independent uniform draw from [-amplitude, amplitude] per coordinate.
    Uniform { amplitude: f64 },
}

impl Noise {
    fn apply(&self, slope: &mut [f64], rng: &mut ChaCha8Rng) {
        match self {
            Noise::None => {}
            Noise::SignFlip { amplitude } => {
                for s in slope {
                    *s += if rng::unit(rng) < 0.5 {
                        -amplitude
                    } else {
                        *amplitude
                    };
                }
            }
            Noise::Uniform { amplitude } => {
                for s in slope {
                    *s += rng::uniform(rng, -*amplitude, *amplitude);
                }
            }
        }
    }
}

/// First-order unbiased oracle: exact values (for the productivity test)
/// plus randomized subgradients with bounded relative variation
/// `<sample(x), x - y> ≤ M sqrt(2 V_d(y, x))` for every draw.
#[derive(Clone)]
pub struct StochasticOracle {
    value: ValueFn,
    sample: SampleFn,
    m: f64,
}

impl StochasticOracle {
    pub fn new(value: ValueFn, sample: SampleFn, m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Config(format!(
                "oracle constant must be positive, got {m}"
            )));
        }
        Ok(StochasticOracle { value, sample, m })
    }

    /// Additive zero-mean bounded noise around an exact subgradient. The
    /// caller supplies `m` valid for the *perturbed* draws (for the Euclidean
    /// geometry: the exact constant plus `amplitude * sqrt(n)`).
    pub fn with_noise(
        value: ValueFn,
        subgradient: SubgradientFn,
        noise: Noise,
        m: f64,
    ) -> Result<Self> {
        Self::new(
            value,
            Arc::new(move |x: &[f64], rng: &mut ChaCha8Rng| {
                let mut slope = subgradient(x);
                noise.apply(&mut slope, rng);
                slope
            }),
            m,
        )
    }

    /// Noise-free oracle; the solver then reproduces the deterministic run.
    pub fn exact(value: ValueFn, subgradient: SubgradientFn, m: f64) -> Result<Self> {
        Self::with_noise(value, subgradient, Noise::None, m)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn sample(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        (self.sample)(x, rng)
    }

    pub fn m(&self) -> f64 {
        self.m
    }
}

const OBJECTIVE_STREAM: u64 = 0;
const CONSTRAINT_STREAM: u64 = 1;

/// Stochastic switching mirror descent with caller-supplied steps
/// `cfg.step_f`, `cfg.step_g` and the model-general stopping rule (with
/// `φ*(h) = h² M² / 2` from the oracle constants).
pub fn solve_stochastic(
    f_oracle: &StochasticOracle,
    g_oracle: &StochasticOracle,
    geom: &Geometry,
    q: &FeasibleSet,
    cfg: &SolverConfig,
    seed: u64,
    trial: u64,
) -> Result<RunReport> {
    let step_f = cfg
        .step_f
        .ok_or_else(|| Error::Config("solve_stochastic needs step_f".into()))?;
    let step_g = cfg
        .step_g
        .ok_or_else(|| Error::Config("solve_stochastic needs step_g".into()))?;
    if !(step_f > 0.0) || !(step_g > 0.0) {
        return Err(Error::Config("step sizes must be positive".into()));
    }
    let phi_conj = |h: f64, m: f64| h * h * m * m / 2.0;
    let f_phi_conj = phi_conj(step_f, f_oracle.m());
    let g_phi_conj = phi_conj(step_g, g_oracle.m());
    let bound = cfg.epsilon + cfg.delta;
    let budget = cfg.max_iterations.unwrap_or_else(|| {
        crate::solvers::iteration_bound(
            cfg.epsilon,
            cfg.theta0_sq,
            f_oracle.m().max(g_oracle.m()),
        )
        .saturating_mul(10)
    });
    let spec = EngineSpec {
        geom,
        q,
        x0: match &cfg.x0 {
            Some(x0) => x0.clone(),
            None => crate::geometry::argmin_reference(geom, q)?,
        },
        threshold: cfg.epsilon + cfg.delta,
        step_f,
        steps_g: vec![step_g],
        stop: StopRule::Gain {
            theta0_sq: cfg.theta0_sq,
            gain_f: cfg.epsilon * step_f - f_phi_conj,
            gain_g: cfg.epsilon * step_g - g_phi_conj,
        },
        budget,
        f_delta: cfg.delta,
        g_deltas: vec![cfg.delta],
        f_phi_conj,
        g_phi_conjs: vec![g_phi_conj],
        guarantee: Guarantee {
            objective_gap: bound,
            constraint_bound: bound,
        },
        reference: cfg.reference_point.clone(),
        record_objective: cfg.record_objective,
        check_descent: false,
    };
    run_switching(
        spec,
        &|x| f_oracle.value(x),
        &mut |x, step| {
            let mut stream = rng::keyed(&[seed, trial, step as u64, OBJECTIVE_STREAM]);
            ModelTerm::linear(f_oracle.sample(x, &mut stream))
        },
        &[Box::new(|x: &[f64]| g_oracle.value(x))],
        &mut |_, x, step| {
            let mut stream = rng::keyed(&[seed, trial, step as u64, CONSTRAINT_STREAM]);
            ModelTerm::linear(g_oracle.sample(x, &mut stream))
        },
    )
}

/// One row of the Monte-Carlo harness.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub iterations: usize,
    pub productive: usize,
    pub nonproductive: usize,
    pub f_hat: f64,
    pub g_hat: f64,
}

#[derive(Clone, Debug)]
pub struct GapEstimate {
    /// Monte-Carlo estimate of `E[f(x̂)] - f*`.
    pub mean_gap: f64,
    /// Standard error of the mean over trials.
    pub stderr: f64,
    pub trials: Vec<TrialOutcome>,
}

/// Run `trials` independent seeded solves and estimate the expected
/// objective gap against a reference value `f_star`. Per-trial constraint
/// values are returned so callers can verify `g(x̂) ≤ ε + δ` holds for every
/// trial, not just in expectation.
#[allow(clippy::too_many_arguments)]
pub fn estimate_expected_gap(
    f_oracle: &StochasticOracle,
    g_oracle: &StochasticOracle,
    geom: &Geometry,
    q: &FeasibleSet,
    cfg: &SolverConfig,
    f_star: f64,
    trials: usize,
    seed: u64,
) -> Result<GapEstimate> {
    if trials < 2 {
        return Err(Error::Config(
            "the gap estimate needs at least 2 trials for a standard error".into(),
        ));
    }
    let mut outcomes = Vec::with_capacity(trials);
    for trial in 0..trials {
        let report = solve_stochastic(f_oracle, g_oracle, geom, q, cfg, seed, trial as u64)?;
        outcomes.push(TrialOutcome {
            trial,
            seed,
            iterations: report.iterations,
            productive: report.ledger.productive_count(),
            nonproductive: report.ledger.nonproductive_count(),
            f_hat: f_oracle.value(&report.x_hat),
            g_hat: g_oracle.value(&report.x_hat),
        });
    }
    let gaps: Vec<f64> = outcomes.iter().map(|t| t.f_hat - f_star).collect();
    let mean_gap = gaps.iter().sum::<f64>() / trials as f64;
    let variance =
        gaps.iter().map(|g| (g - mean_gap).powi(2)).sum::<f64>() / (trials - 1) as f64;
    Ok(GapEstimate {
        mean_gap,
        stderr: (variance / trials as f64).sqrt(),
        trials: outcomes,
    })
}

/// CSV export of trial rows: `trial,seed,n,productive,nonproductive,f_hat,g_hat`.
pub fn trials_csv(trials: &[TrialOutcome]) -> String {
    let mut out = String::from("trial,seed,n,productive,nonproductive,f_hat,g_hat\n");
    for t in trials {
        out.push_str(&format!(
            "{},{},{},{},{},{:.12},{:.12}\n",
            t.trial, t.seed, t.iterations, t.productive, t.nonproductive, t.f_hat, t.g_hat
        ));
    }
    out
}
