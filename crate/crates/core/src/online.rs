//! Online switching mirror descent over a stream of objectives.
//!
//! The solver serves `N` rounds against a static constraint `g`: at each
//! iterate it first tests `g(x^k) ≤ ε + δ`; on success the round's objective
//! `f_i` is revealed, one mirror step is taken on its model (a productive
//! step, exactly one per round) and the stream advances; on failure a
//! non-productive step is taken on the constraint's model. Both step kinds
//! use the single step size `h = ε / M²` with `M = max{M_i, M_g}`.
//!
//! The run certifies the accuracy
//!
//! ```text
//! κ = (|J|/N)(-ε/2) + (ε/2 + δ) + M² Θ0² / (N ε)
//! ```
//!
//! bounding the realized average regret, and whenever that regret is
//! non-negative the number of non-productive steps obeys
//! [`nonproductive_bound`].

use crate::error::{Error, Result};
use crate::geometry::{argmin_reference, mirror_step, FeasibleSet, Geometry};
use crate::model::{Functional, SubgradientFn, ValueFn};
use crate::solvers::{
    solve_relative_v2, SolverConfig, StepKind, StepLedger, StepRecord,
};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// A stream of per-round objectives. `reveal` is called exactly once per
/// round, in order, at the iterate where the round goes productive — an
/// adaptive adversary may use that iterate.
pub trait ObjectiveStream {
    fn rounds(&self) -> usize;
    /// Reveal the objective of 1-based round `round`.
    fn reveal(&mut self, round: usize, at: &[f64]) -> Functional;
}

/// A pre-built, oblivious stream.
pub struct FixedStream {
    objectives: Vec<Functional>,
}

impl FixedStream {
    pub fn new(objectives: Vec<Functional>) -> Self {
        FixedStream { objectives }
    }
}

impl ObjectiveStream for FixedStream {
    fn rounds(&self) -> usize {
        self.objectives.len()
    }

    fn reveal(&mut self, round: usize, _at: &[f64]) -> Functional {
        self.objectives[round - 1].clone()
    }
}

#[derive(Clone, Debug)]
pub struct OnlineConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// `M = max{M_i, M_g}`, known up front.
    pub m: f64,
    pub theta0_sq: f64,
    pub x0: Option<Vec<f64>>,
    /// Cap on non-productive steps; defaults to 10x [`nonproductive_bound`]
    /// plus slack. Exceeding it signals a mis-specified `M` or `Θ0²`.
    pub max_nonproductive: Option<usize>,
    /// Compute the regret comparator after the run by minimizing the
    /// realized average objective with the version-2 solver at accuracy
    /// ε/100 (only linear model terms are supported for the average).
    pub compute_regret: bool,
}

impl OnlineConfig {
    pub fn new(epsilon: f64, m: f64, theta0_sq: f64) -> Self {
        OnlineConfig {
            epsilon,
            delta: 0.0,
            m,
            theta0_sq,
            x0: None,
            max_nonproductive: None,
            compute_regret: false,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, value, strict) in [
            ("epsilon", self.epsilon, true),
            ("delta", self.delta, false),
            ("m", self.m, true),
            ("theta0_sq", self.theta0_sq, true),
        ] {
            if !value.is_finite() || (strict && value <= 0.0) || (!strict && value < 0.0) {
                return Err(Error::Config(format!("{name} out of range: {value}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OnlineReport {
    /// The iterate current when each round went productive; length `N`.
    pub productive_iterates: Vec<Vec<f64>>,
    /// `f_i` evaluated at its round's iterate; length `N`.
    pub round_values: Vec<f64>,
    pub nonproductive: usize,
    /// Certified accuracy for the realized average regret.
    pub kappa: f64,
    /// Realized average regret against the post-hoc comparator, when one was
    /// requested.
    pub regret: Option<f64>,
    pub ledger: StepLedger,
    pub wall_time: Duration,
}

impl OnlineReport {
    /// `(1/N) Σ_i f_i(x^{k_i})`.
    pub fn average_objective(&self) -> f64 {
        self.round_values.iter().sum::<f64>() / self.round_values.len() as f64
    }

    /// Realized average regret against an externally computed comparator
    /// value `min_x (1/N) Σ_i f_i(x)`.
    pub fn regret_against(&self, comparator_value: f64) -> f64 {
        self.average_objective() - comparator_value
    }
}

/// `κ` as a function of the run shape.
pub fn kappa(cfg: &OnlineConfig, rounds: usize, nonproductive: usize) -> f64 {
    let n = rounds as f64;
    (nonproductive as f64 / n) * (-cfg.epsilon / 2.0)
        + (cfg.epsilon / 2.0 + cfg.delta)
        + cfg.m * cfg.m * cfg.theta0_sq / (n * cfg.epsilon)
}

/// Bound on non-productive steps, valid whenever the realized regret is
/// non-negative: `N (1 + 2δ/ε) + 2 M² Θ0² / ε²`.
pub fn nonproductive_bound(cfg: &OnlineConfig, rounds: usize) -> f64 {
    rounds as f64 * (1.0 + 2.0 * cfg.delta / cfg.epsilon)
        + 2.0 * cfg.m * cfg.m * cfg.theta0_sq / (cfg.epsilon * cfg.epsilon)
}

/// Run the online scheme until exactly `stream.rounds()` productive steps
/// have been taken.
pub fn solve_online(
    stream: &mut dyn ObjectiveStream,
    g: &Functional,
    geom: &Geometry,
    q: &FeasibleSet,
    cfg: &OnlineConfig,
) -> Result<OnlineReport> {
    cfg.validate()?;
    let rounds = stream.rounds();
    if rounds == 0 {
        return Err(Error::Config("the stream must carry at least one round".into()));
    }
    let start = Instant::now();
    let step = cfg.epsilon / (cfg.m * cfg.m);
    let threshold = cfg.epsilon + cfg.delta;
    let nonproductive_cap = cfg.max_nonproductive.unwrap_or_else(|| {
        let bound = nonproductive_bound(cfg, rounds);
        (bound.ceil().max(0.0) as usize).saturating_mul(10) + 100
    });

    let mut x = match &cfg.x0 {
        Some(x0) => {
            if !q.contains(x0, 1e-9) {
                return Err(Error::Config("x0 override lies outside the feasible set".into()));
            }
            x0.clone()
        }
        None => argmin_reference(geom, q)?,
    };
    let mut ledger = StepLedger::default();
    let mut productive_iterates = Vec::with_capacity(rounds);
    let mut round_values = Vec::with_capacity(rounds);
    let mut revealed: Vec<Functional> = Vec::with_capacity(rounds);
    let mut round = 1usize;
    let mut k = 0usize;
    let mut nonproductive = 0usize;

    while round <= rounds {
        let g_at_x = g.value(&x);
        let is_productive = g_at_x <= threshold;
        let term = if is_productive {
            let objective = stream.reveal(round, &x);
            round_values.push(objective.value(&x));
            productive_iterates.push(x.clone());
            ledger.objective_subgradient_evals += 1;
            let term = objective.model().term_at(&x);
            revealed.push(objective);
            round += 1;
            term
        } else {
            nonproductive += 1;
            ledger.constraint_subgradient_evals += 1;
            g.model().term_at(&x)
        };
        ledger.records.push(StepRecord {
            index: k,
            kind: if is_productive {
                StepKind::Productive
            } else {
                StepKind::NonProductive
            },
            step_size: step,
            constraint_value: g_at_x,
            objective_value: if is_productive {
                round_values.last().copied()
            } else {
                None
            },
            constraint_index: if is_productive { None } else { Some(0) },
            divergence_to_reference: None,
        });
        x = mirror_step(geom, q, &x, step, &term)?;
        k += 1;
        if nonproductive > nonproductive_cap {
            return Err(Error::Budget {
                budget: nonproductive_cap,
                ledger: Box::new(ledger),
            });
        }
    }

    let kappa = kappa(cfg, rounds, nonproductive);
    let regret = if cfg.compute_regret {
        Some(comparator_regret(&revealed, &round_values, g, geom, q, cfg)?)
    } else {
        None
    };
    Ok(OnlineReport {
        productive_iterates,
        round_values,
        nonproductive,
        kappa,
        regret,
        ledger,
        wall_time: start.elapsed(),
    })
}

/// Post-hoc comparator: minimize the realized average objective over the
/// feasible region with the version-2 solver at accuracy ε/100.
fn comparator_regret(
    revealed: &[Functional],
    round_values: &[f64],
    g: &Functional,
    geom: &Geometry,
    q: &FeasibleSet,
    cfg: &OnlineConfig,
) -> Result<f64> {
    let objectives: Arc<Vec<Functional>> = Arc::new(revealed.to_vec());
    let count = objectives.len() as f64;
    let value: ValueFn = {
        let objectives = objectives.clone();
        Arc::new(move |x: &[f64]| objectives.iter().map(|f| f.value(x)).sum::<f64>() / count)
    };
    let subgradient: SubgradientFn = {
        let objectives = objectives.clone();
        Arc::new(move |x: &[f64]| {
            let mut slope = vec![0.0; x.len()];
            for f in objectives.iter() {
                let term = f.model().term_at(x);
                for (acc, s) in slope.iter_mut().zip(&term.slope) {
                    *acc += s / count;
                }
            }
            slope
        })
    };
    let average = Functional::relative_lipschitz(value.clone(), subgradient, cfg.m, 0.0)?;
    let mut inner = SolverConfig::new(cfg.epsilon / 100.0, cfg.m, cfg.m, cfg.theta0_sq);
    inner.delta = 0.0;
    let comparator = solve_relative_v2(&average, g, geom, q, &inner)?;
    let minimum = value(&comparator.x_hat);
    Ok(round_values.iter().sum::<f64>() / count - minimum)
}
