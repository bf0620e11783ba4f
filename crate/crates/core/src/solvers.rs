//! Switching mirror-descent solvers.
//!
//! All solvers share one loop: test the constraint at the current iterate,
//! take a mirror step on the objective's model when the test passes (a
//! *productive* step) and on a violated constraint's model when it fails (a
//! *non-productive* step), and stop once the scheme-specific criterion holds.
//! The output is the uniform average of productive iterates.
//!
//! - [`solve_model_general`]: caller-supplied step sizes, stopping rule
//!   driven by the models' conjugate growth functions; guarantees an
//!   (ε + δ)-solution.
//! - [`solve_relative_v1`]: steps ε/M, fixed iteration count
//!   `ceil(2 Θ0² / ε²)`; guarantees `f` within `M_f ε + δ` and `g ≤ M_g ε + δ`.
//! - [`solve_relative_v2`]: steps ε/M², adaptive weighted stopping rule;
//!   guarantees an (ε + δ)-solution in at most `2 M² Θ0² / ε²` iterations.
//! - [`solve_multi_v1`] / [`solve_multi_v2`]: several constraints; each
//!   non-productive step evaluates exactly one violated constraint's
//!   subgradient, with that constraint's own step size.

use crate::error::{Error, Result};
use crate::geometry::{argmin_reference, mirror_step, FeasibleSet, Geometry};
use crate::linalg::{add_assign, all_finite, scale};
use crate::model::{Functional, ModelTerm};
use std::time::{Duration, Instant};

/// Scalar inputs shared by the solvers.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Target accuracy ε > 0.
    pub epsilon: f64,
    /// Algorithmic inexactness δ ≥ 0 entering thresholds and guarantees.
    pub delta: f64,
    /// Relative Lipschitz constant of the objective.
    pub m_f: f64,
    /// Relative Lipschitz constant of the (single) constraint.
    pub m_g: f64,
    /// Θ0² with `d(x*) ≤ Θ0²`, sizing the stopping criteria.
    pub theta0_sq: f64,
    /// h^f for the solvers that take caller-supplied step sizes.
    pub step_f: Option<f64>,
    /// h^g for the solvers that take caller-supplied step sizes.
    pub step_g: Option<f64>,
    /// Starting point override; defaults to `argmin_Q d`.
    pub x0: Option<Vec<f64>>,
    /// Safety cap; defaults to 10x the scheme's theoretical bound.
    pub max_iterations: Option<usize>,
    /// When set, per-step records carry the divergence to this point and, in
    /// debug builds, every step is checked against the descent inequality.
    pub reference_point: Option<Vec<f64>>,
    /// Record f(x^k) on productive steps (costs one value call per step;
    /// off by default to keep oracle counts honest).
    pub record_objective: bool,
}

impl SolverConfig {
    pub fn new(epsilon: f64, m_f: f64, m_g: f64, theta0_sq: f64) -> Self {
        SolverConfig {
            epsilon,
            delta: 0.0,
            m_f,
            m_g,
            theta0_sq,
            step_f: None,
            step_g: None,
            x0: None,
            max_iterations: None,
            reference_point: None,
            record_objective: false,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, value, strict) in [
            ("epsilon", self.epsilon, true),
            ("delta", self.delta, false),
            ("m_f", self.m_f, true),
            ("m_g", self.m_g, true),
            ("theta0_sq", self.theta0_sq, true),
        ] {
            if !value.is_finite() || (strict && value <= 0.0) || (!strict && value < 0.0) {
                return Err(Error::Config(format!("{name} out of range: {value}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Productive,
    NonProductive,
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub index: usize,
    pub kind: StepKind,
    pub step_size: f64,
    /// max_p g_p(x^k), the value driving the productivity test.
    pub constraint_value: f64,
    /// f(x^k), recorded on productive steps when tracing is enabled.
    pub objective_value: Option<f64>,
    /// Position in the constraints slice stepped on (non-productive only).
    pub constraint_index: Option<usize>,
    /// V_d(reference, x^k) when a reference point was supplied.
    pub divergence_to_reference: Option<f64>,
}

/// Per-step ledger: the I/J partition plus oracle-call counters.
#[derive(Clone, Debug, Default)]
pub struct StepLedger {
    pub records: Vec<StepRecord>,
    pub objective_subgradient_evals: usize,
    pub constraint_subgradient_evals: usize,
}

impl StepLedger {
    pub fn productive_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.kind == StepKind::Productive)
            .count()
    }

    pub fn nonproductive_count(&self) -> usize {
        self.records.len() - self.productive_count()
    }

    pub fn productive_indices(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.kind == StepKind::Productive)
            .map(|r| r.index)
            .collect()
    }

    pub fn nonproductive_indices(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.kind == StepKind::NonProductive)
            .map(|r| r.index)
            .collect()
    }
}

/// The bounds promised by the theorem matching the solver that produced a
/// report: `f(x̂) - f(x*) ≤ objective_gap` and `g(x̂) ≤ constraint_bound`.
#[derive(Clone, Copy, Debug)]
pub struct Guarantee {
    pub objective_gap: f64,
    pub constraint_bound: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    /// Uniform average of the productive iterates.
    pub x_hat: Vec<f64>,
    pub ledger: StepLedger,
    pub iterations: usize,
    pub guarantee: Guarantee,
    pub wall_time: Duration,
}

/// Stopping criteria, evaluated after each iteration completes.
pub(crate) enum StopRule {
    /// Run exactly `total` iterations.
    FixedCount { total: usize },
    /// Stop once `|I| w_f + Σ_p count_p w_p ≥ target`.
    Weighted {
        target: f64,
        weight_f: f64,
        weights_g: Vec<f64>,
    },
    /// Stop once `|I| gain_f + |J| gain_g ≥ theta0_sq`, with
    /// `gain = ε h - φ*(h)` per step kind.
    Gain {
        theta0_sq: f64,
        gain_f: f64,
        gain_g: f64,
    },
}

impl StopRule {
    fn satisfied(&self, productive: usize, per_constraint: &[usize], total: usize) -> bool {
        match self {
            StopRule::FixedCount { total: want } => total >= *want,
            StopRule::Weighted {
                target,
                weight_f,
                weights_g,
            } => {
                let nonproductive: f64 = per_constraint
                    .iter()
                    .zip(weights_g)
                    .map(|(count, w)| *count as f64 * w)
                    .sum();
                productive as f64 * weight_f + nonproductive >= *target
            }
            StopRule::Gain {
                theta0_sq,
                gain_f,
                gain_g,
            } => {
                let nonproductive: usize = per_constraint.iter().sum();
                productive as f64 * gain_f + nonproductive as f64 * gain_g >= *theta0_sq
            }
        }
    }
}

pub(crate) struct EngineSpec<'a> {
    pub geom: &'a Geometry,
    pub q: &'a FeasibleSet,
    pub x0: Vec<f64>,
    /// Productive iff `max_p g_p(x^k) ≤ threshold`.
    pub threshold: f64,
    pub step_f: f64,
    pub steps_g: Vec<f64>,
    pub stop: StopRule,
    pub budget: usize,
    pub f_delta: f64,
    pub g_deltas: Vec<f64>,
    pub f_phi_conj: f64,
    pub g_phi_conjs: Vec<f64>,
    pub guarantee: Guarantee,
    pub reference: Option<Vec<f64>>,
    pub record_objective: bool,
    /// Assert the per-step descent inequality against the reference point in
    /// debug builds. Valid for deterministic models only; sampled slopes
    /// satisfy it in expectation, not per step.
    pub check_descent: bool,
}

/// The switching loop shared by every deterministic and stochastic solver.
pub(crate) fn run_switching(
    spec: EngineSpec<'_>,
    f_value: &dyn Fn(&[f64]) -> f64,
    f_term: &mut dyn FnMut(&[f64], usize) -> ModelTerm,
    g_values: &[Box<dyn Fn(&[f64]) -> f64 + '_>],
    g_term: &mut dyn FnMut(usize, &[f64], usize) -> ModelTerm,
) -> Result<RunReport> {
    let start = Instant::now();
    let constraint_count = g_values.len();
    assert!(constraint_count >= 1, "engine needs at least one constraint");
    if !spec.q.contains(&spec.x0, 1e-9) {
        return Err(Error::Config("starting point lies outside the feasible set".into()));
    }

    let mut x = spec.x0.clone();
    let mut ledger = StepLedger::default();
    let mut sum_productive = vec![0.0; x.len()];
    let mut productive = 0usize;
    let mut per_constraint = vec![0usize; constraint_count];
    let mut n = 0usize;

    loop {
        let g_at_x: Vec<f64> = g_values.iter().map(|g| g(&x)).collect();
        let g_max = g_at_x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let is_productive = g_max <= spec.threshold;
        // Lowest-index violated constraint drives a non-productive step.
        let selected = if is_productive {
            None
        } else {
            Some(
                g_at_x
                    .iter()
                    .position(|&v| v > spec.threshold)
                    .expect("max exceeds the threshold, so some entry does"),
            )
        };

        let (h, term) = match selected {
            None => {
                ledger.objective_subgradient_evals += 1;
                (spec.step_f, f_term(&x, n))
            }
            Some(p) => {
                ledger.constraint_subgradient_evals += 1;
                (spec.steps_g[p], g_term(p, &x, n))
            }
        };
        let x_next = mirror_step(spec.geom, spec.q, &x, h, &term)?;

        let divergence_to_reference = spec
            .reference
            .as_ref()
            .map(|y| spec.geom.bregman_unchecked(y, &x));
        #[cfg(debug_assertions)]
        if let (Some(y), true) = (&spec.reference, spec.check_descent) {
            let (value_gap, phi_conj, delta) = match selected {
                None => (f_value(&x) - f_value(y), spec.f_phi_conj, spec.f_delta),
                Some(p) => (
                    g_values[p](&x) - g_values[p](y),
                    spec.g_phi_conjs[p],
                    spec.g_deltas[p],
                ),
            };
            let lhs = h * value_gap;
            let rhs = phi_conj + spec.geom.bregman_unchecked(y, &x)
                - spec.geom.bregman_unchecked(y, &x_next)
                + h * delta
                + 1e-9;
            debug_assert!(
                lhs <= rhs,
                "descent inequality violated at step {n}: {lhs} > {rhs}"
            );
        }

        ledger.records.push(StepRecord {
            index: n,
            kind: if is_productive {
                StepKind::Productive
            } else {
                StepKind::NonProductive
            },
            step_size: h,
            constraint_value: g_max,
            objective_value: if is_productive && spec.record_objective {
                Some(f_value(&x))
            } else {
                None
            },
            constraint_index: selected,
            divergence_to_reference,
        });

        match selected {
            None => {
                add_assign(&mut sum_productive, &x);
                productive += 1;
            }
            Some(p) => per_constraint[p] += 1,
        }
        x = x_next;
        n += 1;

        if spec.stop.satisfied(productive, &per_constraint, n) {
            break;
        }
        if n >= spec.budget {
            return Err(Error::Budget {
                budget: spec.budget,
                ledger: Box::new(ledger),
            });
        }
    }

    if productive == 0 {
        return Err(Error::NoProductiveSteps {
            iterations: n,
            nonproductive: n,
        });
    }
    let x_hat = scale(&sum_productive, 1.0 / productive as f64);
    debug_assert!(spec.q.contains(&x_hat, 1e-12));
    Ok(RunReport {
        x_hat,
        ledger,
        iterations: n,
        guarantee: spec.guarantee,
        wall_time: start.elapsed(),
    })
}

fn resolve_x0(geom: &Geometry, q: &FeasibleSet, cfg: &SolverConfig) -> Result<Vec<f64>> {
    match &cfg.x0 {
        Some(x0) => {
            if x0.len() != q.dim() {
                return Err(Error::DimensionMismatch {
                    expected: q.dim(),
                    got: x0.len(),
                });
            }
            if !all_finite(x0) || !q.contains(x0, 1e-9) {
                return Err(Error::Config("x0 override lies outside the feasible set".into()));
            }
            Ok(x0.clone())
        }
        None => argmin_reference(geom, q),
    }
}

fn ceil_count(value: f64) -> usize {
    if !value.is_finite() {
        return usize::MAX;
    }
    value.ceil().max(1.0) as usize
}

/// `ceil(2 M² Θ0² / ε²)` with `M = max{M_f, M_g}` — the iteration bound the
/// default budget (10x) is derived from.
pub fn iteration_bound(epsilon: f64, theta0_sq: f64, m_max: f64) -> usize {
    ceil_count(2.0 * m_max * m_max * theta0_sq / (epsilon * epsilon))
}

fn default_budget(cfg: &SolverConfig, m_max: f64) -> usize {
    cfg.max_iterations
        .unwrap_or_else(|| iteration_bound(cfg.epsilon, cfg.theta0_sq, m_max).saturating_mul(10))
}

fn boxed_values<'a>(fns: &'a [&'a Functional]) -> Vec<Box<dyn Fn(&[f64]) -> f64 + 'a>> {
    fns.iter()
        .map(|g| Box::new(move |x: &[f64]| g.value(x)) as Box<dyn Fn(&[f64]) -> f64>)
        .collect()
}

/// Switching mirror descent for a general (δ,φ,V)-model with caller-supplied
/// step sizes `cfg.step_f`, `cfg.step_g`.
///
/// Productive test: `g(x^k) ≤ ε + δ`. Stopping:
/// `Θ0² ≤ ε(|J| h^g + |I| h^f) - |J| φ_g*(h^g) - |I| φ_f*(h^f)`.
/// After stopping, `f(x̂) - f(x*) ≤ ε + δ` and `g(x̂) ≤ ε + δ`.
pub fn solve_model_general(
    f: &Functional,
    g: &Functional,
    geom: &Geometry,
    q: &FeasibleSet,
    cfg: &SolverConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    let step_f = cfg
        .step_f
        .ok_or_else(|| Error::Config("solve_model_general needs step_f".into()))?;
    let step_g = cfg
        .step_g
        .ok_or_else(|| Error::Config("solve_model_general needs step_g".into()))?;
    if !(step_f > 0.0) || !(step_g > 0.0) {
        return Err(Error::Config("step sizes must be positive".into()));
    }
    let f_phi_conj = f.model().phi_conjugate(step_f);
    let g_phi_conj = g.model().phi_conjugate(step_g);
    let bound = cfg.epsilon + cfg.delta;
    let spec = EngineSpec {
        geom,
        q,
        x0: resolve_x0(geom, q, cfg)?,
        threshold: cfg.epsilon + cfg.delta,
        step_f,
        steps_g: vec![step_g],
        stop: StopRule::Gain {
            theta0_sq: cfg.theta0_sq,
            gain_f: cfg.epsilon * step_f - f_phi_conj,
            gain_g: cfg.epsilon * step_g - g_phi_conj,
        },
        budget: default_budget(cfg, cfg.m_f.max(cfg.m_g)),
        f_delta: f.model().delta(),
        g_deltas: vec![g.model().delta()],
        f_phi_conj,
        g_phi_conjs: vec![g_phi_conj],
        guarantee: Guarantee {
            objective_gap: bound,
            constraint_bound: bound,
        },
        reference: cfg.reference_point.clone(),
        record_objective: cfg.record_objective,
        check_descent: true,
    };
    run_switching(
        spec,
        &|x| f.value(x),
        &mut |x, _| f.model().term_at(x),
        &boxed_values(&[g]),
        &mut |_, x, _| g.model().term_at(x),
    )
}

/// Relative-Lipschitz scheme, version 1: steps `h^f = ε/M_f`, `h^g = ε/M_g`,
/// productive test `g(x^k) ≤ M_g ε + δ`, and exactly `ceil(2 Θ0² / ε²)`
/// iterations. After stopping, `f(x̂) - f(x*) ≤ M_f ε + δ` and
/// `g(x̂) ≤ M_g ε + δ`.
pub fn solve_relative_v1(
    f: &Functional,
    g: &Functional,
    geom: &Geometry,
    q: &FeasibleSet,
    cfg: &SolverConfig,
) -> Result<RunReport> {
    let guarantee = Guarantee {
        objective_gap: cfg.m_f * cfg.epsilon + cfg.delta,
        constraint_bound: cfg.m_g * cfg.epsilon + cfg.delta,
    };
    solve_multi_with(f, &[g], &[cfg.m_g], geom, q, cfg, Scheme::V1, guarantee)
}

/// Relative-Lipschitz scheme, version 2: steps `h^f = ε/M_f²`,
/// `h^g = ε/M_g²`, productive test `g(x^k) ≤ ε + δ`, stopping once
/// `2 Θ0² / ε² ≤ |I|/M_f² + |J|/M_g²`. After stopping,
/// `f(x̂) - f(x*) ≤ ε + δ` and `g(x̂) ≤ ε + δ`, in at most
/// `2 M² Θ0² / ε²` iterations.
pub fn solve_relative_v2(
    f: &Functional,
    g: &Functional,
    geom: &Geometry,
    q: &FeasibleSet,
    cfg: &SolverConfig,
) -> Result<RunReport> {
    let bound = cfg.epsilon + cfg.delta;
    let guarantee = Guarantee {
        objective_gap: bound,
        constraint_bound: bound,
    };
    solve_multi_with(f, &[g], &[cfg.m_g], geom, q, cfg, Scheme::V2, guarantee)
}

/// Version-1 scheme for several constraints `g_p ≤ 0`. The productive test
/// uses `max_p g_p`; a non-productive step evaluates only the lowest-index
/// violated constraint's subgradient, with step `ε / M_{g_p}`. Per-constraint
/// constants come from each constraint's model. Guarantees
/// `f(x̂) - f(x*) ≤ M_g ε + δ` and `max_p g_p(x̂) ≤ M_g ε + δ` with
/// `M_g = max_p M_{g_p}`.
pub fn solve_multi_v1(
    f: &Functional,
    constraints: &[&Functional],
    geom: &Geometry,
    q: &FeasibleSet,
    cfg: &SolverConfig,
) -> Result<RunReport> {
    let ms = constraint_constants(constraints)?;
    let m_g = ms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bound = m_g * cfg.epsilon + cfg.delta;
    let guarantee = Guarantee {
        objective_gap: bound,
        constraint_bound: bound,
    };
    solve_multi_with(f, constraints, &ms, geom, q, cfg, Scheme::V1, guarantee)
}

/// Version-2 scheme for several constraints: step `ε / M_{g_p}²` on the
/// selected constraint, stopping once
/// `2 Θ0² / ε² ≤ |I|/M_f² + Σ_{k∈J} 1/M_{g_{p(k)}}²`. Guarantees an
/// (ε + δ)-solution.
pub fn solve_multi_v2(
    f: &Functional,
    constraints: &[&Functional],
    geom: &Geometry,
    q: &FeasibleSet,
    cfg: &SolverConfig,
) -> Result<RunReport> {
    let ms = constraint_constants(constraints)?;
    let bound = cfg.epsilon + cfg.delta;
    let guarantee = Guarantee {
        objective_gap: bound,
        constraint_bound: bound,
    };
    solve_multi_with(f, constraints, &ms, geom, q, cfg, Scheme::V2, guarantee)
}

fn constraint_constants(constraints: &[&Functional]) -> Result<Vec<f64>> {
    constraints
        .iter()
        .map(|g| {
            g.model().rel_lipschitz().ok_or_else(|| {
                Error::Config(
                    "multi-constraint solvers need relative-Lipschitz constraint models".into(),
                )
            })
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Scheme {
    V1,
    V2,
}

#[allow(clippy::too_many_arguments)]
fn solve_multi_with(
    f: &Functional,
    constraints: &[&Functional],
    ms: &[f64],
    geom: &Geometry,
    q: &FeasibleSet,
    cfg: &SolverConfig,
    scheme: Scheme,
    guarantee: Guarantee,
) -> Result<RunReport> {
    cfg.validate()?;
    if constraints.is_empty() {
        return Err(Error::Config("at least one constraint is required".into()));
    }
    if ms.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Config("constraint constants must be positive".into()));
    }
    let m_g = ms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let eps = cfg.epsilon;
    let (threshold, step_f, steps_g, stop) = match scheme {
        Scheme::V1 => (
            m_g * eps + cfg.delta,
            eps / cfg.m_f,
            ms.iter().map(|m| eps / m).collect::<Vec<f64>>(),
            StopRule::FixedCount {
                total: ceil_count(2.0 * cfg.theta0_sq / (eps * eps)),
            },
        ),
        Scheme::V2 => (
            eps + cfg.delta,
            eps / (cfg.m_f * cfg.m_f),
            ms.iter().map(|m| eps / (m * m)).collect::<Vec<f64>>(),
            StopRule::Weighted {
                target: 2.0 * cfg.theta0_sq / (eps * eps),
                weight_f: 1.0 / (cfg.m_f * cfg.m_f),
                weights_g: ms.iter().map(|m| 1.0 / (m * m)).collect(),
            },
        ),
    };
    let budget = match scheme {
        Scheme::V1 => cfg
            .max_iterations
            .unwrap_or_else(|| ceil_count(2.0 * cfg.theta0_sq / (eps * eps)).saturating_mul(10)),
        Scheme::V2 => default_budget(cfg, cfg.m_f.max(m_g)),
    };
    let f_phi_conj = f.model().phi_conjugate(step_f);
    let g_phi_conjs: Vec<f64> = constraints
        .iter()
        .zip(&steps_g)
        .map(|(g, h)| g.model().phi_conjugate(*h))
        .collect();
    let spec = EngineSpec {
        geom,
        q,
        x0: resolve_x0(geom, q, cfg)?,
        threshold,
        step_f,
        steps_g,
        stop,
        budget,
        f_delta: f.model().delta(),
        g_deltas: constraints.iter().map(|g| g.model().delta()).collect(),
        f_phi_conj,
        g_phi_conjs,
        guarantee,
        reference: cfg.reference_point.clone(),
        record_objective: cfg.record_objective,
        check_descent: true,
    };
    run_switching(
        spec,
        &|x| f.value(x),
        &mut |x, _| f.model().term_at(x),
        &boxed_values(constraints),
        &mut |p, x, _| constraints[p].model().term_at(x),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn abs_functional(shift: f64, m: f64) -> Functional {
        Functional::relative_lipschitz(
            Arc::new(move |x: &[f64]| (x[0] - shift).abs()),
            Arc::new(move |x: &[f64]| {
                vec![if x[0] > shift {
                    1.0
                } else if x[0] < shift {
                    -1.0
                } else {
                    0.0
                }]
            }),
            m,
            0.0,
        )
        .unwrap()
    }

    fn affine_functional(slope: f64, offset: f64, m: f64) -> Functional {
        Functional::relative_lipschitz(
            Arc::new(move |x: &[f64]| slope * x[0] + offset),
            Arc::new(move |_: &[f64]| vec![slope]),
            m,
            0.0,
        )
        .unwrap()
    }

    fn constant_functional(c: f64, m: f64) -> Functional {
        Functional::relative_lipschitz(
            Arc::new(move |_: &[f64]| c),
            Arc::new(|x: &[f64]| vec![0.0; x.len()]),
            m,
            0.0,
        )
        .unwrap()
    }

    fn interval() -> FeasibleSet {
        FeasibleSet::box_set(vec![-1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn model_general_meets_its_guarantee_on_a_switching_instance() {
        // Optimum of |x - 0.9| under x - 0.5 <= 0 on [-1, 1] is x* = 0.5.
        let f = abs_functional(0.9, 1.0);
        let g = affine_functional(1.0, -0.5, 1.0);
        let mut cfg = SolverConfig::new(0.1, 1.0, 1.0, 0.5);
        cfg.step_f = Some(0.1);
        cfg.step_g = Some(0.1);
        cfg.reference_point = Some(vec![0.5]);
        let report =
            solve_model_general(&f, &g, &Geometry::Euclidean, &interval(), &cfg).unwrap();
        // Per-step gain is eps*h - h^2/2 = 0.005 for both kinds.
        assert_eq!(report.iterations, 100);
        let f_star = 0.4;
        assert!(f.value(&report.x_hat) - f_star <= report.guarantee.objective_gap + 1e-9);
        assert!(g.value(&report.x_hat) <= report.guarantee.constraint_bound + 1e-9);
    }

    #[test]
    fn model_general_on_the_trivial_instance() {
        let f = abs_functional(0.0, 1.0);
        let g = affine_functional(1.0, -0.5, 1.0);
        let mut cfg = SolverConfig::new(0.1, 1.0, 1.0, 0.5);
        cfg.step_f = Some(0.1);
        cfg.step_g = Some(0.1);
        cfg.reference_point = Some(vec![0.0]);
        let report =
            solve_model_general(&f, &g, &Geometry::Euclidean, &interval(), &cfg).unwrap();
        assert!(f.value(&report.x_hat) <= 0.1 + 1e-9);
        assert!(g.value(&report.x_hat) <= 0.1 + 1e-9);
    }

    #[test]
    fn never_violated_constraint_makes_every_step_productive() {
        let f = abs_functional(0.2, 1.0);
        let g = constant_functional(-1.0, 1.0);
        let mut cfg = SolverConfig::new(0.1, 1.0, 1.0, 0.5);
        cfg.step_f = Some(0.1);
        cfg.step_g = Some(0.1);
        let report =
            solve_model_general(&f, &g, &Geometry::Euclidean, &interval(), &cfg).unwrap();
        assert_eq!(report.ledger.nonproductive_count(), 0);
        // Criterion reduces to theta0_sq <= |I| (eps h^f - phi_f*(h^f)).
        assert_eq!(report.iterations, 100);
    }

    #[test]
    fn unreachable_stopping_criterion_exhausts_the_budget() {
        let f = abs_functional(0.2, 1.0);
        let g = affine_functional(1.0, -0.5, 1.0);
        let mut cfg = SolverConfig::new(0.1, 1.0, 1.0, 0.5);
        // eps h == phi*(h) exactly: zero gain per step, criterion unreachable.
        cfg.step_f = Some(0.2);
        cfg.step_g = Some(0.2);
        cfg.max_iterations = Some(50);
        let err = solve_model_general(&f, &g, &Geometry::Euclidean, &interval(), &cfg)
            .unwrap_err();
        match err {
            Error::Budget { budget, ledger } => {
                assert_eq!(budget, 50);
                assert_eq!(ledger.records.len(), 50);
            }
            other => panic!("expected Budget, got {other:?}"),
        }
    }

    #[test]
    fn v1_runs_exactly_the_formula_count() {
        let f = abs_functional(0.2, 1.0);
        let g = constant_functional(-1.0, 1.0);
        for (eps, want) in [(0.5, 16), (0.25, 64), (0.125, 256)] {
            let cfg = SolverConfig::new(eps, 1.0, 1.0, 2.0);
            let report =
                solve_relative_v1(&f, &g, &Geometry::Euclidean, &interval(), &cfg).unwrap();
            assert_eq!(report.iterations, want, "eps = {eps}");
        }
    }

    #[test]
    fn v2_all_productive_stops_at_the_reduced_criterion() {
        let f = abs_functional(0.2, 1.0);
        let g = constant_functional(-1.0, 2.0);
        let cfg = SolverConfig::new(0.5, 1.0, 2.0, 2.0);
        let report = solve_relative_v2(&f, &g, &Geometry::Euclidean, &interval(), &cfg).unwrap();
        assert_eq!(report.iterations, 16);
        assert_eq!(report.ledger.nonproductive_count(), 0);
    }

    #[test]
    fn v2_all_nonproductive_raises_no_productive_steps() {
        let f = abs_functional(0.2, 1.0);
        let g = constant_functional(2.0, 2.0);
        let cfg = SolverConfig::new(0.5, 1.0, 2.0, 2.0);
        let err = solve_relative_v2(&f, &g, &Geometry::Euclidean, &interval(), &cfg).unwrap_err();
        match err {
            Error::NoProductiveSteps { iterations, .. } => assert_eq!(iterations, 64),
            other => panic!("expected NoProductiveSteps, got {other:?}"),
        }
    }

    #[test]
    fn multi_with_one_constraint_matches_the_single_solver_bitwise() {
        let f = abs_functional(0.9, 1.0);
        let g = affine_functional(2.0, -1.9, 2.0);
        let cfg = SolverConfig::new(0.05, 1.0, 2.0, 0.5);
        let q = FeasibleSet::box_set(vec![0.0], vec![1.0]).unwrap();
        let single = solve_relative_v1(&f, &g, &Geometry::Euclidean, &q, &cfg).unwrap();
        let multi = solve_multi_v1(&f, &[&g], &Geometry::Euclidean, &q, &cfg).unwrap();
        assert_eq!(single.x_hat[0].to_bits(), multi.x_hat[0].to_bits());
        assert_eq!(single.iterations, multi.iterations);
        for (a, b) in single.ledger.records.iter().zip(&multi.ledger.records) {
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.step_size.to_bits(), b.step_size.to_bits());
        }
    }

    #[test]
    fn multi_steps_only_on_the_violated_constraint() {
        let g1_calls = Arc::new(AtomicUsize::new(0));
        let calls = g1_calls.clone();
        let g1 = Functional::relative_lipschitz(
            Arc::new(|x: &[f64]| x[0] - 2.0),
            Arc::new(move |_: &[f64]| {
                calls.fetch_add(1, Ordering::SeqCst);
                vec![1.0]
            }),
            1.0,
            0.0,
        )
        .unwrap();
        let g2 = affine_functional(-1.0, 0.5, 1.0); // 0.5 - x, violated near 0
        let f = abs_functional(0.7, 1.0);
        let cfg = SolverConfig::new(0.05, 1.0, 1.0, 0.5);
        let q = FeasibleSet::box_set(vec![0.0], vec![1.0]).unwrap();
        let report = solve_multi_v1(&f, &[&g1, &g2], &Geometry::Euclidean, &q, &cfg).unwrap();
        assert_eq!(g1_calls.load(Ordering::SeqCst), 0);
        assert!(report.ledger.nonproductive_count() > 0);
        for record in &report.ledger.records {
            match record.kind {
                StepKind::NonProductive => assert_eq!(record.constraint_index, Some(1)),
                StepKind::Productive => assert_eq!(record.constraint_index, None),
            }
        }
        assert_eq!(
            report.ledger.constraint_subgradient_evals,
            report.ledger.nonproductive_count()
        );
    }

    #[test]
    fn multi_v1_meets_the_stated_bounds() {
        // Optimum of |x - 0.9| under both constraints on [0, 1] is x* = 0.9.
        let f = abs_functional(0.9, 1.0);
        let g1 = affine_functional(1.0, -0.95, 1.0);
        let g2 = affine_functional(2.0, -1.9, 2.0);
        let mut cfg = SolverConfig::new(0.05, 1.0, 2.0, 0.5);
        cfg.reference_point = Some(vec![0.9]);
        let q = FeasibleSet::box_set(vec![0.0], vec![1.0]).unwrap();
        let report = solve_multi_v1(&f, &[&g1, &g2], &Geometry::Euclidean, &q, &cfg).unwrap();
        let bound = 2.0 * 0.05; // M_g eps + delta with M_g = max(1, 2)
        let g_max = g1.value(&report.x_hat).max(g2.value(&report.x_hat));
        assert!(g_max <= bound + 1e-9, "g {g_max}");
        assert!(f.value(&report.x_hat) <= bound + 1e-9);
    }

    #[test]
    fn runs_are_deterministic_bit_for_bit() {
        let f = abs_functional(0.9, 1.0);
        let g = affine_functional(1.0, -0.5, 1.0);
        let cfg = SolverConfig::new(0.05, 1.0, 1.0, 0.5);
        let a = solve_relative_v2(&f, &g, &Geometry::Euclidean, &interval(), &cfg).unwrap();
        let b = solve_relative_v2(&f, &g, &Geometry::Euclidean, &interval(), &cfg).unwrap();
        assert_eq!(a.x_hat[0].to_bits(), b.x_hat[0].to_bits());
        assert_eq!(a.iterations, b.iterations);
        for (ra, rb) in a.ledger.records.iter().zip(&b.ledger.records) {
            assert_eq!(ra.kind, rb.kind);
            assert_eq!(ra.constraint_value.to_bits(), rb.constraint_value.to_bits());
        }
    }

    #[test]
    fn x_hat_is_the_exact_mean_of_productive_iterates() {
        let f = abs_functional(0.9, 1.0);
        let g = affine_functional(1.0, -0.5, 1.0);
        let mut cfg = SolverConfig::new(0.1, 1.0, 1.0, 0.5);
        cfg.step_f = Some(0.1);
        cfg.step_g = Some(0.1);
        let q = interval();
        let report = solve_model_general(&f, &g, &Geometry::Euclidean, &q, &cfg).unwrap();

        // Replay the trajectory from the ledger and recompute the average.
        let mut x = argmin_reference(&Geometry::Euclidean, &q).unwrap();
        let mut sum = 0.0;
        let mut count = 0usize;
        for record in &report.ledger.records {
            let term = match record.kind {
                StepKind::Productive => {
                    sum += x[0];
                    count += 1;
                    f.model().term_at(&x)
                }
                StepKind::NonProductive => g.model().term_at(&x),
            };
            x = mirror_step(&Geometry::Euclidean, &q, &x, record.step_size, &term).unwrap();
        }
        assert_eq!(count, report.ledger.productive_count());
        assert_eq!((sum / count as f64).to_bits(), report.x_hat[0].to_bits());
    }

    #[test]
    fn ledger_partitions_the_iteration_indices() {
        let f = abs_functional(0.9, 1.0);
        let g = affine_functional(1.0, -0.5, 1.0);
        let cfg = SolverConfig::new(0.1, 1.0, 1.0, 0.5);
        let report = solve_relative_v2(&f, &g, &Geometry::Euclidean, &interval(), &cfg).unwrap();
        let produced = report.ledger.productive_indices();
        let skipped = report.ledger.nonproductive_indices();
        assert_eq!(produced.len() + skipped.len(), report.iterations);
        let mut all: Vec<usize> = produced.into_iter().chain(skipped).collect();
        all.sort_unstable();
        assert_eq!(all, (0..report.iterations).collect::<Vec<_>>());
    }

    #[test]
    fn x0_override_must_be_feasible() {
        let f = abs_functional(0.0, 1.0);
        let g = constant_functional(-1.0, 1.0);
        let mut cfg = SolverConfig::new(0.1, 1.0, 1.0, 0.5);
        cfg.x0 = Some(vec![5.0]);
        let err = solve_relative_v1(&f, &g, &Geometry::Euclidean, &interval(), &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn config_rejects_bad_scalars() {
        assert!(SolverConfig::new(0.0, 1.0, 1.0, 1.0).validate().is_err());
        assert!(SolverConfig::new(0.1, -1.0, 1.0, 1.0).validate().is_err());
        let mut cfg = SolverConfig::new(0.1, 1.0, 1.0, 1.0);
        cfg.delta = -0.5;
        assert!(cfg.validate().is_err());
    }
}
