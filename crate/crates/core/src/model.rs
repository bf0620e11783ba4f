//! Inexact model oracles for objectives and constraints.
//!
//! An [`InexactModel`] of a convex functional `f` supplies, at every base
//! point `x`, a convex term `psi(., x)` with `psi(x, x) = 0` satisfying
//!
//! ```text
//! f(x) + psi(y, x) <= f(y)                       (lower bound)
//! -psi(y, x) <= phi^{-1}(V_d(y, x)) + delta      (growth bound)
//! ```
//!
//! for a strictly increasing `phi` with `phi(0) = 0` and an inexactness
//! budget `delta >= 0`. The shipped instantiation is the relative-Lipschitz
//! one, `phi^{-1}(v) = M sqrt(2 v)`, whose conjugate is
//! `phi*(h) = h^2 M^2 / 2`; the interface stays generic through [`Growth`].

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::linalg::dot;
use std::sync::Arc;

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SubgradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type TermFn = Arc<dyn Fn(&[f64]) -> ModelTerm + Send + Sync>;

/// The growth function `phi` of a model, represented through the three maps
/// the algorithms and their certificates actually use.
pub trait Growth: Send + Sync {
    /// `phi*(h)`, the convex conjugate.
    fn conjugate(&self, h: f64) -> f64;
    /// `phi^{-1}(v)` for `v >= 0`.
    fn inverse(&self, v: f64) -> f64;
    /// `phi(t)`.
    fn forward(&self, t: f64) -> f64;
    /// The constant `M` when the model is of relative-Lipschitz type.
    fn rel_lipschitz(&self) -> Option<f64> {
        None
    }
}

/// `phi(t) = t^2 / (2 M^2)`: the relative-Lipschitz growth function.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticGrowth {
    m: f64,
}

impl QuadraticGrowth {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Config(format!(
                "relative Lipschitz constant must be positive, got {m}"
            )));
        }
        Ok(QuadraticGrowth { m })
    }
}

impl Growth for QuadraticGrowth {
    fn conjugate(&self, h: f64) -> f64 {
        h * h * self.m * self.m / 2.0
    }

    fn inverse(&self, v: f64) -> f64 {
        self.m * (2.0 * v).sqrt()
    }

    fn forward(&self, t: f64) -> f64 {
        t * t / (2.0 * self.m * self.m)
    }

    fn rel_lipschitz(&self) -> Option<f64> {
        Some(self.m)
    }
}

/// A prox-friendly convex addend folded into the model term.
#[derive(Clone, Debug, PartialEq)]
pub enum SimpleTerm {
    Zero,
    Constant(f64),
    /// `weight * ||x||_1`
    L1 { weight: f64 },
}

impl SimpleTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SimpleTerm::Zero => 0.0,
            SimpleTerm::Constant(c) => *c,
            SimpleTerm::L1 { weight } => weight * crate::linalg::norm1(x),
        }
    }

    /// `simple(y) - simple(x)`, with the cancellation of constants exact.
    fn difference(&self, y: &[f64], x: &[f64]) -> f64 {
        match self {
            SimpleTerm::Zero | SimpleTerm::Constant(_) => 0.0,
            SimpleTerm::L1 { weight } => {
                weight * (crate::linalg::norm1(y) - crate::linalg::norm1(x))
            }
        }
    }
}

/// The structural form of `psi(., x)` at one base point: a linear part plus
/// an optional simple composite part,
/// `psi(y, x) = <slope, y - x> + simple(y) - simple(x) + offset`.
///
/// A well-formed model has `offset = 0` so that `psi(x, x) = 0`; the field
/// exists so [`check_model`] can detect miswired oracles. The prox step
/// ignores it (constants do not move an argmin).
#[derive(Clone, Debug)]
pub struct ModelTerm {
    pub slope: Vec<f64>,
    pub simple: SimpleTerm,
    pub offset: f64,
}

impl ModelTerm {
    pub fn linear(slope: Vec<f64>) -> Self {
        ModelTerm {
            slope,
            simple: SimpleTerm::Zero,
            offset: 0.0,
        }
    }

    /// `psi(y, x)`.
    pub fn eval(&self, y: &[f64], x: &[f64]) -> f64 {
        dot(&self.slope, y) - dot(&self.slope, x) + self.simple.difference(y, x) + self.offset
    }
}

/// A (δ,φ,V)-model oracle: the map `x -> psi(., x)` plus the growth function
/// and the inexactness budget.
#[derive(Clone)]
pub struct InexactModel {
    term: TermFn,
    growth: Arc<dyn Growth>,
    delta: f64,
}

impl InexactModel {
    /// Canonical subgradient model: `psi(y, x) = <oracle(x), y - x>` with the
    /// relative-Lipschitz growth of constant `m`.
    pub fn linear(oracle: SubgradientFn, m: f64, delta: f64) -> Result<Self> {
        let growth = QuadraticGrowth::new(m)?;
        Self::with_growth(
            Arc::new(move |x: &[f64]| ModelTerm::linear(oracle(x))),
            Arc::new(growth),
            delta,
        )
    }

    /// Composite model: subgradient of the smooth part plus a simple convex
    /// addend solved inside the prox subproblem.
    pub fn composite(
        smooth: SubgradientFn,
        simple: SimpleTerm,
        m: f64,
        delta: f64,
    ) -> Result<Self> {
        let growth = QuadraticGrowth::new(m)?;
        Self::with_growth(
            Arc::new(move |x: &[f64]| ModelTerm {
                slope: smooth(x),
                simple: simple.clone(),
                offset: 0.0,
            }),
            Arc::new(growth),
            delta,
        )
    }

    /// Fully general constructor for custom terms or growth functions.
    pub fn with_growth(term: TermFn, growth: Arc<dyn Growth>, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::Config(format!(
                "model inexactness must be non-negative, got {delta}"
            )));
        }
        Ok(InexactModel {
            term,
            growth,
            delta,
        })
    }

    pub fn term_at(&self, x: &[f64]) -> ModelTerm {
        (self.term)(x)
    }

    pub fn psi(&self, y: &[f64], x: &[f64]) -> f64 {
        self.term_at(x).eval(y, x)
    }

    /// `phi*(h)`.
    pub fn phi_conjugate(&self, h: f64) -> f64 {
        self.growth.conjugate(h)
    }

    /// `phi^{-1}(v)`.
    pub fn phi_inverse(&self, v: f64) -> f64 {
        self.growth.inverse(v)
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.growth.forward(t)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The constant `M` when the growth is of relative-Lipschitz type.
    pub fn rel_lipschitz(&self) -> Option<f64> {
        self.growth.rel_lipschitz()
    }
}

/// A convex functional paired with its model — what the solvers consume.
#[derive(Clone)]
pub struct Functional {
    value: ValueFn,
    model: InexactModel,
}

impl Functional {
    pub fn new(value: ValueFn, model: InexactModel) -> Self {
        Functional { value, model }
    }

    /// Shorthand for a subgradient oracle with relative-Lipschitz constant `m`.
    pub fn relative_lipschitz(
        value: ValueFn,
        subgradient: SubgradientFn,
        m: f64,
        delta: f64,
    ) -> Result<Self> {
        Ok(Functional {
            value,
            model: InexactModel::linear(subgradient, m, delta)?,
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn model(&self) -> &InexactModel {
        &self.model
    }
}

/// Which model inequality a sampled pair violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// `f(x) + psi(y, x) > f(y)`
    LowerBound,
    /// `-psi(y, x) > phi^{-1}(V_d(y, x)) + delta`
    GrowthBound,
    /// `psi(x, x) != 0`
    BasePoint,
}

#[derive(Clone, Debug)]
pub struct ModelViolation {
    pub pair: usize,
    pub kind: ViolationKind,
    /// How far past the tolerance the inequality was.
    pub excess: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ModelCheckReport {
    pub violations: Vec<ModelViolation>,
    pub pairs_checked: usize,
}

impl ModelCheckReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Absolute tolerance for [`check_model`]; double precision on O(1) scales.
pub const MODEL_CHECK_TOL: f64 = 1e-9;

/// Check both model inequalities and `psi(x, x) = 0` on sampled pairs,
/// reporting every violation beyond [`MODEL_CHECK_TOL`].
pub fn check_model(
    model: &InexactModel,
    f: &dyn Fn(&[f64]) -> f64,
    geom: &Geometry,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> ModelCheckReport {
    let mut report = ModelCheckReport {
        violations: Vec::new(),
        pairs_checked: pairs.len(),
    };
    for (idx, (x, y)) in pairs.iter().enumerate() {
        let term = model.term_at(x);
        let at_base = term.eval(x, x);
        if at_base.abs() > MODEL_CHECK_TOL {
            report.violations.push(ModelViolation {
                pair: idx,
                kind: ViolationKind::BasePoint,
                excess: at_base.abs() - MODEL_CHECK_TOL,
            });
        }
        let psi = term.eval(y, x);
        let lower_gap = f(x) + psi - f(y);
        if lower_gap > MODEL_CHECK_TOL {
            report.violations.push(ModelViolation {
                pair: idx,
                kind: ViolationKind::LowerBound,
                excess: lower_gap - MODEL_CHECK_TOL,
            });
        }
        let divergence = geom
            .bregman(y, x)
            .expect("check_model pairs must lie in the geometry's domain");
        let growth_gap = -psi - model.phi_inverse(divergence) - model.delta();
        if growth_gap > MODEL_CHECK_TOL {
            report.violations.push(ModelViolation {
                pair: idx,
                kind: ViolationKind::GrowthBound,
                excess: growth_gap - MODEL_CHECK_TOL,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FeasibleSet;
    use crate::linalg::norm2;
    use crate::rng;

    fn norm_functional(m: f64) -> Functional {
        // f(x) = ||x||_2 with the zero subgradient at the kink.
        Functional::relative_lipschitz(
            Arc::new(|x: &[f64]| norm2(x)),
            Arc::new(|x: &[f64]| {
                let n = norm2(x);
                if n == 0.0 {
                    vec![0.0; x.len()]
                } else {
                    x.iter().map(|xi| xi / n).collect()
                }
            }),
            m,
            0.0,
        )
        .unwrap()
    }

    fn sample_pairs(q: &FeasibleSet, count: usize, key: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = rng::keyed(&[key]);
        (0..count)
            .map(|_| (q.sample(&mut rng), q.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn quadratic_growth_conjugate_values() {
        let g = QuadraticGrowth::new(3.0).unwrap();
        assert_eq!(g.conjugate(2.0), 18.0);
        assert_eq!(g.conjugate(0.0), 0.0);
    }

    #[test]
    fn growth_inverse_round_trips() {
        let g = QuadraticGrowth::new(1.7).unwrap();
        for v in [0.0, 0.5, 10.0] {
            assert!((g.forward(g.inverse(v)) - v).abs() < 1e-12);
        }
        // Fenchel–Young bookkeeping: phi*(h) + phi(phi^{-1}(v)) = h^2 M^2/2 + v.
        for (h, v) in [(0.3, 0.5), (2.0, 10.0)] {
            let lhs = g.conjugate(h) + g.forward(g.inverse(v));
            assert!((lhs - (h * h * 1.7f64.powi(2) / 2.0 + v)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_constants() {
        assert!(QuadraticGrowth::new(0.0).is_err());
        assert!(QuadraticGrowth::new(-1.0).is_err());
        let oracle: SubgradientFn = Arc::new(|x: &[f64]| x.to_vec());
        assert!(InexactModel::linear(oracle, -2.0, 0.0).is_err());
    }

    #[test]
    fn linear_model_of_a_convex_function_is_clean() {
        let f = norm_functional(1.0);
        let q = FeasibleSet::unit_ball(3);
        let pairs = sample_pairs(&q, 1000, 31);
        let report = check_model(
            f.model(),
            &|x: &[f64]| norm2(x),
            &Geometry::Euclidean,
            &pairs,
        );
        assert!(report.is_clean(), "{:?}", report.violations.first());
        assert_eq!(report.pairs_checked, 1000);
    }

    #[test]
    fn halved_constant_is_caught_by_the_growth_bound() {
        let f = norm_functional(0.4);
        let q = FeasibleSet::unit_ball(3);
        let mut pairs = sample_pairs(&q, 100, 37);
        // A pair that certifies the violation: base at e1, target at origin.
        pairs.push((vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]));
        let report = check_model(
            f.model(),
            &|x: &[f64]| norm2(x),
            &Geometry::Euclidean,
            &pairs,
        );
        assert!(report.count(ViolationKind::GrowthBound) >= 1);
        assert_eq!(report.count(ViolationKind::LowerBound), 0);
    }

    #[test]
    fn perturbed_base_point_is_reported() {
        let growth = Arc::new(QuadraticGrowth::new(1.0).unwrap());
        let broken = InexactModel::with_growth(
            Arc::new(|x: &[f64]| ModelTerm {
                slope: vec![0.0; x.len()],
                simple: SimpleTerm::Zero,
                offset: 0.1,
            }),
            growth,
            0.0,
        )
        .unwrap();
        let q = FeasibleSet::unit_ball(2);
        let pairs = sample_pairs(&q, 10, 41);
        let report = check_model(&broken, &|_: &[f64]| 0.0, &Geometry::Euclidean, &pairs);
        assert_eq!(report.count(ViolationKind::BasePoint), pairs.len());
    }

    #[test]
    fn composite_with_trivial_part_reduces_to_linear() {
        let smooth: SubgradientFn = Arc::new(|x: &[f64]| x.to_vec());
        let composite = InexactModel::composite(smooth.clone(), SimpleTerm::Zero, 1.0, 0.0).unwrap();
        let constant = InexactModel::composite(
            smooth.clone(),
            SimpleTerm::Constant(5.0),
            1.0,
            0.0,
        )
        .unwrap();
        let linear = InexactModel::linear(smooth, 1.0, 0.0).unwrap();
        let x = [0.3, -0.2];
        let y = [0.1, 0.5];
        assert_eq!(composite.psi(&y, &x), linear.psi(&y, &x));
        // Constants cancel both in psi and in the argmin of the prox step.
        assert_eq!(constant.psi(&y, &x), linear.psi(&y, &x));
        let q = FeasibleSet::unit_ball(2);
        let step_constant = crate::geometry::mirror_step(
            &Geometry::Euclidean,
            &q,
            &x,
            0.5,
            &constant.term_at(&x),
        )
        .unwrap();
        let step_linear =
            crate::geometry::mirror_step(&Geometry::Euclidean, &q, &x, 0.5, &linear.term_at(&x))
                .unwrap();
        assert_eq!(step_constant, step_linear);
    }

    #[test]
    fn classical_lipschitz_implies_relative_lipschitz_euclidean() {
        // ||grad f||_2 <= 1 for f = ||.||_2, so M = 1 passes under d = ||.||^2/2.
        let f = norm_functional(1.0);
        let q = FeasibleSet::box_set(vec![-2.0; 4], vec![2.0; 4]).unwrap();
        let pairs = sample_pairs(&q, 500, 43);
        let report = check_model(
            f.model(),
            &|x: &[f64]| norm2(x),
            &Geometry::Euclidean,
            &pairs,
        );
        assert!(report.is_clean());
    }
}
