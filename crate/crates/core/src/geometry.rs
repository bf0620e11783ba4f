//! Reference functions, Bregman divergences, feasible sets and the proximal
//! (mirror) step.
//!
//! A [`Geometry`] bundles a convex differentiable reference function `d` with
//! the norm pair it is naturally measured in. The induced Bregman divergence
//!
//! ```text
//! V_d(y, x) = d(y) - d(x) - <grad d(x), y - x>
//! ```
//!
//! generalizes the squared Euclidean distance; `d` is not assumed to be
//! strongly convex. [`mirror_step`] solves the prox subproblem
//! `argmin_{y in Q} { psi(y, x) + V_d(y, x) / h }` in closed form where one is
//! known and falls back to a projected-gradient inner solver otherwise.

use crate::error::{Error, Result};
use crate::linalg::{add_scaled, dot, norm1, norm2, norm_inf, sub};
use crate::model::{ModelTerm, SimpleTerm};
use crate::rng;
use rand_chacha::rand_core::RngCore;

/// Iterates are clamped to this floor before taking logarithms; the simplex
/// boundary is only reachable in the limit under multiplicative updates.
const ENTROPY_FLOOR: f64 = 1e-300;

/// Inner-solver stopping rule: step-to-step change below this, or the
/// iteration cap, whichever comes first.
const INNER_TOL: f64 = 1e-12;
const INNER_MAX_ITERS: usize = 10_000;

/// A distance-generating (reference) function together with its norm pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    /// `d(x) = ||x||_2^2 / 2`, Euclidean norm, self-dual.
    Euclidean,
    /// Negative entropy `d(x) = sum_i x_i ln x_i` on the non-negative
    /// orthant, paired with the l1 norm (dual l-infinity).
    Entropy,
}

impl Geometry {
    /// Value of the reference function `d`.
    pub fn reference(&self, x: &[f64]) -> f64 {
        match self {
            Geometry::Euclidean => 0.5 * dot(x, x),
            Geometry::Entropy => x
                .iter()
                .map(|&xi| xi * xi.max(ENTROPY_FLOOR).ln())
                .sum(),
        }
    }

    /// Gradient of the reference function.
    pub fn reference_grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Geometry::Euclidean => x.to_vec(),
            Geometry::Entropy => x
                .iter()
                .map(|&xi| xi.max(ENTROPY_FLOOR).ln() + 1.0)
                .collect(),
        }
    }

    /// Norm the geometry is measured in.
    pub fn norm(&self, x: &[f64]) -> f64 {
        match self {
            Geometry::Euclidean => norm2(x),
            Geometry::Entropy => norm1(x),
        }
    }

    /// Norm on the dual space.
    pub fn dual_norm(&self, s: &[f64]) -> f64 {
        match self {
            Geometry::Euclidean => norm2(s),
            Geometry::Entropy => norm_inf(s),
        }
    }

    /// Bregman divergence `V_d(y, x)`, with domain and dimension checks.
    ///
    /// Equals `||y - x||^2 / 2` for the Euclidean geometry and the
    /// (generalized) KL divergence for the entropy geometry.
    pub fn bregman(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        if y.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if !crate::linalg::all_finite(x) || !crate::linalg::all_finite(y) {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        if let Geometry::Entropy = self {
            if x.iter().any(|&xi| xi <= 0.0) {
                return Err(Error::Domain(
                    "entropy gradient undefined at a non-positive entry".into(),
                ));
            }
            if y.iter().any(|&yi| yi < 0.0) {
                return Err(Error::Domain(
                    "entropy reference undefined at a negative entry".into(),
                ));
            }
        }
        Ok(self.bregman_unchecked(y, x))
    }

    /// Bregman divergence without domain checks; logs are clamped. Solvers
    /// use this on iterates that stay interior by construction.
    pub(crate) fn bregman_unchecked(&self, y: &[f64], x: &[f64]) -> f64 {
        self.reference(y) - self.reference(x) - dot(&self.reference_grad(x), &sub(y, x))
    }
}

/// A simple closed convex feasible set with a solvable projection.
#[derive(Clone, Debug, PartialEq)]
pub enum FeasibleSet {
    WholeSpace { dim: usize },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Simplex { dim: usize },
}

impl FeasibleSet {
    pub fn whole_space(dim: usize) -> Self {
        FeasibleSet::WholeSpace { dim }
    }

    pub fn unit_ball(dim: usize) -> Self {
        FeasibleSet::Ball {
            center: vec![0.0; dim],
            radius: 1.0,
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !crate::linalg::all_finite(&center) {
            return Err(Error::Config("ball needs a finite center and radius > 0".into()));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn box_set(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u)
            || !crate::linalg::all_finite(&lower)
            || !crate::linalg::all_finite(&upper)
        {
            return Err(Error::Config("box needs finite lower <= upper".into()));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    pub fn simplex(dim: usize) -> Self {
        FeasibleSet::Simplex { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::WholeSpace { dim } | FeasibleSet::Simplex { dim } => *dim,
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Box { lower, .. } => lower.len(),
        }
    }

    /// Membership up to an absolute tolerance.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            FeasibleSet::WholeSpace { .. } => true,
            FeasibleSet::Ball { center, radius } => norm2(&sub(x, center)) <= radius + tol,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower)
                .zip(upper)
                .all(|((xi, lo), hi)| *xi >= lo - tol && *xi <= hi + tol),
            FeasibleSet::Simplex { .. } => {
                x.iter().all(|&xi| xi >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
        }
    }

    /// Euclidean projection onto the set. A point already inside (boundary
    /// included) is returned unchanged.
    pub fn project_euclidean(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::WholeSpace { .. } => x.to_vec(),
            FeasibleSet::Ball { center, radius } => {
                let offset = sub(x, center);
                let dist = norm2(&offset);
                if dist <= *radius {
                    x.to_vec()
                } else {
                    add_scaled(center, radius / dist, &offset)
                }
            }
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower)
                .zip(upper)
                .map(|((xi, lo), hi)| xi.max(*lo).min(*hi))
                .collect(),
            FeasibleSet::Simplex { .. } => project_simplex(x),
        }
    }

    /// Largest distance between two points of the set, `None` if unbounded.
    pub fn diameter(&self) -> Option<f64> {
        match self {
            FeasibleSet::WholeSpace { .. } => None,
            FeasibleSet::Ball { radius, .. } => Some(2.0 * radius),
            FeasibleSet::Box { lower, upper } => Some(norm2(&sub(upper, lower))),
            FeasibleSet::Simplex { .. } => Some(std::f64::consts::SQRT_2),
        }
    }

    /// Axis-aligned bounding box, `None` if unbounded.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            FeasibleSet::WholeSpace { .. } => None,
            FeasibleSet::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            FeasibleSet::Box { lower, upper } => Some((lower.clone(), upper.clone())),
            FeasibleSet::Simplex { dim } => Some((vec![0.0; *dim], vec![1.0; *dim])),
        }
    }

    /// Draw a point of the set from the given stream.
    pub fn sample(&self, rng: &mut impl RngCore) -> Vec<f64> {
        match self {
            FeasibleSet::WholeSpace { dim } => {
                (0..*dim).map(|_| rng::normal(rng, 0.0, 1.0)).collect()
            }
            FeasibleSet::Ball { center, radius } => {
                let dir: Vec<f64> = (0..center.len())
                    .map(|_| rng::normal(rng, 0.0, 1.0))
                    .collect();
                let len = norm2(&dir).max(1e-30);
                let r = radius * rng::unit_open(rng).powf(1.0 / center.len() as f64);
                add_scaled(center, r / len, &dir)
            }
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| rng::uniform(rng, *lo, *hi))
                .collect(),
            FeasibleSet::Simplex { dim } => {
                let e: Vec<f64> = (0..*dim).map(|_| -rng::unit_open(rng).ln()).collect();
                let total: f64 = e.iter().sum();
                e.iter().map(|ei| ei / total).collect()
            }
        }
    }
}

/// Euclidean projection onto the standard simplex (Duchi et al.).
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            threshold = t;
        }
    }
    v.iter().map(|&vi| (vi - threshold).max(0.0)).collect()
}

/// Minimizer of the reference function over the set; the canonical starting
/// point of every solver.
pub fn argmin_reference(geom: &Geometry, q: &FeasibleSet) -> Result<Vec<f64>> {
    match geom {
        // argmin ||x||^2/2 over Q is the projection of the origin.
        Geometry::Euclidean => Ok(q.project_euclidean(&vec![0.0; q.dim()])),
        Geometry::Entropy => match q {
            FeasibleSet::Simplex { dim } => Ok(vec![1.0 / *dim as f64; *dim]),
            FeasibleSet::Box { lower, upper } => {
                if lower.iter().any(|&lo| lo < 0.0) {
                    return Err(Error::Config(
                        "entropy geometry needs a box inside the non-negative orthant".into(),
                    ));
                }
                // t ln t is minimized at t = 1/e; coordinates are separable.
                Ok(lower
                    .iter()
                    .zip(upper)
                    .map(|(lo, hi)| (1.0 / std::f64::consts::E).max(*lo).min(*hi))
                    .collect())
            }
            _ => Err(Error::Config(
                "no reference minimizer for the entropy geometry on this set".into(),
            )),
        },
    }
}

/// One proximal step: `argmin_{y in Q} { psi(y, x) + V_d(y, x) / h }`.
///
/// Dispatches to a closed form where one is known for the geometry/set pair
/// and otherwise runs the numeric inner solver. For the Euclidean geometry
/// and a linear model term the step is the Euclidean projection of
/// `x - h * slope` onto `Q`.
pub fn mirror_step(
    geom: &Geometry,
    q: &FeasibleSet,
    x: &[f64],
    h: f64,
    term: &ModelTerm,
) -> Result<Vec<f64>> {
    validate_step_inputs(q, x, h, term)?;
    match closed_form_step(geom, q, x, h, term) {
        Some(result) => result,
        None => mirror_step_numeric(geom, q, x, h, term),
    }
}

fn validate_step_inputs(q: &FeasibleSet, x: &[f64], h: f64, term: &ModelTerm) -> Result<()> {
    if x.len() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: x.len(),
        });
    }
    if term.slope.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: term.slope.len(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {h}")));
    }
    Ok(())
}

/// Closed forms per geometry/set pair; `None` means "use the fallback".
fn closed_form_step(
    geom: &Geometry,
    q: &FeasibleSet,
    x: &[f64],
    h: f64,
    term: &ModelTerm,
) -> Option<Result<Vec<f64>>> {
    match (geom, &term.simple) {
        (Geometry::Euclidean, SimpleTerm::Zero | SimpleTerm::Constant(_)) => {
            Some(Ok(q.project_euclidean(&add_scaled(x, -h, &term.slope))))
        }
        (Geometry::Euclidean, SimpleTerm::L1 { weight }) => match q {
            // Soft-threshold, then clamp; both act coordinate-wise.
            FeasibleSet::WholeSpace { .. } | FeasibleSet::Box { .. } => {
                let shrunk: Vec<f64> = x
                    .iter()
                    .zip(&term.slope)
                    .map(|(xi, si)| soft_threshold(xi - h * si, h * weight))
                    .collect();
                Some(Ok(q.project_euclidean(&shrunk)))
            }
            _ => Some(Err(Error::Config(
                "no closed-form prox for an l1 composite term on this set".into(),
            ))),
        },
        (Geometry::Entropy, SimpleTerm::Zero | SimpleTerm::Constant(_)) => match q {
            FeasibleSet::Simplex { .. } => {
                // Multiplicative weights: y_i ∝ x_i exp(-h s_i).
                let exponents: Vec<f64> = x
                    .iter()
                    .zip(&term.slope)
                    .map(|(xi, si)| xi.max(ENTROPY_FLOOR).ln() - h * si)
                    .collect();
                let peak = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = exponents.iter().map(|e| (e - peak).exp()).collect();
                let total: f64 = weights.iter().sum();
                Some(Ok(weights.iter().map(|w| w / total).collect()))
            }
            FeasibleSet::Box { lower, upper } => {
                if lower.iter().any(|&lo| lo < 0.0) {
                    return Some(Err(Error::Config(
                        "entropy geometry needs a box inside the non-negative orthant".into(),
                    )));
                }
                // Separable: clamp the unconstrained minimizer x_i e^{-h s_i}.
                Some(Ok(x
                    .iter()
                    .zip(&term.slope)
                    .zip(lower.iter().zip(upper))
                    .map(|((xi, si), (lo, hi))| (xi * (-h * si).exp()).max(*lo).min(*hi))
                    .collect()))
            }
            _ => Some(Err(Error::Config(
                "the entropy geometry supports simplex and non-negative box sets".into(),
            ))),
        },
        (Geometry::Entropy, SimpleTerm::L1 { .. }) => Some(Err(Error::Config(
            "no closed-form prox for an l1 composite term under the entropy geometry".into(),
        ))),
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Numeric inner solver for the prox subproblem, cross-checking the closed
/// forms. Stops when the step-to-step change drops below 1e-12 or after
/// 10 000 inner iterations.
///
/// Euclidean geometry: accelerated projected gradient at a backtracked fixed
/// step (the objective is (1/h)-smooth, so the step is always contractive).
/// Entropy geometry: projected Newton in the exact diagonal metric of the
/// divergence term, with the simplex coupling solved by bisection on the
/// multiplier; iterates run over the numerically interior set (coordinates
/// at least 1e-12).
pub fn mirror_step_numeric(
    geom: &Geometry,
    q: &FeasibleSet,
    x: &[f64],
    h: f64,
    term: &ModelTerm,
) -> Result<Vec<f64>> {
    validate_step_inputs(q, x, h, term)?;
    if matches!(term.simple, SimpleTerm::L1 { .. }) {
        return Err(Error::Config(
            "the numeric inner solver handles linear model terms only".into(),
        ));
    }
    match geom {
        Geometry::Euclidean => euclidean_inner_solver(q, x, h, term),
        Geometry::Entropy => entropy_inner_solver(q, x, h, term),
    }
}

fn euclidean_inner_solver(
    q: &FeasibleSet,
    x: &[f64],
    h: f64,
    term: &ModelTerm,
) -> Result<Vec<f64>> {
    // The objective <s, y> + ||y - x||^2 / (2h) is globally quadratic with
    // gradient Lipschitz constant exactly 1/h, so projected gradient at the
    // fixed step h/2 is a global 1/2-contraction: the distance to the
    // minimizer never exceeds the last step-to-step change.
    let gradient = |y: &[f64]| -> Vec<f64> {
        y.iter()
            .zip(x)
            .zip(&term.slope)
            .map(|((yi, xi), si)| si + (yi - xi) / h)
            .collect()
    };
    let step = 0.5 * h;
    let mut y = q.project_euclidean(x);
    let mut change = f64::INFINITY;
    for _ in 0..INNER_MAX_ITERS {
        let candidate = q.project_euclidean(&add_scaled(&y, -step, &gradient(&y)));
        change = norm_inf(&sub(&candidate, &y));
        y = candidate;
        if change < INNER_TOL {
            return Ok(y);
        }
    }
    Err(Error::InnerSolver {
        residual: change,
        iterations: INNER_MAX_ITERS,
    })
}

/// Coordinates below this are pinned to it during the entropy inner solve;
/// the answer moves by at most the floor per coordinate.
const ENTROPY_INNER_FLOOR: f64 = 1e-12;

fn entropy_inner_solver(
    q: &FeasibleSet,
    x: &[f64],
    h: f64,
    term: &ModelTerm,
) -> Result<Vec<f64>> {
    let geom = Geometry::Entropy;
    let (lower, upper, coupled): (Vec<f64>, Vec<f64>, bool) = match q {
        FeasibleSet::Simplex { dim } => (vec![ENTROPY_INNER_FLOOR; *dim], vec![1.0; *dim], true),
        FeasibleSet::Box { lower, upper } => {
            if lower.iter().any(|&lo| lo < 0.0) {
                return Err(Error::Config(
                    "entropy geometry needs a box inside the non-negative orthant".into(),
                ));
            }
            (
                lower.iter().map(|lo| lo.max(ENTROPY_INNER_FLOOR)).collect(),
                upper.clone(),
                false,
            )
        }
        _ => {
            return Err(Error::Config(
                "the entropy geometry supports simplex and non-negative box sets".into(),
            ))
        }
    };
    let objective = |y: &[f64]| dot(&term.slope, y) + geom.bregman_unchecked(y, x) / h;
    let gradient = |y: &[f64]| -> Vec<f64> {
        y.iter()
            .zip(x)
            .zip(&term.slope)
            .map(|((yi, xi), si)| {
                si + (yi.max(ENTROPY_INNER_FLOOR).ln() - xi.max(ENTROPY_INNER_FLOOR).ln()) / h
            })
            .collect()
    };

    // Feasible strictly positive start.
    let mut y: Vec<f64> = x
        .iter()
        .zip(lower.iter().zip(&upper))
        .map(|(xi, (lo, hi))| xi.max(*lo).min(*hi))
        .collect();
    if coupled {
        let total: f64 = y.iter().sum();
        y = y.iter().map(|v| (v / total).max(ENTROPY_INNER_FLOOR)).collect();
    }
    let mut f_y = objective(&y);
    let mut change = f64::INFINITY;
    for _iteration in 0..INNER_MAX_ITERS {
        let grad = gradient(&y);
        // Newton direction in the exact diagonal metric d_i = 1/(h y_i).
        let weights: Vec<f64> = y.iter().map(|yi| 1.0 / (h * yi)).collect();
        let target: Vec<f64> = y
            .iter()
            .zip(&grad)
            .zip(&weights)
            .map(|((yi, gi), di)| yi - gi / di)
            .collect();
        let newton = if coupled {
            clamp_to_level_set(&target, &weights, &lower, &upper)
        } else {
            target
                .iter()
                .zip(lower.iter().zip(&upper))
                .map(|(zi, (lo, hi))| zi.max(*lo).min(*hi))
                .collect::<Vec<f64>>()
        };
        // The undamped Newton step length tracks the distance to the
        // optimum; a negligible one certifies convergence.
        change = norm_inf(&sub(&newton, &y));
        if change < INNER_TOL {
            return Ok(newton);
        }
        if change < 1e-6 {
            // Quadratic basin: objective differences are below the floating
            // point noise floor there, so take full undamped steps.
            y = newton;
            f_y = objective(&y);
            continue;
        }
        // Damped acceptance keeps the global phase stable.
        let mut alpha = 1.0f64;
        let (accepted, f_accepted) = loop {
            let candidate: Vec<f64> = y
                .iter()
                .zip(&newton)
                .map(|(yi, ni)| yi + alpha * (ni - yi))
                .collect();
            let f_candidate = objective(&candidate);
            if f_candidate <= f_y + 1e-18 || alpha < 1e-12 {
                break (candidate, f_candidate);
            }
            alpha *= 0.5;
        };
        y = accepted;
        f_y = f_accepted;
    }
    Err(Error::InnerSolver {
        residual: change,
        iterations: INNER_MAX_ITERS,
    })
}

/// Projection of `target` onto `{u: sum u = 1, lower <= u <= upper}` in the
/// diagonal metric `weights`: solves `sum_i clamp(target_i - lambda / w_i) = 1`
/// for the multiplier by bisection.
fn clamp_to_level_set(
    target: &[f64],
    weights: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Vec<f64> {
    let evaluate = |lambda: f64| -> f64 {
        target
            .iter()
            .zip(weights)
            .zip(lower.iter().zip(upper))
            .map(|((zi, wi), (lo, hi))| (zi - lambda / wi).max(*lo).min(*hi))
            .sum::<f64>()
    };
    // Bracket the multiplier: sum is non-increasing in lambda.
    let mut lo = -1.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        if evaluate(lo) >= 1.0 {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..200 {
        if evaluate(hi) <= 1.0 {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if evaluate(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-300 {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    target
        .iter()
        .zip(weights)
        .zip(lower.iter().zip(upper))
        .map(|((zi, wi), (lo, hi))| (zi - lambda / wi).max(*lo).min(*hi))
        .collect()
}
