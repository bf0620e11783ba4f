//! Independent reference-optimum oracle.
//!
//! Certifies `f*` for `min f(x) s.t. x in Q, g(x) <= 0` without touching the
//! switching solvers (only the objective oracles are shared):
//!
//! - `n = 1`: golden-section search over the feasible interval, whose
//!   endpoints are located by bisection on the convex constraint;
//! - `n <= 3`: dense grid refinement with a feasibility slack that shrinks
//!   with the cell size;
//! - `n <= 50`: a projected subgradient run with suffix averaging over the
//!   true feasible region (Dykstra's alternating projections onto `Q` and
//!   the constraint halfspaces), followed by a fixed-step polish that stops
//!   once the gradient mapping certifies the requested accuracy.

use crate::error::{Error, Result};
use crate::geometry::FeasibleSet;
use crate::linalg::{add_scaled, dot, norm2, norm_inf, sub};

/// How the constraint is presented to the oracle.
pub enum ConstraintSpec<'a> {
    /// Unconstrained beyond `Q`.
    None,
    /// `max_i <rows[i], x> <= 0`; enables exact projection for `n > 3`.
    MaxLinear(&'a [Vec<f64>]),
    /// An arbitrary convex constraint value; supported for `n <= 3` only.
    General(&'a dyn Fn(&[f64]) -> f64),
}

impl ConstraintSpec<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            ConstraintSpec::None => f64::NEG_INFINITY,
            ConstraintSpec::MaxLinear(rows) => rows
                .iter()
                .map(|row| dot(row, x))
                .fold(f64::NEG_INFINITY, f64::max),
            ConstraintSpec::General(g) => g(x),
        }
    }

    fn is_none(&self) -> bool {
        match self {
            ConstraintSpec::None => true,
            ConstraintSpec::MaxLinear(rows) => rows.is_empty(),
            ConstraintSpec::General(_) => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefMethod {
    GoldenSection,
    GridRefinement,
    ProjectedSubgradient,
}

#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub f_star: f64,
    pub x_star: Vec<f64>,
    pub method: RefMethod,
    pub certified_accuracy: f64,
}

/// Certify the constrained optimum to the requested accuracy. `objective`
/// returns the value and a subgradient.
pub fn reference_optimum(
    objective: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    constraint: &ConstraintSpec<'_>,
    q: &FeasibleSet,
    accuracy: f64,
) -> Result<ReferenceSolution> {
    if !(accuracy > 0.0) || !accuracy.is_finite() {
        return Err(Error::Config(format!("accuracy out of range: {accuracy}")));
    }
    if q.bounding_box().is_none() {
        return Err(Error::Config(
            "the reference oracle needs a bounded feasible set".into(),
        ));
    }
    match q.dim() {
        0 => Err(Error::Config("empty dimension".into())),
        1 => golden_section_reference(objective, constraint, q, accuracy),
        2 | 3 => grid_reference(objective, constraint, q, accuracy),
        d if d <= 50 => match constraint {
            ConstraintSpec::General(_) => Err(Error::Config(
                "above dimension 3 the oracle needs max-of-linear constraint structure".into(),
            )),
            ConstraintSpec::None => subgradient_reference(objective, &[], q, accuracy),
            ConstraintSpec::MaxLinear(rows) => subgradient_reference(objective, rows, q, accuracy),
        },
        d => Err(Error::Config(format!(
            "the reference oracle supports dimensions up to 50, got {d}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// n = 1: golden section

fn golden_section_reference(
    objective: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    constraint: &ConstraintSpec<'_>,
    q: &FeasibleSet,
    accuracy: f64,
) -> Result<ReferenceSolution> {
    let (lo, hi) = q.bounding_box().expect("checked bounded");
    let (mut a, mut b) = (lo[0], hi[0]);
    let f = |t: f64| objective(&[t]).0;
    let g = |t: f64| constraint.value(&[t]);
    if !constraint.is_none() {
        // The sublevel set {g <= 0} of a convex g on [a, b] is an interval
        // around the minimizer of g.
        let (g_min_at, g_min) = golden_min(&g, a, b, 1e-13 * (b - a).max(1.0));
        if g_min > 0.0 {
            return Err(Error::Infeasible(format!(
                "min g = {g_min} > 0 on the interval"
            )));
        }
        if g(a) > 0.0 {
            a = bisect_crossing(&g, a, g_min_at);
        }
        if g(b) > 0.0 {
            b = -bisect_crossing(&|t: f64| g(-t), -b, -g_min_at);
        }
    }
    let tol = (accuracy * 1e-3).min((b - a).max(1e-12) * 1e-6).max(1e-14);
    let (x, f_star) = golden_min(&f, a, b, tol);
    Ok(ReferenceSolution {
        f_star,
        x_star: vec![x],
        method: RefMethod::GoldenSection,
        certified_accuracy: accuracy,
    })
}

/// Golden-section minimization of a unimodal function on [a, b].
fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..400 {
        if b - a <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// For convex `g` with `g(lo) > 0 >= g(hi)`, locate the crossing and return
/// a point on the feasible side.
fn bisect_crossing(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

// ---------------------------------------------------------------------------
// n <= 3: grid refinement

const GRID_POINTS_PER_AXIS: usize = 9;
const GRID_MAX_LEVELS: usize = 80;

fn grid_reference(
    objective: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    constraint: &ConstraintSpec<'_>,
    q: &FeasibleSet,
    accuracy: f64,
) -> Result<ReferenceSolution> {
    let (outer_lo, outer_hi) = q.bounding_box().expect("checked bounded");
    let n = q.dim();
    let simplex = matches!(q, FeasibleSet::Simplex { .. });
    // On the simplex the last coordinate is the residual 1 - sum(front).
    let free = if simplex { n - 1 } else { n };
    let mut window_lo = outer_lo.clone();
    let mut window_hi = outer_hi.clone();
    let mut best: Option<(f64, Vec<f64>)> = None;

    for _level in 0..GRID_MAX_LEVELS {
        let cell: Vec<f64> = (0..free)
            .map(|i| (window_hi[i] - window_lo[i]) / (GRID_POINTS_PER_AXIS - 1) as f64)
            .collect();
        let cell_diag = norm2(&cell);
        let slack = cell_diag;
        let mut level_best: Option<(f64, Vec<f64>)> = None;
        let mut counters = vec![0usize; free];
        'grid: loop {
            let mut x: Vec<f64> = (0..free)
                .map(|i| window_lo[i] + counters[i] as f64 * cell[i].max(0.0))
                .collect();
            if simplex {
                let front: f64 = x.iter().sum();
                x.push(1.0 - front);
            }
            let feasible = if simplex {
                x[n - 1] >= -slack && x[..free].iter().all(|&v| v >= -slack)
            } else {
                q.contains(&x, slack)
            };
            if feasible && constraint.value(&x) <= slack {
                let value = objective(&x).0;
                if level_best.as_ref().is_none_or(|(b, _)| value < *b) {
                    level_best = Some((value, x));
                }
            }
            // odometer over the grid
            for i in 0..free {
                counters[i] += 1;
                if counters[i] < GRID_POINTS_PER_AXIS {
                    continue 'grid;
                }
                counters[i] = 0;
            }
            break;
        }
        let Some((value, center)) = level_best else {
            return Err(Error::Infeasible(
                "no feasible grid point at the current refinement level".into(),
            ));
        };
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, center.clone()));
        }
        if cell_diag <= accuracy / 10.0 {
            break;
        }
        for i in 0..free {
            let half = 1.5 * cell[i];
            window_lo[i] = (center[i] - half).max(outer_lo[i]);
            window_hi[i] = (center[i] + half).min(outer_hi[i]);
        }
    }
    let (_, x_star) = best.clone().expect("at least one level succeeded");
    // Snap the final point back into the exact feasible set.
    let x_star = q.project_euclidean(&x_star);
    let f_star = objective(&x_star).0;
    Ok(ReferenceSolution {
        f_star,
        x_star,
        method: RefMethod::GridRefinement,
        certified_accuracy: accuracy,
    })
}

// ---------------------------------------------------------------------------
// n <= 50: projected subgradient over the true feasible region

const LOCALIZE_ITERATIONS: usize = 40_000;
const POLISH_ITERATIONS: usize = 200_000;

fn subgradient_reference(
    objective: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    rows: &[Vec<f64>],
    q: &FeasibleSet,
    accuracy: f64,
) -> Result<ReferenceSolution> {
    let diameter = q.diameter().expect("checked bounded");
    // The halfspaces <row, x> <= 0 form a cone; for a ball centered at the
    // origin the projection onto the intersection is the cone projection
    // followed by a radial clamp (Moreau decomposition of the cone part).
    let centered_ball_radius = match q {
        FeasibleSet::Ball { center, radius } if center.iter().all(|&c| c == 0.0) => Some(*radius),
        _ => None,
    };
    let project = |y: &[f64]| -> Vec<f64> {
        if rows.is_empty() {
            return q.project_euclidean(y);
        }
        match centered_ball_radius {
            Some(radius) => {
                let z = dykstra_halfspaces(rows, y);
                let len = norm2(&z);
                if len <= radius {
                    z
                } else {
                    z.iter().map(|zi| zi * radius / len).collect()
                }
            }
            None => dykstra_project(q, rows, y),
        }
    };
    let start = project(&q.project_euclidean(&vec![0.0; q.dim()]));
    if rows
        .iter()
        .any(|row| dot(row, &start) > 1e-6 * norm2(row).max(1.0))
    {
        return Err(Error::Infeasible(
            "alternating projections did not reach the constrained region".into(),
        ));
    }

    // Localize with classical diminishing steps and suffix averaging.
    let mut x = start;
    let mut slope_scale = 1e-12f64;
    let mut sum = vec![0.0; x.len()];
    let mut count = 0usize;
    for t in 0..LOCALIZE_ITERATIONS {
        let (_, grad) = objective(&x);
        slope_scale = slope_scale.max(norm2(&grad));
        let step = diameter / (slope_scale * ((t + 1) as f64).sqrt());
        x = project(&add_scaled(&x, -step, &grad));
        if t >= LOCALIZE_ITERATIONS / 2 {
            crate::linalg::add_assign(&mut sum, &x);
            count += 1;
        }
    }
    let mut x = project(&sum.iter().map(|s| s / count as f64).collect::<Vec<f64>>());

    // Polish with fixed-step projected (sub)gradient descent until the
    // gradient mapping certifies near-optimality: for convex f and any
    // subgradient, projection optimality gives
    //   f(x) - f* <= ||gm|| (D + s ||grad||),  gm = (x - proj(x - s grad))/s.
    let mut step = diameter / (10.0 * slope_scale);
    let mut best_value = objective(&x).0;
    let mut best_point = x.clone();
    let mut last_certificate = f64::INFINITY;
    for _ in 0..POLISH_ITERATIONS {
        let (value, grad) = objective(&x);
        if value < best_value {
            best_value = value;
            best_point = x.clone();
        }
        let candidate = project(&add_scaled(&x, -step, &grad));
        let mapping = norm2(&sub(&x, &candidate)) / step;
        last_certificate = mapping * (diameter + step * norm2(&grad));
        if last_certificate <= 0.5 * accuracy {
            return Ok(ReferenceSolution {
                f_star: value,
                x_star: x,
                method: RefMethod::ProjectedSubgradient,
                certified_accuracy: accuracy,
            });
        }
        let candidate_value = objective(&candidate).0;
        if candidate_value <= value {
            x = candidate;
            step = (step * 1.2).min(diameter);
        } else {
            step *= 0.5;
            if step < 1e-16 {
                break;
            }
        }
    }
    // The certificate did not close (a kink at the optimum); report the best
    // point with the honest bound.
    Ok(ReferenceSolution {
        f_star: best_value,
        x_star: best_point,
        method: RefMethod::ProjectedSubgradient,
        certified_accuracy: accuracy.max(last_certificate),
    })
}

/// Dykstra's alternating projections onto `Q` and the halfspaces
/// `<rows[i], x> <= 0`.
fn dykstra_project(q: &FeasibleSet, rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    // Fast path: if projecting onto Q alone already lands inside every
    // halfspace, that is the exact projection onto the intersection.
    let direct = q.project_euclidean(y);
    if rows.iter().all(|row| dot(row, &direct) <= 0.0) {
        return direct;
    }
    let sets = rows.len() + 1;
    let mut x = y.to_vec();
    let mut corrections = vec![vec![0.0; y.len()]; sets];
    for _cycle in 0..100 {
        let mut cycle_change = 0.0f64;
        for s in 0..sets {
            let shifted = add_scaled(&x, 1.0, &corrections[s]);
            let projected = if s == 0 {
                q.project_euclidean(&shifted)
            } else {
                project_halfspace(&rows[s - 1], &shifted)
            };
            corrections[s] = sub(&shifted, &projected);
            cycle_change = cycle_change.max(norm_inf(&sub(&projected, &x)));
            x = projected;
        }
        if cycle_change < 1e-12 {
            break;
        }
    }
    x
}

/// Dykstra's alternating projections onto the halfspaces alone (their
/// intersection is a polyhedral cone).
fn dykstra_halfspaces(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    if rows.iter().all(|row| dot(row, y) <= 0.0) {
        return y.to_vec();
    }
    let mut x = y.to_vec();
    let mut corrections = vec![vec![0.0; y.len()]; rows.len()];
    for _cycle in 0..200 {
        let mut cycle_change = 0.0f64;
        for (row, correction) in rows.iter().zip(corrections.iter_mut()) {
            let shifted = add_scaled(&x, 1.0, correction);
            let projected = project_halfspace(row, &shifted);
            *correction = sub(&shifted, &projected);
            cycle_change = cycle_change.max(norm_inf(&sub(&projected, &x)));
            x = projected;
        }
        if cycle_change < 1e-13 {
            break;
        }
    }
    x
}

fn project_halfspace(row: &[f64], y: &[f64]) -> Vec<f64> {
    let violation = dot(row, y);
    if violation <= 0.0 {
        return y.to_vec();
    }
    let norm_sq = dot(row, row);
    if norm_sq == 0.0 {
        return y.to_vec();
    }
    add_scaled(y, -violation / norm_sq, row)
}
