//! Concrete problem instances.
//!
//! The benchmark family is the Fermat–Torricelli–Steiner problem: minimize
//! the mean Euclidean distance to `r` anchor points subject to a max-of-linear
//! constraint built from `m` coefficient rows, over a simple feasible set.
//! Instances are generated from seeded Gaussian draws (mean 1, standard
//! deviation 2, via the documented Box–Muller transform in [`crate::rng`])
//! and serialize to flat JSON for exact replay.
//!
//! [`reference`] houses the independent reference-optimum oracle used to
//! certify solver outputs.

pub mod reference;

pub use reference::{reference_optimum, ConstraintSpec, RefMethod, ReferenceSolution};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::model::{Functional, SubgradientFn, ValueFn};
use crate::rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A Fermat–Torricelli–Steiner instance: anchor points plus the coefficient
/// rows of the max-of-linear constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtsInstance {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub seed: u64,
    /// `r` anchor points, each of dimension `n`.
    pub points: Vec<Vec<f64>>,
    /// `m` constraint rows, each of dimension `n`.
    pub rows: Vec<Vec<f64>>,
}

impl FtsInstance {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instances are plain data")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let instance: FtsInstance =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad instance JSON: {e}")))?;
        if instance.points.len() != instance.r
            || instance.rows.len() != instance.m
            || instance.points.iter().any(|p| p.len() != instance.n)
            || instance.rows.iter().any(|a| a.len() != instance.n)
        {
            return Err(Error::Config("instance shape fields disagree with the data".into()));
        }
        Ok(instance)
    }

    /// `max_i ||alpha_i||_2` — a relative Lipschitz constant for the
    /// max-of-linear constraint under the Euclidean geometry.
    pub fn max_constraint_norm(&self) -> f64 {
        self.rows.iter().map(|row| norm2(row)).fold(0.0, f64::max)
    }

    pub fn constraint_norms(&self) -> Vec<f64> {
        self.rows.iter().map(|row| norm2(row)).collect()
    }
}

/// Draw an instance with every coordinate i.i.d. Normal(1, 2) from the
/// stream keyed by `(seed, n, r, m)`: anchor points first, then constraint
/// rows, coordinate-major.
pub fn generate_fts(n: usize, r: usize, m: usize, seed: u64) -> FtsInstance {
    let mut stream = rng::keyed(&[seed, n as u64, r as u64, m as u64]);
    let mut draw_matrix = |count: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..n).map(|_| rng::normal(&mut stream, 1.0, 2.0)).collect())
            .collect()
    };
    let points = draw_matrix(r);
    let rows = draw_matrix(m);
    FtsInstance {
        n,
        r,
        m,
        seed,
        points,
        rows,
    }
}

/// Mean distance to the anchors and its subgradient,
/// `(1/r) Σ_k (x - P_k) / ||x - P_k||`, with a zero contribution from any
/// anchor the point currently sits on. 1-relatively-Lipschitz under the
/// Euclidean geometry.
pub fn fts_objective(instance: &FtsInstance, x: &[f64]) -> (f64, Vec<f64>) {
    let scale = 1.0 / instance.r as f64;
    let mut value = 0.0;
    let mut subgradient = vec![0.0; x.len()];
    for point in &instance.points {
        let offset: Vec<f64> = x.iter().zip(point).map(|(xi, pi)| xi - pi).collect();
        let distance = norm2(&offset);
        value += scale * distance;
        if distance > 0.0 {
            for (acc, oi) in subgradient.iter_mut().zip(&offset) {
                *acc += scale * oi / distance;
            }
        }
    }
    (value, subgradient)
}

/// `max_i <alpha_i, x>`, its subgradient (the lowest-index maximizing row),
/// and the 1-based index of that row.
pub fn max_linear_constraint(instance: &FtsInstance, x: &[f64]) -> (f64, Vec<f64>, usize) {
    let mut best = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    for (i, row) in instance.rows.iter().enumerate() {
        let v = dot(row, x);
        if v > best_value {
            best_value = v;
            best = i;
        }
    }
    (best_value, instance.rows[best].clone(), best + 1)
}

/// The objective as a solver-ready functional (`M_f = 1`).
pub fn objective_functional(instance: Arc<FtsInstance>, delta: f64) -> Result<Functional> {
    let value_instance = instance.clone();
    let value: ValueFn = Arc::new(move |x: &[f64]| fts_objective(&value_instance, x).0);
    let subgradient: SubgradientFn = Arc::new(move |x: &[f64]| fts_objective(&instance, x).1);
    Functional::relative_lipschitz(value, subgradient, 1.0, delta)
}

/// The max-of-linear constraint as one functional with
/// `M_g = max_i ||alpha_i||`.
pub fn constraint_functional(instance: Arc<FtsInstance>, delta: f64) -> Result<Functional> {
    let m = instance.max_constraint_norm();
    let value_instance = instance.clone();
    let value: ValueFn = Arc::new(move |x: &[f64]| max_linear_constraint(&value_instance, x).0);
    let subgradient: SubgradientFn =
        Arc::new(move |x: &[f64]| max_linear_constraint(&instance, x).1);
    Functional::relative_lipschitz(value, subgradient, m, delta)
}

/// One linear functional per constraint row, each with its own constant
/// `M_p = ||alpha_p||` — the inputs of the multi-constraint solvers.
pub fn row_functionals(instance: &FtsInstance, delta: f64) -> Result<Vec<Functional>> {
    instance
        .rows
        .iter()
        .map(|row| {
            let value_row = row.clone();
            let grad_row = row.clone();
            let m = norm2(row);
            Functional::relative_lipschitz(
                Arc::new(move |x: &[f64]| dot(&value_row, x)),
                Arc::new(move |_: &[f64]| grad_row.clone()),
                m,
                delta,
            )
        })
        .collect()
}

/// The starting point `(1/sqrt(n), ..., 1/sqrt(n))`.
pub fn sqrt_n_start(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64).sqrt(); n]
}

/// Small analytic functionals used across tests and the online benchmark.
pub mod analytic {
    use super::*;

    /// `|x_1 - shift|` on the line, zero subgradient at the kink.
    pub fn shifted_abs(shift: f64, m: f64, delta: f64) -> Functional {
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
            delta,
        )
        .expect("m > 0")
    }

    /// `<slope, x> + offset` with `M = ||slope||` (or 1 for a zero slope).
    pub fn affine(slope: Vec<f64>, offset: f64, delta: f64) -> Functional {
        let norm = norm2(&slope);
        let m = if norm > 0.0 { norm } else { 1.0 };
        let value_slope = slope.clone();
        Functional::relative_lipschitz(
            Arc::new(move |x: &[f64]| dot(&value_slope, x) + offset),
            Arc::new(move |_: &[f64]| slope.clone()),
            m,
            delta,
        )
        .expect("m > 0")
    }

    /// A constant functional (its subgradient is zero).
    pub fn constant(c: f64, m: f64) -> Functional {
        Functional::relative_lipschitz(
            Arc::new(move |_: &[f64]| c),
            Arc::new(|x: &[f64]| vec![0.0; x.len()]),
            m,
            0.0,
        )
        .expect("m > 0")
    }

    /// Distance to a single anchor point, `||x - p||`, with `M = 1`.
    pub fn distance_to(point: Vec<f64>) -> Functional {
        let value_point = point.clone();
        Functional::relative_lipschitz(
            Arc::new(move |x: &[f64]| {
                norm2(&x.iter().zip(&value_point).map(|(a, b)| a - b).collect::<Vec<f64>>())
            }),
            Arc::new(move |x: &[f64]| {
                let offset: Vec<f64> = x.iter().zip(&point).map(|(a, b)| a - b).collect();
                let d = norm2(&offset);
                if d > 0.0 {
                    offset.iter().map(|o| o / d).collect()
                } else {
                    vec![0.0; x.len()]
                }
            }),
            1.0,
            0.0,
        )
        .expect("m > 0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FeasibleSet, Geometry};
    use crate::model::check_model;

    fn tiny_instance(points: Vec<Vec<f64>>, rows: Vec<Vec<f64>>) -> FtsInstance {
        let n = points
            .first()
            .map(|p| p.len())
            .or_else(|| rows.first().map(|r| r.len()))
            .unwrap();
        FtsInstance {
            n,
            r: points.len(),
            m: rows.len(),
            seed: 0,
            points,
            rows,
        }
    }

    #[test]
    fn objective_examples() {
        let inst = tiny_instance(vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0]]);
        let (value, grad) = fts_objective(&inst, &[3.0, 4.0]);
        assert_eq!(value, 5.0);
        assert!((grad[0] - 0.6).abs() < 1e-15 && (grad[1] - 0.8).abs() < 1e-15);

        let pair = tiny_instance(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![vec![1.0, 0.0]]);
        let (value, _) = fts_objective(&pair, &[0.0, 0.0]);
        assert_eq!(value, 1.0);

        let (value, grad) = fts_objective(&inst, &[0.0, 0.0]);
        assert_eq!(value, 0.0);
        assert_eq!(grad, vec![0.0, 0.0]);
    }

    #[test]
    fn objective_subgradient_matches_finite_differences() {
        let inst = generate_fts(4, 6, 3, 5);
        let q = FeasibleSet::unit_ball(4);
        let mut stream = rng::keyed(&[61]);
        let mut checked = 0;
        while checked < 200 {
            let x = q.sample(&mut stream);
            if inst
                .points
                .iter()
                .any(|p| norm2(&crate::linalg::sub(&x, p)) < 1e-3)
            {
                continue;
            }
            checked += 1;
            let (_, grad) = fts_objective(&inst, &x);
            for i in 0..x.len() {
                let h = 1e-6;
                let mut hi = x.clone();
                let mut lo = x.clone();
                hi[i] += h;
                lo[i] -= h;
                let fd = (fts_objective(&inst, &hi).0 - fts_objective(&inst, &lo).0) / (2.0 * h);
                assert!(
                    (fd - grad[i]).abs() / grad[i].abs().max(1.0) < 1e-5,
                    "coord {i}: {fd} vs {}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn unit_relative_lipschitz_constant_is_valid_for_the_objective() {
        let inst = Arc::new(generate_fts(3, 5, 2, 9));
        let f = objective_functional(inst.clone(), 0.0).unwrap();
        let q = FeasibleSet::unit_ball(3);
        let mut stream = rng::keyed(&[67]);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..1000)
            .map(|_| (q.sample(&mut stream), q.sample(&mut stream)))
            .collect();
        let value_inst = inst.clone();
        let report = check_model(
            f.model(),
            &move |x: &[f64]| fts_objective(&value_inst, x).0,
            &Geometry::Euclidean,
            &pairs,
        );
        assert!(report.is_clean(), "{:?}", report.violations.first());
    }

    #[test]
    fn constraint_examples_use_one_based_lowest_index() {
        let inst = tiny_instance(vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        let (value, grad, active) = max_linear_constraint(&inst, &[1.0, 3.0]);
        assert_eq!(value, 6.0);
        assert_eq!(grad, vec![0.0, 2.0]);
        assert_eq!(active, 2);

        let (value, _, active) = max_linear_constraint(&inst, &[0.0, 0.0]);
        assert_eq!(value, 0.0);
        assert_eq!(active, 1);

        let dup = tiny_instance(vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let (_, _, active) = max_linear_constraint(&dup, &[0.7, -0.3]);
        assert_eq!(active, 1);
    }

    #[test]
    fn constraint_matches_brute_force_and_attains_the_max() {
        let inst = generate_fts(5, 3, 8, 17);
        let q = FeasibleSet::unit_ball(5);
        let mut stream = rng::keyed(&[71]);
        for _ in 0..200 {
            let x = q.sample(&mut stream);
            let (value, grad, active) = max_linear_constraint(&inst, &x);
            let brute = inst
                .rows
                .iter()
                .map(|row| dot(row, &x))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(value, brute);
            assert_eq!(dot(&grad, &x), value);
            assert_eq!(&grad, &inst.rows[active - 1]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_fts(7, 4, 5, 123);
        let b = generate_fts(7, 4, 5, 123);
        assert_eq!(a, b);
        let c = generate_fts(7, 4, 5, 124);
        assert_ne!(a, c);
    }

    #[test]
    fn generated_coordinates_have_the_right_moments() {
        // 1000 * (600 + 400) = 1e6 coordinates.
        let inst = generate_fts(1000, 600, 400, 2026);
        let coords: Vec<f64> = inst
            .points
            .iter()
            .chain(inst.rows.iter())
            .flatten()
            .copied()
            .collect();
        assert_eq!(coords.len(), 1_000_000);
        let count = coords.len() as f64;
        let mean = coords.iter().sum::<f64>() / count;
        let sd = (coords.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt();
        assert!((mean - 1.0).abs() < 0.006, "mean {mean}");
        assert!((sd - 2.0).abs() < 0.01, "sd {sd}");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let inst = generate_fts(3, 2, 2, 55);
        let parsed = FtsInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, parsed);
        for (a, b) in inst.points.iter().flatten().zip(parsed.points.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn json_shape_mismatch_is_rejected() {
        let mut inst = generate_fts(3, 2, 2, 55);
        inst.r = 5;
        assert!(FtsInstance::from_json(&inst.to_json()).is_err());
    }
}
