//! Two-source Rosenbrock problem on `[-2, 2]^2`.
//!
//! `IS_0 = f + u * eps` and `IS_1 = f + v * sin(10 x_1 + 5 x_2)` with `f` the
//! Rosenbrock function. Rosenbrock is minimized, so every evaluator returns the
//! negated value: the optimizer maximizes `-f`, and reported objective values
//! and recommendations are on that negated scale.

use std::sync::Arc;

use super::{gaussian, BenchmarkProblem};
use crate::cost::CostNoiseModel;
use crate::error::Result;
use crate::space::BoxDomain;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RosenbrockConfig {
    /// `u = 0`, `v = 0.1`, costs 1000 / 1, noise 1e-3 / 1e-6.
    Lam,
    /// `u = 1`, `v = 2`, costs 50 / 1, noise 1 / 1e-6.
    Alternative,
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
}

pub fn rosenbrock_miso(config: RosenbrockConfig) -> Result<BenchmarkProblem> {
    let (u, v, costs, noises, name) = match config {
        RosenbrockConfig::Lam => (0.0, 0.1, [1000.0, 1.0], [1e-3, 1e-6], "rosenbrock_lam"),
        RosenbrockConfig::Alternative => (1.0, 2.0, [50.0, 1.0], [1.0, 1e-6], "rosenbrock_alt"),
    };
    let is0: super::Evaluator = Arc::new(move |x, rng| {
        let eps = gaussian(rng);
        -(rosenbrock(x) + u * eps)
    });
    let is1: super::Evaluator = Arc::new(move |x, _| -(rosenbrock(x) + v * (10.0 * x[0] + 5.0 * x[1]).sin()));
    BenchmarkProblem::new(
        name,
        BoxDomain::cube(-2.0, 2.0, 2)?,
        vec![is0, is1],
        CostNoiseModel::constant(&costs, &noises)?,
        Some(Arc::new(|x| -rosenbrock(x))),
        Some((vec![1.0, 1.0], 0.0)),
    )
}
