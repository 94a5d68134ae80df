//! A smooth two-source test problem with a known optimum at the origin.

use std::sync::Arc;

use super::BenchmarkProblem;
use crate::cost::CostNoiseModel;
use crate::error::{invalid, Result};
use crate::space::BoxDomain;

fn neg_sphere(x: &[f64]) -> f64 {
    -x.iter().map(|v| v * v).sum::<f64>()
}

/// `g(x) = -|x|^2` on `[-1, 1]^d`; `IS_1 = g + 0.05 cos(sum x)`; unit costs, noise 1e-6.
pub fn two_source_analytic(d: usize) -> Result<BenchmarkProblem> {
    if d == 0 {
        return invalid("two_source_analytic needs d >= 1");
    }
    BenchmarkProblem::new(
        format!("two_source_analytic_{d}"),
        BoxDomain::cube(-1.0, 1.0, d)?,
        vec![
            Arc::new(|x, _| neg_sphere(x)),
            Arc::new(|x, _| neg_sphere(x) + 0.05 * x.iter().sum::<f64>().cos()),
        ],
        CostNoiseModel::constant(&[1.0, 1.0], &[1e-6, 1e-6])?,
        Some(Arc::new(neg_sphere)),
        Some((vec![0.0; d], 0.0)),
    )
}
