//! Benchmark problems. Every problem is posed as maximization of `IS_0`.

pub mod analytic;
pub mod ato;
pub mod custom;
pub mod expr;
pub mod rosenbrock;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cost::CostNoiseModel;
use crate::error::{invalid, Result};
use crate::space::BoxDomain;

pub use analytic::two_source_analytic;
pub use ato::ato_synthetic;
pub use custom::ProblemSpec;
pub use rosenbrock::{rosenbrock, rosenbrock_miso, RosenbrockConfig};

/// A source evaluator: design and the stream for this call to a noisy observation.
pub type Evaluator = Arc<dyn Fn(&[f64], &mut ChaCha8Rng) -> f64 + Send + Sync>;
/// A noise-free objective.
pub type Objective = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct BenchmarkProblem {
    name: String,
    domain: BoxDomain,
    sources: Vec<Evaluator>,
    costs: CostNoiseModel,
    true_objective: Option<Objective>,
    known_optimum: Option<(Vec<f64>, f64)>,
}

impl fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("num_sources", &self.sources.len())
            .field("costs", &self.costs)
            .field("known_optimum", &self.known_optimum)
            .finish()
    }
}

impl BenchmarkProblem {
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        sources: Vec<Evaluator>,
        costs: CostNoiseModel,
        true_objective: Option<Objective>,
        known_optimum: Option<(Vec<f64>, f64)>,
    ) -> Result<Self> {
        if sources.is_empty() {
            return invalid("a problem needs at least the truth source");
        }
        if sources.len() != costs.num_sources() {
            return invalid(format!(
                "{} source evaluators but cost/noise model for {} sources",
                sources.len(),
                costs.num_sources()
            ));
        }
        if let Some((x, _)) = &known_optimum {
            if !domain.contains(x) {
                return invalid("known optimum lies outside the box");
            }
        }
        Ok(BenchmarkProblem {
            name: name.into(),
            domain,
            sources,
            costs,
            true_objective,
            known_optimum,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn costs(&self) -> &CostNoiseModel {
        &self.costs
    }

    /// Replaces the cost/noise model the optimizer sees; evaluators are unchanged.
    pub fn with_costs(mut self, costs: CostNoiseModel) -> Result<Self> {
        if costs.num_sources() != self.sources.len() {
            return invalid("replacement cost model has the wrong number of sources");
        }
        self.costs = costs;
        Ok(self)
    }

    pub fn query(&self, source: usize, x: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        (self.sources[source])(x, rng)
    }

    pub fn true_value(&self, x: &[f64]) -> Option<f64> {
        self.true_objective.as_ref().map(|g| g(x))
    }

    pub fn has_true_objective(&self) -> bool {
        self.true_objective.is_some()
    }

    pub fn known_optimum(&self) -> Option<(&[f64], f64)> {
        self.known_optimum.as_ref().map(|(x, v)| (x.as_slice(), *v))
    }
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Built-in problems: `rosenbrock_lam`, `rosenbrock_alt`, `ato`, `two_source_analytic`.
pub fn by_name(name: &str, dim: Option<usize>, seed: u64) -> Result<BenchmarkProblem> {
    match name {
        "rosenbrock_lam" => rosenbrock_miso(RosenbrockConfig::Lam),
        "rosenbrock_alt" | "rosenbrock_alternative" => rosenbrock_miso(RosenbrockConfig::Alternative),
        "ato" | "ato_synthetic" => ato_synthetic(seed),
        "two_source_analytic" => two_source_analytic(dim.unwrap_or(2)),
        other => invalid(format!(
            "unknown problem `{other}` (expected rosenbrock_lam, rosenbrock_alt, ato, two_source_analytic)"
        )),
    }
}
