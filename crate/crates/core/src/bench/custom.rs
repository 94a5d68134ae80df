//! Problems declared in a file: a box, one expression per source, constant costs and noises.
//!
//! ```toml
//! name = "bumpy"
//! lower = [-1.0, -1.0]
//! upper = [1.0, 1.0]
//! optimum = { x = [0.0, 0.0], value = 0.0 }   # optional
//!
//! [[sources]]            # IS_0, the objective to maximize
//! expr = "-(x_0^2 + x_1^2)"
//! cost = 10.0
//! noise = 0.01
//!
//! [[sources]]
//! expr = "-(x_0^2 + x_1^2) + 0.1 * sin(5 * x_0)"
//! cost = 1.0
//! noise = 0.0
//! ```
//!
//! Each query returns the expression value plus Gaussian noise of the declared variance.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::{gaussian, BenchmarkProblem, Evaluator};
use crate::cost::CostNoiseModel;
use crate::error::{invalid, MisoError, Result};
use crate::space::BoxDomain;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub expr: String,
    pub cost: f64,
    #[serde(default)]
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimumSpec {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub optimum: Option<OptimumSpec>,
}

fn default_name() -> String {
    "custom".into()
}

impl ProblemSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| MisoError::Config(format!("problem file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MisoError::Config(format!("cannot read problem file {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn build(&self) -> Result<BenchmarkProblem> {
        let domain = BoxDomain::new(self.lower.clone(), self.upper.clone())?;
        if self.sources.is_empty() {
            return invalid("problem declares no sources");
        }
        let mut exprs = Vec::with_capacity(self.sources.len());
        for (l, s) in self.sources.iter().enumerate() {
            let e = Expr::parse(&s.expr).map_err(|e| MisoError::Config(format!("source {l}: {e}")))?;
            if let Some(i) = e.max_var() {
                if i >= domain.dim() {
                    return invalid(format!("source {l} uses x_{i} but the box has dimension {}", domain.dim()));
                }
            }
            exprs.push(Arc::new(e));
        }
        let costs: Vec<f64> = self.sources.iter().map(|s| s.cost).collect();
        let noises: Vec<f64> = self.sources.iter().map(|s| s.noise).collect();
        let model = CostNoiseModel::constant(&costs, &noises)?;
        let evaluators: Vec<Evaluator> = exprs
            .iter()
            .zip(&noises)
            .map(|(e, n)| {
                let e = e.clone();
                let sd = n.sqrt();
                let f: Evaluator = Arc::new(move |x, rng| {
                    let v = e.eval(x);
                    if sd > 0.0 {
                        v + sd * gaussian(rng)
                    } else {
                        v
                    }
                });
                f
            })
            .collect();
        let truth = exprs[0].clone();
        BenchmarkProblem::new(
            self.name.clone(),
            domain,
            evaluators,
            model,
            Some(Arc::new(move |x| truth.eval(x))),
            self.optimum.as_ref().map(|o| (o.x.clone(), o.value)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::source_stream;

    const SPEC: &str = r#"
name = "bowl"
lower = [-1.0, -1.0]
upper = [1.0, 1.0]
optimum = { x = [0.0, 0.0], value = 0.0 }

[[sources]]
expr = "-(x_0^2 + x_1^2)"
cost = 10.0
noise = 0.0

[[sources]]
expr = "-(x_0^2 + x_1^2) + 0.1 * cos(x_0)"
cost = 1.0
"#;

    #[test]
    fn loads_and_evaluates() {
        let p = ProblemSpec::from_toml_str(SPEC).unwrap().build().unwrap();
        assert_eq!(p.name(), "bowl");
        assert_eq!(p.num_sources(), 2);
        let mut rng = source_stream(1, 1, 0);
        assert!((p.query(1, &[0.5, 0.0], &mut rng) - (-0.25 + 0.1 * 0.5f64.cos())).abs() < 1e-15);
        assert_eq!(p.true_value(&[0.5, 0.5]), Some(-0.5));
        assert_eq!(p.costs().cost(0, &[0.0, 0.0]), 10.0);
    }

    #[test]
    fn rejects_bad_specs() {
        let out_of_range = SPEC.replace("0.1 * cos(x_0)", "x_2");
        assert!(ProblemSpec::from_toml_str(&out_of_range).unwrap().build().is_err());
        let bad_expr = SPEC.replace("0.1 * cos(x_0)", "tan(x_0)");
        assert!(ProblemSpec::from_toml_str(&bad_expr).unwrap().build().is_err());
        let bad_cost = SPEC.replace("cost = 1.0", "cost = -1.0");
        assert!(ProblemSpec::from_toml_str(&bad_cost).unwrap().build().is_err());
        assert!(ProblemSpec::from_toml_str("lower = [0.0]").is_err());
    }
}
