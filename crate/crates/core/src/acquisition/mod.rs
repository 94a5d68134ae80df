//! Cost-sensitive knowledge gradient (CKG) and the search for the next sample.
//!
//! For a candidate `(l, x)` the inner maximization runs over a fixed discrete
//! set `A` of truth-source designs: `a` holds the posterior means
//! `mu^n(0, a_j)` and `b` the one-step standard deviations of those means when
//! `IS_l(x)` is observed. Then `CKG(l, x) = h(a, b) / c_l(x)`.

mod hfunc;
mod lhs;

pub use hfunc::{h, h_parallel};
pub use lhs::{latin_hypercube, CandidateOrigin, DiscreteCandidateSet};

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostNoiseModel;
use crate::error::{invalid, Result};
use crate::gp::{PosteriorState, TargetCache};
use crate::optimize::{maximize_in_box, AscentOptions};
use crate::space::{AugmentedPoint, BoxDomain};

/// CKG values at or below this are treated as "no expected improvement".
pub const NO_IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Bounded quasi-Newton ascent from several starts per source, checked against enumeration.
    #[default]
    MultistartGradient,
    /// Exact argmax over `[M]_0 x A`.
    DiscreteEnumeration,
}

impl std::str::FromStr for Strategy {
    type Err = crate::error::MisoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "multistartgradient" | "gradient" => Ok(Strategy::MultistartGradient),
            "discreteenumeration" | "enumeration" | "discrete" => Ok(Strategy::DiscreteEnumeration),
            other => invalid(format!("unknown acquisition strategy `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionResult {
    pub source: usize,
    pub x: Vec<f64>,
    /// Expected gain per unit cost.
    pub ckg: f64,
    pub h_value: f64,
    pub cost: f64,
    /// Set when no candidate promises a positive gain.
    pub no_improvement: bool,
}

#[derive(Clone, Debug)]
pub struct AcquisitionOptions {
    pub strategy: Strategy,
    /// Restarts per source for the gradient search.
    pub restarts: usize,
    pub ascent: AscentOptions,
    /// Worker count for the inner `h` evaluation (1 = sequential).
    pub h_workers: usize,
    /// Candidates costing more than this are excluded.
    pub max_cost: Option<f64>,
    /// Seed for restart locations.
    pub seed: u64,
}

impl Default for AcquisitionOptions {
    fn default() -> Self {
        AcquisitionOptions {
            strategy: Strategy::MultistartGradient,
            restarts: 10,
            ascent: AscentOptions::default(),
            h_workers: 1,
            max_cost: None,
            seed: 0,
        }
    }
}

/// Evaluates CKG for many candidates against one posterior and one set `A`.
pub struct CkgEvaluator<'a> {
    state: &'a PosteriorState,
    costs: &'a CostNoiseModel,
    cache: TargetCache,
    h_workers: usize,
}

impl<'a> CkgEvaluator<'a> {
    pub fn new(state: &'a PosteriorState, candidates: &DiscreteCandidateSet, costs: &'a CostNoiseModel) -> Result<Self> {
        if costs.num_sources() != state.kernel().num_sources() {
            return invalid(format!(
                "cost model has {} sources but the kernel has {}",
                costs.num_sources(),
                state.kernel().num_sources()
            ));
        }
        if candidates.points().iter().any(|p| p.len() != state.kernel().dim()) {
            return invalid("candidate set dimension does not match the kernel");
        }
        let targets: Vec<AugmentedPoint> = candidates
            .points()
            .iter()
            .map(|p| AugmentedPoint::truth(p.clone()))
            .collect();
        Ok(CkgEvaluator {
            state,
            costs,
            cache: TargetCache::new(state, &targets),
            h_workers: 1,
        })
    }

    pub fn with_h_workers(mut self, workers: usize) -> Self {
        self.h_workers = workers.max(1);
        self
    }

    /// Posterior means of the truth source over `A` (the vector `a`).
    pub fn target_means(&self) -> &[f64] {
        self.cache.means()
    }

    /// The vector `b` for candidate `(source, x)`.
    pub fn sigma_tilde(&self, source: usize, x: &[f64]) -> Result<Vec<f64>> {
        let noise = self.state.effective_noise(self.costs.noise(source, x));
        self.cache.sigma_tilde(self.state, source, x, noise)
    }

    pub fn evaluate(&self, source: usize, x: &[f64]) -> Result<AcquisitionResult> {
        self.state.kernel().check_point(&AugmentedPoint::new(source, x.to_vec()))?;
        let cost = self.costs.cost(source, x);
        if !(cost.is_finite() && cost > 0.0) {
            return invalid(format!("cost of source {source} at {x:?} is {cost}, must be positive"));
        }
        let b = self.sigma_tilde(source, x)?;
        let h_value = if self.h_workers > 1 {
            h_parallel(self.cache.means(), &b, self.h_workers)?
        } else {
            h(self.cache.means(), &b)?
        };
        let ckg = h_value / cost;
        Ok(AcquisitionResult {
            source,
            x: x.to_vec(),
            ckg,
            h_value,
            cost,
            no_improvement: ckg <= NO_IMPROVEMENT_TOL,
        })
    }

    /// CKG as a plain objective; `-inf` where it cannot be evaluated or is too expensive.
    pub fn value(&self, source: usize, x: &[f64], max_cost: Option<f64>) -> f64 {
        if let Some(limit) = max_cost {
            if self.costs.cost(source, x) > limit {
                return f64::NEG_INFINITY;
            }
        }
        self.evaluate(source, x).map(|r| r.ckg).unwrap_or(f64::NEG_INFINITY)
    }
}

/// `CKG(l, x)` for one candidate.
pub fn ckg(
    state: &PosteriorState,
    candidates: &DiscreteCandidateSet,
    candidate: &AugmentedPoint,
    costs: &CostNoiseModel,
) -> Result<AcquisitionResult> {
    CkgEvaluator::new(state, candidates, costs)?.evaluate(candidate.source, &candidate.x)
}

/// Enumeration order: larger CKG, then lower cost, lower source, lexicographically smaller x.
fn better(a: &AcquisitionResult, b: &AcquisitionResult) -> bool {
    let ord = a
        .ckg
        .total_cmp(&b.ckg)
        .then(b.cost.total_cmp(&a.cost))
        .then(b.source.cmp(&a.source))
        .then_with(|| {
            b.x.iter()
                .zip(&a.x)
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        });
    ord == Ordering::Greater
}

fn enumerate_all(
    eval: &CkgEvaluator<'_>,
    candidates: &DiscreteCandidateSet,
    max_cost: Option<f64>,
) -> Result<Option<AcquisitionResult>> {
    let m = eval.state.kernel().num_sources();
    let jobs: Vec<(usize, &Vec<f64>)> = (0..m)
        .flat_map(|l| candidates.points().iter().map(move |x| (l, x)))
        .collect();
    let results: Vec<Option<AcquisitionResult>> = jobs
        .par_iter()
        .map(|(l, x)| {
            if max_cost.is_some_and(|c| eval.costs.cost(*l, x) > c) {
                return Ok(None);
            }
            eval.evaluate(*l, x).map(Some)
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().fold(None, |best, r| match best {
        Some(b) if !better(&r, &b) => Some(b),
        _ => Some(r),
    }))
}

/// Picks the next `(source, design)` to sample.
pub fn next_sample(
    state: &PosteriorState,
    candidates: &DiscreteCandidateSet,
    costs: &CostNoiseModel,
    domain: &BoxDomain,
    opts: &AcquisitionOptions,
) -> Result<AcquisitionResult> {
    if domain.dim() != state.kernel().dim() {
        return invalid("domain dimension does not match the kernel");
    }
    let eval = CkgEvaluator::new(state, candidates, costs)?.with_h_workers(opts.h_workers);
    let Some(enumerated) = enumerate_all(&eval, candidates, opts.max_cost)? else {
        return invalid("no candidate fits the remaining budget");
    };
    let mut best = enumerated;
    if opts.strategy == Strategy::MultistartGradient && opts.restarts > 0 {
        let m = state.kernel().num_sources();
        let starts = latin_hypercube(opts.restarts, domain, opts.seed)?;
        let jobs: Vec<(usize, &Vec<f64>)> = (0..m).flat_map(|l| starts.iter().map(move |s| (l, s))).collect();
        let found: Vec<Option<AcquisitionResult>> = jobs
            .par_iter()
            .map(|(l, start)| {
                let r = maximize_in_box(|x| eval.value(*l, x, opts.max_cost), start, domain, &opts.ascent);
                if r.value.is_finite() {
                    eval.evaluate(*l, &r.x).ok()
                } else {
                    None
                }
            })
            .collect();
        for r in found.into_iter().flatten() {
            // the enumeration result is only displaced by a strictly larger value
            if r.ckg > best.ckg {
                best = r;
            }
        }
    }
    best.no_improvement = best.ckg <= NO_IMPROVEMENT_TOL;
    Ok(best)
}
