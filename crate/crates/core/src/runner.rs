//! The outer loop: fit hyperparameters on an initial design, then repeatedly pick
//! the next `(source, design)` by CKG, query it, condition the posterior, and
//! recommend the maximizer of the truth-source posterior mean.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::acquisition::{latin_hypercube, next_sample, AcquisitionOptions, DiscreteCandidateSet, Strategy};
use crate::bench::BenchmarkProblem;
use crate::error::{invalid, MisoError, Result};
use crate::gp::{Observation, PosteriorState, DEFAULT_JITTER};
use crate::hyper::{build_priors, fit_block, fit_map, DifferenceDataset, FitOptions, FitResult, HyperPrior};
use crate::kernel::{KernelFamily, MeanFunction, MisoKernel};
use crate::optimize::{maximize_in_box, AscentOptions};
use crate::rng::{mix, source_stream};
use crate::space::BoxDomain;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "limit", rename_all = "snake_case")]
pub enum Budget {
    /// Total query cost, initial design excluded.
    TotalCost(f64),
    /// Number of acquisition steps.
    Iterations(usize),
}

impl Budget {
    fn validate(&self) -> Result<()> {
        match *self {
            Budget::TotalCost(c) if !(c.is_finite() && c >= 0.0) => invalid(format!("cost budget must be >= 0, got {c}")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub family: KernelFamily,
    /// Size of the candidate set `A`; `None` means `50 * d`.
    pub candidates: Option<usize>,
    pub strategy: Strategy,
    pub restarts: usize,
    pub ascent: AscentOptions,
    pub h_workers: usize,
    pub budget: Budget,
    /// Initial points per source are `ceil(initial_per_dim * d)`.
    pub initial_per_dim: f64,
    /// Overrides `initial_per_dim` when set.
    pub initial_points: Option<usize>,
    /// Refit hyperparameters every `k` steps; 0 fits once.
    pub refit_every: usize,
    pub use_priors: bool,
    pub fit_restarts: usize,
    /// Recommendation grid holds `recommend_grid_per_dim * d` points.
    pub recommend_grid_per_dim: usize,
    /// Top grid points refined by ascent.
    pub recommend_starts: usize,
    /// Kernel and mean to use instead of fitting; incompatible with `refit_every > 0`.
    pub model: Option<Model>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            family: KernelFamily::SquaredExponential,
            candidates: None,
            strategy: Strategy::MultistartGradient,
            restarts: 10,
            ascent: AscentOptions::default(),
            h_workers: 1,
            budget: Budget::Iterations(10),
            initial_per_dim: 2.5,
            initial_points: None,
            refit_every: 0,
            use_priors: true,
            fit_restarts: 5,
            recommend_grid_per_dim: 1000,
            recommend_starts: 5,
            model: None,
        }
    }
}

impl RunOptions {
    pub fn initial_size(&self, d: usize) -> usize {
        self.initial_points
            .unwrap_or_else(|| (self.initial_per_dim * d as f64 - 1e-9).ceil() as usize)
    }

    pub fn candidate_size(&self, d: usize) -> usize {
        self.candidates.unwrap_or(50 * d)
    }

    fn fit_options(&self, seed: u64) -> FitOptions {
        FitOptions {
            family: self.family,
            use_priors: self.use_priors,
            restarts: self.fit_restarts,
            seed,
            ..Default::default()
        }
    }
}

/// Covariance and prior mean of the augmented GP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kernel: MisoKernel,
    pub mean: MeanFunction,
}

/// One acquisition step.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub iter: usize,
    pub source: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub cost: f64,
    /// Initial-design cost plus every query so far.
    pub cum_cost: f64,
    pub rec_x: Vec<f64>,
    pub rec_mu: f64,
    pub true_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub x: Vec<f64>,
    pub mu: f64,
    pub true_value: Option<f64>,
}

/// Everything a run produces besides the per-step records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunLog {
    pub problem: String,
    pub seed: u64,
    pub dim: usize,
    pub num_sources: usize,
    pub initial_designs: Vec<Vec<f64>>,
    pub initial_cost: f64,
    pub priors: HyperPrior,
    /// Model the loop started from.
    pub model: Model,
    /// `None` when the model was supplied rather than fitted.
    pub fit: Option<FitResult>,
    /// Later refits, in order.
    pub refits: Vec<FitResult>,
    pub initial_recommendation: Recommendation,
    /// Best true objective over the initial designs.
    pub baseline: Option<f64>,
    pub final_recommendation: Recommendation,
    pub total_cost: f64,
    pub steps: usize,
    /// Set when a source failed twice and the run stopped early.
    pub failure: Option<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub log: RunLog,
}

/// Posterior-mean maximizer over a fixed grid, refined by local ascent.
pub struct Recommender {
    grid: Vec<Vec<f64>>,
    starts: usize,
    ascent: AscentOptions,
}

impl Recommender {
    pub fn new(grid: Vec<Vec<f64>>, starts: usize) -> Result<Self> {
        if grid.is_empty() {
            return invalid("recommendation grid is empty");
        }
        Ok(Recommender {
            grid,
            starts,
            ascent: AscentOptions {
                max_iters: 200,
                x_tol: 1e-8,
                fd_rel_step: 1e-6,
            },
        })
    }

    pub fn latin_hypercube(n: usize, domain: &BoxDomain, seed: u64, starts: usize) -> Result<Self> {
        Self::new(latin_hypercube(n, domain, seed)?, starts)
    }

    pub fn grid(&self) -> &[Vec<f64>] {
        &self.grid
    }

    /// Ties on the grid go to the earliest point; ascent only replaces it when strictly better.
    pub fn recommend(&self, state: &PosteriorState, domain: &BoxDomain) -> (Vec<f64>, f64) {
        let values: Vec<f64> = self.grid.iter().map(|x| state.mean_at(0, x)).collect();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
        let mut best = (self.grid[order[0]].clone(), values[order[0]]);
        for &i in order.iter().take(self.starts) {
            let r = maximize_in_box(|x| state.mean_at(0, x), &self.grid[i], domain, &self.ascent);
            if r.value > best.1 {
                best = (r.x, r.value);
            }
        }
        best
    }
}

/// Finds `argmax_x mu^n(0, x)` on a fresh `1000 * d` grid.
pub fn recommend(state: &PosteriorState, domain: &BoxDomain, seed: u64) -> Result<(Vec<f64>, f64)> {
    let r = Recommender::latin_hypercube(1000 * domain.dim(), domain, seed, 5)?;
    Ok(r.recommend(state, domain))
}

struct Querier<'a> {
    problem: &'a BenchmarkProblem,
    seed: u64,
    calls: Vec<u64>,
}

impl Querier<'_> {
    /// Queries once, retrying once with a fresh stream on a non-finite result.
    fn query(&mut self, source: usize, x: &[f64]) -> Result<f64> {
        let mut last = f64::NAN;
        for _ in 0..2 {
            let mut rng = source_stream(self.seed, source, self.calls[source]);
            self.calls[source] += 1;
            last = self.problem.query(source, x, &mut rng);
            if last.is_finite() {
                return Ok(last);
            }
            log::warn!("source {source} returned {last} at {x:?}");
        }
        Err(MisoError::SourceFailure {
            source_index: source,
            x: x.to_vec(),
            reason: format!("returned {last} twice"),
        })
    }
}

fn refit(
    state: &PosteriorState,
    priors: &HyperPrior,
    current: &FitResult,
    problem: &BenchmarkProblem,
    opts: &FitOptions,
) -> Result<FitResult> {
    // truth block on every sample; source l's discrepancy enters as extra white noise
    // of its fitted signal variance. Discrepancy blocks keep their paired-design fits.
    let mut xs = Vec::with_capacity(state.observations().len());
    let mut ys = Vec::with_capacity(xs.capacity());
    let mut noise = Vec::with_capacity(xs.capacity());
    for o in state.observations() {
        let extra = if o.source == 0 {
            0.0
        } else {
            current.discrepancy[o.source - 1].kernel.signal_variance()
        };
        xs.push(o.x.clone());
        ys.push(o.y);
        noise.push(problem.costs().noise(o.source, &o.x) + extra);
    }
    let mean = current.mean.constant;
    let truth = fit_block(&xs, &ys, &noise, mean, &priors.truth, problem.domain(), opts)?;
    let kernel = MisoKernel::independent(
        truth.kernel.clone(),
        current.discrepancy.iter().map(|b| Some(b.kernel.clone())).collect(),
    )?;
    Ok(FitResult {
        kernel,
        mean: MeanFunction::constant(mean),
        warning: !truth.converged || current.discrepancy.iter().any(|b| !b.converged),
        truth,
        discrepancy: current.discrepancy.clone(),
    })
}

/// State after the initial design has been queried and hyperparameters fitted.
pub struct InitialFit {
    pub designs: Vec<Vec<f64>>,
    pub initial_cost: f64,
    /// Best true objective over the initial designs.
    pub baseline: Option<f64>,
    pub priors: HyperPrior,
    pub model: Model,
    /// `None` when the model was supplied.
    pub fit: Option<FitResult>,
    pub state: PosteriorState,
    /// The fixed set `A` for the inner maximization.
    pub candidates: DiscreteCandidateSet,
    calls: Vec<u64>,
}

/// Queries every source on a shared Latin hypercube design, builds the priors, fits
/// the hyperparameters (unless supplied) and conditions the posterior on the design.
pub fn initialize(problem: &BenchmarkProblem, opts: &RunOptions, seed: u64) -> Result<InitialFit> {
    opts.budget.validate()?;
    if opts.model.is_some() && opts.refit_every > 0 {
        return invalid("a supplied model cannot be refitted; set refit_every to 0");
    }
    let domain = problem.domain();
    let d = domain.dim();
    let m = problem.num_sources();
    let costs = problem.costs();
    let n_init = opts.initial_size(d);
    if n_init < 2 {
        return invalid(format!("need at least 2 initial points per source, got {n_init}"));
    }

    let designs = latin_hypercube(n_init, domain, mix(seed ^ 0x1))?;
    let mut querier = Querier {
        problem,
        seed,
        calls: vec![0; m],
    };
    let mut values = vec![Vec::with_capacity(n_init); m];
    let mut observations = Vec::with_capacity(n_init * m);
    let mut initial_cost = 0.0;
    for (l, vals) in values.iter_mut().enumerate() {
        for x in &designs {
            let y = querier.query(l, x)?;
            vals.push(y);
            initial_cost += costs.cost(l, x);
            observations.push(Observation::new(l, x.clone(), y, costs.noise(l, x)));
        }
    }
    let baseline = designs
        .iter()
        .filter_map(|x| problem.true_value(x))
        .fold(None, |b: Option<f64>, v| Some(b.map_or(v, |b| b.max(v))));

    let data = DifferenceDataset::new(designs.clone(), values)?;
    let priors = build_priors(&data, domain, costs)?;
    let (model, fit) = match &opts.model {
        Some(model) => {
            if model.kernel.num_sources() != m || model.kernel.dim() != d {
                return invalid("supplied model does not match the problem's sources or dimension");
            }
            (model.clone(), None)
        }
        None => {
            let fit = fit_map(&data, &priors, domain, costs, &opts.fit_options(mix(seed ^ 0x5)))?;
            if fit.warning {
                log::warn!("hyperparameter fit did not converge for seed {seed}");
            }
            let model = Model {
                kernel: fit.kernel.clone(),
                mean: fit.mean,
            };
            (model, Some(fit))
        }
    };
    let state = PosteriorState::from_observations(model.kernel.clone(), model.mean, DEFAULT_JITTER, observations)?;
    let candidates = DiscreteCandidateSet::latin_hypercube(opts.candidate_size(d), domain, mix(seed ^ 0x2))?;
    Ok(InitialFit {
        designs,
        initial_cost,
        baseline,
        priors,
        model,
        fit,
        state,
        candidates,
        calls: querier.calls,
    })
}

/// Runs misoKG on `problem` with replication seed `seed`.
///
/// Errors before the first acquisition step (bad options, failing initial queries,
/// hyperparameter fitting) are returned as `Err`. A source failing during the loop
/// ends the run early; the partial output has `log.failure` set.
pub fn run(problem: &BenchmarkProblem, opts: &RunOptions, seed: u64) -> Result<RunOutput> {
    let InitialFit {
        designs: initial_designs,
        initial_cost,
        baseline,
        priors,
        model,
        fit,
        mut state,
        candidates,
        calls,
    } = initialize(problem, opts, seed)?;
    let domain = problem.domain().clone();
    let d = domain.dim();
    let m = problem.num_sources();
    let costs = problem.costs();
    let mut querier = Querier { problem, seed, calls };

    let recommender = Recommender::latin_hypercube(
        opts.recommend_grid_per_dim.max(1) * d,
        &domain,
        mix(seed ^ 0x3),
        opts.recommend_starts,
    )?;
    let rec_of = |state: &PosteriorState| {
        let (x, mu) = recommender.recommend(state, &domain);
        let true_value = problem.true_value(&x);
        Recommendation { x, mu, true_value }
    };
    let initial_recommendation = rec_of(&state);

    let mut records = Vec::new();
    let mut spent = 0.0;
    let mut failure = None;
    let mut current_fit = fit.clone();
    let mut refits = Vec::new();
    let mut recommendation = initial_recommendation.clone();
    for iter in 0.. {
        let max_cost = match opts.budget {
            Budget::Iterations(n) if iter >= n => break,
            Budget::Iterations(_) => None,
            Budget::TotalCost(limit) => {
                let remaining = limit - spent;
                let affordable = (0..m).any(|l| candidates.points().iter().any(|x| costs.cost(l, x) <= remaining));
                if !affordable {
                    break;
                }
                Some(remaining)
            }
        };
        if let (Some(current), true) = (&current_fit, opts.refit_every > 0 && iter % opts.refit_every == 0) {
            let f = refit(&state, &priors, current, problem, &opts.fit_options(mix(seed ^ mix(0x5 + iter as u64))))?;
            state = PosteriorState::from_observations(f.kernel.clone(), f.mean, DEFAULT_JITTER, state.observations().to_vec())?;
            current_fit = Some(f.clone());
            refits.push(f);
        }
        let acq = AcquisitionOptions {
            strategy: opts.strategy,
            restarts: opts.restarts,
            ascent: opts.ascent.clone(),
            h_workers: opts.h_workers,
            max_cost,
            seed: mix(seed ^ mix(0x4 + iter as u64)),
        };
        let choice = next_sample(&state, &candidates, costs, &domain, &acq)?;
        let y = match querier.query(choice.source, &choice.x) {
            Ok(y) => y,
            Err(e) => {
                log::error!("aborting run at step {iter}: {e}");
                failure = Some(e.to_string());
                break;
            }
        };
        let cost = costs.cost(choice.source, &choice.x);
        spent += cost;
        state.observe(Observation::new(
            choice.source,
            choice.x.clone(),
            y,
            costs.noise(choice.source, &choice.x),
        ))?;
        recommendation = rec_of(&state);
        records.push(RunRecord {
            iter,
            source: choice.source,
            x: choice.x,
            y,
            cost,
            cum_cost: initial_cost + spent,
            rec_x: recommendation.x.clone(),
            rec_mu: recommendation.mu,
            true_value: recommendation.true_value,
        });
    }

    Ok(RunOutput {
        log: RunLog {
            problem: problem.name().to_string(),
            seed,
            dim: d,
            num_sources: m,
            initial_designs,
            initial_cost,
            priors,
            model,
            fit,
            refits,
            initial_recommendation,
            baseline,
            final_recommendation: recommendation,
            total_cost: initial_cost + spent,
            steps: records.len(),
            failure,
        },
        records,
    })
}

/// Column names for a `d`-dimensional problem.
pub fn csv_header(d: usize) -> Vec<String> {
    let mut h = vec!["iter".to_string(), "source".to_string()];
    h.extend((0..d).map(|i| format!("x_{i}")));
    h.extend(["y", "cost", "cum_cost"].map(String::from));
    h.extend((0..d).map(|i| format!("rec_x_{i}")));
    h.extend(["rec_mu", "true_value"].map(String::from));
    h
}

/// Writes records as CSV; `true_value` is left empty when unknown.
pub fn write_records<W: Write>(records: &[RunRecord], d: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(d))?;
    for r in records {
        if r.x.len() != d || r.rec_x.len() != d {
            return invalid("record dimension does not match the header");
        }
        let mut row = vec![r.iter.to_string(), r.source.to_string()];
        row.extend(r.x.iter().map(f64::to_string));
        row.extend([r.y, r.cost, r.cum_cost].map(|v| v.to_string()));
        row.extend(r.rec_x.iter().map(f64::to_string));
        row.push(r.rec_mu.to_string());
        row.push(r.true_value.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses CSV written by [`write_records`]; the dimension is inferred from the header.
pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let d = header.iter().filter(|h| h.starts_with("x_")).count();
    if header != csv_header(d) {
        return invalid(format!("unexpected CSV header {header:?}"));
    }
    let num = |s: &str, col: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| MisoError::InvalidInput(format!("column {col}: `{s}` is not a number")))
    };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let f = |i: usize| num(&row[i], &header[i]);
        let int = |i: usize| {
            row[i]
                .parse::<usize>()
                .map_err(|_| MisoError::InvalidInput(format!("column {}: `{}` is not an integer", header[i], &row[i])))
        };
        let x = (0..d).map(|i| f(2 + i)).collect::<Result<Vec<_>>>()?;
        let rec_x = (0..d).map(|i| f(5 + d + i)).collect::<Result<Vec<_>>>()?;
        let tv = &row[6 + 2 * d];
        out.push(RunRecord {
            iter: int(0)?,
            source: int(1)?,
            x,
            y: f(2 + d)?,
            cost: f(3 + d)?,
            cum_cost: f(4 + d)?,
            rec_x,
            rec_mu: f(5 + 2 * d)?,
            true_value: if tv.is_empty() { None } else { Some(num(tv, "true_value")?) },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BaseKernel;

    fn one_obs_state(x: f64, y: f64, ls: f64) -> PosteriorState {
        let k = BaseKernel::squared_exponential(ls, 1.0, 1).unwrap();
        let mk = MisoKernel::independent(k, vec![]).unwrap();
        PosteriorState::prior(mk, MeanFunction::constant(0.0))
            .update(Observation::new(0, vec![x], y, 0.0))
            .unwrap()
    }

    #[test]
    fn prior_recommendation_is_first_grid_point() {
        let dom = BoxDomain::cube(0.0, 1.0, 1).unwrap();
        let k = BaseKernel::squared_exponential(0.2, 1.0, 1).unwrap();
        let s = PosteriorState::prior(MisoKernel::independent(k, vec![]).unwrap(), MeanFunction::constant(3.0));
        let r = Recommender::latin_hypercube(50, &dom, 9, 5).unwrap();
        let (x, mu) = r.recommend(&s, &dom);
        assert_eq!(x, r.grid()[0]);
        assert_eq!(mu, 3.0);
    }

    #[test]
    fn recommendation_finds_single_peak() {
        let dom = BoxDomain::cube(0.0, 1.0, 1).unwrap();
        let s = one_obs_state(0.4137, 2.0, 0.05);
        let r = Recommender::latin_hypercube(1000, &dom, 1, 5).unwrap();
        let (x, mu) = r.recommend(&s, &dom);
        assert!((x[0] - 0.4137).abs() < 1e-3, "{x:?}");
        assert!(r.grid().iter().all(|g| mu >= s.mean_at(0, g)));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let recs = vec![
            RunRecord {
                iter: 0,
                source: 1,
                x: vec![0.1, -1.0 / 3.0],
                y: -12.345678901234567,
                cost: 1.0,
                cum_cost: 5005.0,
                rec_x: vec![0.99999999, 1.0000001],
                rec_mu: -1e-17,
                true_value: Some(-0.000123),
            },
            RunRecord {
                iter: 1,
                source: 0,
                x: vec![2.0, 0.0],
                y: 1e300,
                cost: 1000.0,
                cum_cost: 6005.0,
                rec_x: vec![0.5, 0.5],
                rec_mu: 3.0,
                true_value: None,
            },
        ];
        let mut buf = Vec::new();
        write_records(&recs, 2, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iter,source,x_0,x_1,y,cost,cum_cost,rec_x_0,rec_x_1,rec_mu,true_value\n"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn initial_size_rounds_up() {
        let o = RunOptions::default();
        assert_eq!(o.initial_size(2), 5);
        assert_eq!(o.initial_size(8), 20);
        assert_eq!(o.initial_size(1), 3);
        assert_eq!(o.candidate_size(8), 400);
    }
}
