//! MAP estimation of kernel hyperparameters from an initial design.
//!
//! Every source is evaluated on the same initial designs. The truth kernel is
//! fitted to the `IS_0` values; the discrepancy kernel of source `l` is fitted to
//! the differences `IS_l(x) - IS_0(x)`. Each block gets normal priors on its
//! natural-scale hyperparameters:
//!
//! * length scale `i`: mean = width of the box along axis `i`;
//! * truth signal variance: mean = sample variance of the `IS_0` values minus
//!   their average noise variance;
//! * discrepancy signal variance: mean = sample variance of the differences
//!   minus the average noise of `IS_l` and of `IS_0`;
//!
//! and every prior has standard deviation `mean / 2`. Blocks are fitted
//! independently by multistart bounded ascent in log space.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::latin_hypercube;
use crate::cost::CostNoiseModel;
use crate::error::{invalid, Result};
use crate::gp::DEFAULT_JITTER;
use crate::kernel::{BaseKernel, KernelFamily, MeanFunction, MisoKernel};
use crate::optimize::{maximize_in_box, AscentOptions};
use crate::space::BoxDomain;

/// Floor for signal-variance prior means whose recipe goes non-positive.
pub const SIGNAL_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    /// `N(mean, (mean / 2)^2)`.
    pub fn half_width(mean: f64) -> Self {
        NormalPrior { mean, sd: mean / 2.0 }
    }

    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }

    pub fn log_density(&self, v: f64) -> f64 {
        let t = (v - self.mean) / self.sd;
        -0.5 * t * t - self.sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPrior {
    pub length_scales: Vec<NormalPrior>,
    pub signal_variance: NormalPrior,
}

impl BlockPrior {
    pub fn log_density(&self, length_scales: &[f64], signal_variance: f64) -> f64 {
        self.length_scales
            .iter()
            .zip(length_scales)
            .map(|(p, v)| p.log_density(*v))
            .sum::<f64>()
            + self.signal_variance.log_density(signal_variance)
    }
}

/// Priors for the truth block and one block per auxiliary source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperPrior {
    pub truth: BlockPrior,
    pub discrepancy: Vec<BlockPrior>,
}

/// Values of every source on a shared initial design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceDataset {
    designs: Vec<Vec<f64>>,
    /// `values[l][i]` = `IS_l(designs[i])`.
    values: Vec<Vec<f64>>,
}

impl DifferenceDataset {
    pub fn new(designs: Vec<Vec<f64>>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return invalid("dataset needs values for at least the truth source");
        }
        if let Some((l, v)) = values.iter().enumerate().find(|(_, v)| v.len() != designs.len()) {
            return invalid(format!(
                "source {l} has {} values for {} designs; all sources must share the initial design",
                v.len(),
                designs.len()
            ));
        }
        Ok(DifferenceDataset { designs, values })
    }

    pub fn designs(&self) -> &[Vec<f64>] {
        &self.designs
    }

    pub fn truth_values(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn source_values(&self, source: usize) -> &[f64] {
        &self.values[source]
    }

    pub fn num_sources(&self) -> usize {
        self.values.len()
    }

    /// `IS_l(x) - IS_0(x)` over the design, for `l >= 1`.
    pub fn deltas(&self, source: usize) -> Vec<f64> {
        self.values[source]
            .iter()
            .zip(&self.values[0])
            .map(|(a, b)| a - b)
            .collect()
    }
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn mean_noise(designs: &[Vec<f64>], costs: &CostNoiseModel, source: usize) -> f64 {
    designs.iter().map(|x| costs.noise(source, x)).sum::<f64>() / designs.len() as f64
}

pub fn build_priors(data: &DifferenceDataset, domain: &BoxDomain, costs: &CostNoiseModel) -> Result<HyperPrior> {
    if data.designs.len() < 2 {
        return invalid(format!(
            "prior construction needs at least 2 initial designs, got {}",
            data.designs.len()
        ));
    }
    if costs.num_sources() != data.num_sources() {
        return invalid("noise model and dataset disagree on the number of sources");
    }
    let length_scales: Vec<NormalPrior> = domain.widths().into_iter().map(NormalPrior::half_width).collect();
    let noise0 = mean_noise(&data.designs, costs, 0);
    let sv0 = (sample_variance(data.truth_values()) - noise0).max(SIGNAL_VARIANCE_FLOOR);
    let truth = BlockPrior {
        length_scales: length_scales.clone(),
        signal_variance: NormalPrior::half_width(sv0),
    };
    let discrepancy = (1..data.num_sources())
        .map(|l| {
            let noise_l = mean_noise(&data.designs, costs, l);
            let sv = (sample_variance(&data.deltas(l)) - noise_l - noise0).max(SIGNAL_VARIANCE_FLOOR);
            BlockPrior {
                length_scales: length_scales.clone(),
                signal_variance: NormalPrior::half_width(sv),
            }
        })
        .collect();
    Ok(HyperPrior { truth, discrepancy })
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub family: KernelFamily,
    /// `false` drops the prior term (maximum likelihood).
    pub use_priors: bool,
    pub restarts: usize,
    pub seed: u64,
    pub ascent: AscentOptions,
    /// Length scales are searched in `[lo * width, hi * width]`.
    pub length_scale_range: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            family: KernelFamily::SquaredExponential,
            use_priors: true,
            restarts: 5,
            seed: 0,
            ascent: AscentOptions {
                max_iters: 200,
                x_tol: 1e-7,
                fd_rel_step: 1e-6,
            },
            length_scale_range: (1e-3, 10.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFit {
    pub kernel: BaseKernel,
    /// Log marginal likelihood (+ log prior) at the returned point.
    pub objective: f64,
    /// Objective at each restart's starting point.
    pub start_objectives: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kernel: MisoKernel,
    pub mean: MeanFunction,
    pub truth: BlockFit,
    pub discrepancy: Vec<BlockFit>,
    /// Set when some block never met the convergence test.
    pub warning: bool,
}

/// Log marginal likelihood of `y ~ N(mean, K + diag(noise))`; `-inf` if not PD.
pub fn log_marginal_likelihood(kernel: &BaseKernel, x: &[Vec<f64>], y: &[f64], noise: &[f64], mean: f64) -> f64 {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval_unchecked(&x[i], &x[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += if noise[i] == 0.0 { DEFAULT_JITTER } else { noise[i] };
    }
    let Some(chol) = k.cholesky() else {
        return f64::NEG_INFINITY;
    };
    let r = DVector::from_iterator(n, y.iter().map(|v| v - mean));
    let alpha = chol.solve(&r);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    -0.5 * r.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Fits one block: kernel hyperparameters for data `y` with known noise and mean.
pub fn fit_block(
    x: &[Vec<f64>],
    y: &[f64],
    noise: &[f64],
    mean: f64,
    prior: &BlockPrior,
    domain: &BoxDomain,
    opts: &FitOptions,
) -> Result<BlockFit> {
    let d = domain.dim();
    if x.len() != y.len() || y.len() != noise.len() {
        return invalid("fit_block needs matching designs, values and noise");
    }
    if prior.length_scales.len() != d {
        return invalid("prior has the wrong number of length scales");
    }
    let family = opts.family;
    let objective = |theta: &[f64]| {
        let kernel = BaseKernel::from_log(family, theta[..d].to_vec(), theta[d]);
        let mut v = log_marginal_likelihood(&kernel, x, y, noise, mean);
        if opts.use_priors {
            v += prior.log_density(&kernel.length_scales(), kernel.signal_variance());
        }
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let (lo, hi) = opts.length_scale_range;
    let widths = domain.widths();
    let sv_scale = if y.len() > 1 { sample_variance(y) } else { 0.0 }
        .max(prior.signal_variance.mean)
        .max(SIGNAL_VARIANCE_FLOOR);
    let mut lower: Vec<f64> = widths.iter().map(|w| (lo * w).ln()).collect();
    let mut upper: Vec<f64> = widths.iter().map(|w| (hi * w).ln()).collect();
    lower.push((sv_scale * 1e-6).ln());
    upper.push((sv_scale * 1e3).ln());
    let search = BoxDomain::new(lower, upper)?;

    let mut prior_start: Vec<f64> = prior.length_scales.iter().map(|p| p.mean.ln()).collect();
    prior_start.push(prior.signal_variance.mean.ln());
    search.clamp(&mut prior_start);
    let mut starts = vec![prior_start];
    if opts.restarts > 1 {
        starts.extend(latin_hypercube(opts.restarts - 1, &search, opts.seed)?);
    }

    let runs: Vec<_> = starts
        .iter()
        .map(|s| maximize_in_box(objective, s, &search, &opts.ascent))
        .collect();
    let start_objectives = runs.iter().map(|r| r.start_value).collect();
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.value.is_finite())
        .max_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(j.cmp(i)))
        .map(|(_, r)| r.clone());
    let Some(best) = best else {
        return Err(crate::error::MisoError::Conditioning(
            "hyperparameter objective is not finite at any restart".into(),
        ));
    };
    Ok(BlockFit {
        kernel: BaseKernel::from_log(family, best.x[..d].to_vec(), best.x[d]),
        objective: best.value,
        start_objectives,
        converged: runs.iter().any(|r| r.converged),
    })
}

/// Fits the truth block and every discrepancy block; the prior mean constant is the
/// average of the `IS_0` values.
pub fn fit_map(
    data: &DifferenceDataset,
    priors: &HyperPrior,
    domain: &BoxDomain,
    costs: &CostNoiseModel,
    opts: &FitOptions,
) -> Result<FitResult> {
    let designs = data.designs();
    if priors.discrepancy.len() + 1 != data.num_sources() {
        return invalid("priors and dataset disagree on the number of sources");
    }
    let noise0: Vec<f64> = designs.iter().map(|x| costs.noise(0, x)).collect();
    let y0 = data.truth_values();
    let mean0 = y0.iter().sum::<f64>() / y0.len() as f64;

    let blocks: Vec<Result<BlockFit>> = (0..data.num_sources())
        .into_par_iter()
        .map(|l| {
            let block_opts = FitOptions {
                seed: opts.seed.wrapping_add(l as u64 * 7919),
                ..opts.clone()
            };
            if l == 0 {
                fit_block(designs, y0, &noise0, mean0, &priors.truth, domain, &block_opts)
            } else {
                let noise: Vec<f64> = designs
                    .iter()
                    .zip(&noise0)
                    .map(|(x, n0)| costs.noise(l, x) + n0)
                    .collect();
                fit_block(designs, &data.deltas(l), &noise, 0.0, &priors.discrepancy[l - 1], domain, &block_opts)
            }
        })
        .collect();
    let mut blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    let truth = blocks.remove(0);
    let warning = !truth.converged || blocks.iter().any(|b| !b.converged);
    let kernel = MisoKernel::independent(
        truth.kernel.clone(),
        blocks.iter().map(|b| Some(b.kernel.clone())).collect(),
    )?;
    Ok(FitResult {
        kernel,
        mean: MeanFunction::constant(mean0),
        truth,
        discrepancy: blocks,
        warning,
    })
}
