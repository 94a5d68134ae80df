//! Experiment configuration files.
//!
//! ```toml
//! [problem]
//! name = "rosenbrock_lam"        # or: file = "my_problem.toml"
//!
//! [kernel]
//! family = "squared_exponential" # or "matern52"
//!
//! [acquisition]
//! strategy = "multistart_gradient"
//!
//! [budget]
//! mode = "iterations"            # or "total_cost"
//! limit = 10
//!
//! [run]
//! replications = 20
//! seed = 0
//! output_dir = "results/rosenbrock_lam"
//! ```
//!
//! Every other field has a default. Relative paths resolve against the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::Strategy;
use crate::bench::{self, BenchmarkProblem, ProblemSpec};
use crate::cost::{estimate_constant_noise, CostNoiseModel, DesignFn};
use crate::error::{MisoError, Result};
use crate::kernel::{BaseKernel, GroupKernels, KernelFamily, MeanFunction, MisoKernel};
use crate::optimize::AscentOptions;
use crate::rng::source_stream;
use crate::runner::{Budget, Model, RunOptions};

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(MisoError::Config(msg.into()))
}

/// A noise setting: a constant variance or `"estimate"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSetting {
    Value(f64),
    Keyword(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Built-in problem name.
    pub name: Option<String>,
    /// Declarative problem file; exclusive with `name`.
    pub file: Option<PathBuf>,
    /// Dimension for problems that take one.
    pub dim: Option<usize>,
    /// Instance seed for seeded problems.
    #[serde(default)]
    pub instance_seed: u64,
    /// Per-source constant costs replacing the problem's own.
    pub costs: Option<Vec<f64>>,
    /// Per-source noise: a variance or `"estimate"` (sample variance of repeated queries).
    pub noise: Option<Vec<NoiseSetting>>,
    #[serde(default = "default_noise_repeats")]
    pub noise_repeats: usize,
}

fn default_noise_repeats() -> usize {
    10
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            name: None,
            file: None,
            dim: None,
            instance_seed: 0,
            costs: None,
            noise: None,
            noise_repeats: default_noise_repeats(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub family: KernelFamily,
    /// `false` switches to maximum likelihood.
    pub priors: bool,
    pub fit_restarts: usize,
    /// Refit every `k` steps; 0 fits once.
    pub refit_every: usize,
    /// Fixed hyperparameters; skips fitting entirely.
    pub fixed: Option<FixedKernel>,
}

/// One kernel block in natural units. A zero signal variance is the zero kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    /// Group of each source, `0..=M`; the entry for source 0 is ignored.
    pub map: Vec<usize>,
    pub kernels: Vec<BlockConfig>,
}

/// ```toml
/// [kernel.fixed]
/// mean = 0.0
/// truth = { length_scales = [2.0, 2.0], signal_variance = 100.0 }
/// discrepancy = [{ length_scales = [1.0, 1.0], signal_variance = 0.0 }]
/// fidelity = [1.0]                      # optional
/// groups = { map = [0, 0], kernels = [...] } # optional
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedKernel {
    #[serde(default)]
    pub mean: f64,
    pub truth: BlockConfig,
    pub discrepancy: Vec<BlockConfig>,
    pub fidelity: Option<Vec<f64>>,
    pub groups: Option<GroupConfig>,
}

impl FixedKernel {
    pub fn build(&self, family: KernelFamily) -> Result<Model> {
        let block = |b: &BlockConfig, what: String| -> Result<Option<BaseKernel>> {
            if b.signal_variance == 0.0 {
                return Ok(None);
            }
            BaseKernel::new(family, b.length_scales.clone(), b.signal_variance)
                .map(Some)
                .map_err(|e| MisoError::Config(format!("{what}: {e}")))
        };
        let truth = block(&self.truth, "kernel.fixed.truth".into())?;
        let discrepancy = self
            .discrepancy
            .iter()
            .enumerate()
            .map(|(i, b)| block(b, format!("kernel.fixed.discrepancy[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let groups = match &self.groups {
            Some(g) => Some(GroupKernels {
                map: g.map.clone(),
                kernels: g
                    .kernels
                    .iter()
                    .enumerate()
                    .map(|(i, b)| block(b, format!("kernel.fixed.groups.kernels[{i}]")))
                    .collect::<Result<Vec<_>>>()?,
            }),
            None => None,
        };
        let kernel = MisoKernel::build(truth, discrepancy, self.fidelity.clone(), groups)
            .map_err(|e| MisoError::Config(format!("kernel.fixed: {e}")))?;
        Ok(Model {
            kernel,
            mean: MeanFunction::constant(self.mean),
        })
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            family: KernelFamily::SquaredExponential,
            priors: true,
            fit_restarts: 5,
            refit_every: 0,
            fixed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    pub strategy: Strategy,
    /// `|A|`; defaults to `50 * d`.
    pub candidates: Option<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub x_tol: f64,
    pub fd_rel_step: f64,
    pub h_workers: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        let a = AscentOptions::default();
        AcquisitionConfig {
            strategy: Strategy::MultistartGradient,
            candidates: None,
            restarts: 10,
            max_iters: a.max_iters,
            x_tol: a.x_tol,
            fd_rel_step: a.fd_rel_step,
            h_workers: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    Iterations,
    TotalCost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub mode: BudgetMode,
    pub limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub replications: usize,
    /// Replication `r` uses seed `seed + r`.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub initial_per_dim: f64,
    pub initial_points: Option<usize>,
    pub recommend_grid_per_dim: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            replications: 1,
            seed: 0,
            output_dir: PathBuf::from("results"),
            initial_per_dim: 2.5,
            initial_points: None,
            recommend_grid_per_dim: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    pub budget: BudgetConfig,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| MisoError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads and validates a config; relative paths become relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MisoError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            MisoError::Config(m) => MisoError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.run.output_dir.is_relative() {
            cfg.run.output_dir = base.join(&cfg.run.output_dir);
        }
        if let Some(f) = &cfg.problem.file {
            if f.is_relative() {
                cfg.problem.file = Some(base.join(f));
            }
        }
        if let Some(f) = &cfg.problem.file {
            if !f.is_file() {
                return config_err(format!("problem.file: {} does not exist", f.display()));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.problem.name, &self.problem.file) {
            (None, None) => return config_err("problem: set either `name` or `file`"),
            (Some(_), Some(_)) => return config_err("problem: `name` and `file` are mutually exclusive"),
            _ => {}
        }
        if self.run.replications < 1 {
            return config_err("run.replications must be >= 1");
        }
        if !(self.budget.limit.is_finite() && self.budget.limit > 0.0) {
            return config_err(format!("budget.limit must be > 0, got {}", self.budget.limit));
        }
        if self.budget.mode == BudgetMode::Iterations && self.budget.limit.fract() != 0.0 {
            return config_err(format!(
                "budget.limit must be a whole number of iterations, got {}",
                self.budget.limit
            ));
        }
        if !(self.run.initial_per_dim > 0.0) {
            return config_err("run.initial_per_dim must be > 0");
        }
        if self.acquisition.candidates.is_some_and(|n| n < 2) {
            return config_err("acquisition.candidates must be >= 2");
        }
        if self.kernel.fixed.is_some() && self.kernel.refit_every > 0 {
            return config_err("kernel.refit_every must be 0 with kernel.fixed");
        }
        if let Some(f) = &self.kernel.fixed {
            f.build(self.kernel.family)?;
        }
        if self.acquisition.h_workers < 1 {
            return config_err("acquisition.h_workers must be >= 1");
        }
        if let Some(noise) = &self.problem.noise {
            for (l, n) in noise.iter().enumerate() {
                match n {
                    NoiseSetting::Value(v) if !(v.is_finite() && *v >= 0.0) => {
                        return config_err(format!("problem.noise[{l}] must be >= 0, got {v}"));
                    }
                    NoiseSetting::Keyword(k) if k != "estimate" => {
                        return config_err(format!("problem.noise[{l}]: expected a number or \"estimate\", got \"{k}\""));
                    }
                    _ => {}
                }
            }
            if noise.iter().any(|n| matches!(n, NoiseSetting::Keyword(_))) && self.problem.noise_repeats < 2 {
                return config_err("problem.noise_repeats must be >= 2 to estimate noise");
            }
        }
        Ok(())
    }

    pub fn budget(&self) -> Budget {
        match self.budget.mode {
            BudgetMode::Iterations => Budget::Iterations(self.budget.limit as usize),
            BudgetMode::TotalCost => Budget::TotalCost(self.budget.limit),
        }
    }

    pub fn run_options(&self) -> Result<RunOptions> {
        let model = match &self.kernel.fixed {
            Some(f) => Some(f.build(self.kernel.family)?),
            None => None,
        };
        Ok(RunOptions {
            family: self.kernel.family,
            candidates: self.acquisition.candidates,
            strategy: self.acquisition.strategy,
            restarts: self.acquisition.restarts,
            ascent: AscentOptions {
                max_iters: self.acquisition.max_iters,
                x_tol: self.acquisition.x_tol,
                fd_rel_step: self.acquisition.fd_rel_step,
            },
            h_workers: self.acquisition.h_workers,
            budget: self.budget(),
            initial_per_dim: self.run.initial_per_dim,
            initial_points: self.run.initial_points,
            refit_every: self.kernel.refit_every,
            use_priors: self.kernel.priors,
            fit_restarts: self.kernel.fit_restarts,
            recommend_grid_per_dim: self.run.recommend_grid_per_dim,
            recommend_starts: 5,
            model,
        })
    }

    /// Builds the problem, applying cost overrides and noise estimation.
    pub fn build_problem(&self) -> Result<BenchmarkProblem> {
        let p = &self.problem;
        let problem = match (&p.name, &p.file) {
            (Some(name), _) => bench::by_name(name, p.dim, p.instance_seed)
                .map_err(|e| MisoError::Config(format!("problem.name: {e}")))?,
            (None, Some(file)) => ProblemSpec::load(file)?.build()?,
            (None, None) => return config_err("problem: set either `name` or `file`"),
        };
        let m = problem.num_sources();
        let base = problem.costs();
        let costs: Vec<DesignFn> = match &p.costs {
            Some(c) if c.len() != m => return config_err(format!("problem.costs needs {m} entries, got {}", c.len())),
            Some(c) => c.iter().map(|v| DesignFn::Constant(*v)).collect(),
            None => base.costs().to_vec(),
        };
        let mut noises = base.noises().to_vec();
        if let Some(n) = &p.noise {
            if n.len() != m {
                return config_err(format!("problem.noise needs {m} entries, got {}", n.len()));
            }
            let probe = problem.domain().center();
            for (l, setting) in n.iter().enumerate() {
                noises[l] = match setting {
                    NoiseSetting::Value(v) => DesignFn::Constant(*v),
                    NoiseSetting::Keyword(_) => {
                        // streams far from those any run uses
                        let repeats: Vec<f64> = (0..p.noise_repeats as u64)
                            .map(|i| problem.query(l, &probe, &mut source_stream(p.instance_seed ^ 0x4E01_5E, l, i)))
                            .collect();
                        DesignFn::Constant(estimate_constant_noise(&repeats)?)
                    }
                };
            }
        }
        let model = CostNoiseModel::new(costs, noises).map_err(|e| MisoError::Config(format!("problem: {e}")))?;
        problem.with_costs(model)
    }
}
