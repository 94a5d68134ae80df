//! Multi-information-source Bayesian optimization with a cost-sensitive
//! knowledge gradient.
//!
//! A single Gaussian process models every information source jointly over
//! `(source, design)` pairs: source `l` is the truth `f(0, x)` plus an independent
//! discrepancy. Each step queries the pair with the largest expected gain in the
//! best truth-posterior mean per unit cost.
//!
//! ```no_run
//! use misokg::{bench, run, Budget, RunOptions};
//!
//! let problem = bench::rosenbrock_miso(bench::RosenbrockConfig::Lam).unwrap();
//! let opts = RunOptions { budget: Budget::Iterations(10), ..Default::default() };
//! let out = run(&problem, &opts, 0).unwrap();
//! println!("{:?}", out.log.final_recommendation);
//! ```

pub mod acquisition;
pub mod aggregate;
pub mod bench;
pub mod config;
pub mod cost;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod hyper;
pub mod kernel;
mod linalg;
pub mod normal;
pub mod optimize;
pub mod rng;
pub mod runner;
pub mod space;

pub use acquisition::{ckg, h, next_sample, AcquisitionOptions, AcquisitionResult, DiscreteCandidateSet, Strategy};
pub use bench::BenchmarkProblem;
pub use config::RunConfig;
pub use cost::CostNoiseModel;
pub use error::{MisoError, Result};
pub use gp::{Observation, PosteriorState};
pub use kernel::{BaseKernel, KernelFamily, MeanFunction, MisoKernel};
pub use runner::{run, Budget, RunOptions, RunOutput, RunRecord};
pub use space::{AugmentedPoint, BoxDomain};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/model.md")]
    pub struct Model;
    #[doc = include_str!("../../../book/src/knowledge-gradient.md")]
    pub struct KnowledgeGradient;
    #[doc = include_str!("../../../book/src/hyperparameters.md")]
    pub struct Hyperparameters;
    #[doc = include_str!("../../../book/src/running.md")]
    pub struct Running;
    #[doc = include_str!("../../../book/src/problems.md")]
    pub struct Problems;
}
