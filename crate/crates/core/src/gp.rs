//! Exact Gaussian process posterior over augmented points.
//!
//! The posterior keeps the Cholesky factor of `K + Lambda` and extends it by one
//! row per observation, so conditioning on a new sample costs `O(n^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, MisoError, Result};
use crate::kernel::{MeanFunction, MisoKernel};
use crate::linalg::{dot, PackedLower};
use crate::space::AugmentedPoint;

/// Jitter substituted for an exactly-zero noise variance.
pub const DEFAULT_JITTER: f64 = 1e-6;

/// A noisy sample `y ~ N(f(source, x), noise_var)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub source: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub noise_var: f64,
}

impl Observation {
    pub fn new(source: usize, x: Vec<f64>, y: f64, noise_var: f64) -> Self {
        Observation {
            source,
            x,
            y,
            noise_var,
        }
    }

    pub fn point(&self) -> AugmentedPoint {
        AugmentedPoint::new(self.source, self.x.clone())
    }
}

/// What gets written to run logs: enough to rebuild the posterior, no factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub kernel: MisoKernel,
    pub mean: MeanFunction,
    pub jitter: f64,
    pub observations: Vec<Observation>,
}

#[derive(Clone, Debug)]
pub struct PosteriorState {
    kernel: MisoKernel,
    mean: MeanFunction,
    jitter: f64,
    observations: Vec<Observation>,
    chol: PackedLower,
    /// `L^{-1} (y - mu)`
    whitened: Vec<f64>,
    /// `(K + Lambda)^{-1} (y - mu)`
    alpha: Vec<f64>,
}

impl PosteriorState {
    /// Prior with no observations.
    pub fn prior(kernel: MisoKernel, mean: MeanFunction) -> Self {
        PosteriorState {
            kernel,
            mean,
            jitter: DEFAULT_JITTER,
            observations: Vec::new(),
            chol: PackedLower::new(),
            whitened: Vec::new(),
            alpha: Vec::new(),
        }
    }

    /// Replaces the jitter used for zero-noise observations. Only valid before conditioning.
    pub fn with_jitter(mut self, jitter: f64) -> Self {
        assert!(self.observations.is_empty(), "jitter must be set on an empty posterior");
        assert!(jitter >= 0.0 && jitter.is_finite());
        self.jitter = jitter;
        self
    }

    /// Conditions the prior on all `observations` with a single dense factorization.
    pub fn from_observations(
        kernel: MisoKernel,
        mean: MeanFunction,
        jitter: f64,
        observations: Vec<Observation>,
    ) -> Result<Self> {
        let mut state = Self::prior(kernel, mean).with_jitter(jitter);
        if observations.is_empty() {
            return Ok(state);
        }
        for o in &observations {
            state.validate(o)?;
        }
        let points: Vec<AugmentedPoint> = observations.iter().map(Observation::point).collect();
        let noise: Vec<f64> = observations
            .iter()
            .map(|o| state.effective_noise(o.noise_var))
            .collect();
        let gram = state.kernel.gram(&points, &noise)?;
        let chol = gram.cholesky().ok_or_else(|| {
            MisoError::Conditioning(format!(
                "Gram matrix of {} observations is not positive definite",
                observations.len()
            ))
        })?;
        state.chol = PackedLower::from_dense(&chol.l());
        let mut whitened: Vec<f64> = observations
            .iter()
            .map(|o| o.y - state.mean.eval(&o.point()))
            .collect();
        state.chol.forward_solve(&mut whitened);
        state.whitened = whitened;
        state.observations = observations;
        state.refresh_alpha();
        Ok(state)
    }

    pub fn from_snapshot(s: PosteriorSnapshot) -> Result<Self> {
        Self::from_observations(s.kernel, s.mean, s.jitter, s.observations)
    }

    pub fn snapshot(&self) -> PosteriorSnapshot {
        PosteriorSnapshot {
            kernel: self.kernel.clone(),
            mean: self.mean,
            jitter: self.jitter,
            observations: self.observations.clone(),
        }
    }

    pub fn kernel(&self) -> &MisoKernel {
        &self.kernel
    }

    pub fn mean_function(&self) -> &MeanFunction {
        &self.mean
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Noise variance actually placed on the Gram diagonal.
    #[inline]
    pub fn effective_noise(&self, noise_var: f64) -> f64 {
        if noise_var == 0.0 {
            self.jitter
        } else {
            noise_var
        }
    }

    /// Same hyperparameters, no data.
    pub fn without_observations(&self) -> Self {
        Self::prior(self.kernel.clone(), self.mean).with_jitter(self.jitter)
    }

    fn validate(&self, o: &Observation) -> Result<()> {
        self.kernel.check_point(&o.point())?;
        if !(o.noise_var.is_finite() && o.noise_var >= 0.0) {
            return invalid(format!("noise variance must be finite and >= 0, got {}", o.noise_var));
        }
        if !o.y.is_finite() {
            return invalid(format!("observed value must be finite, got {}", o.y));
        }
        Ok(())
    }

    fn refresh_alpha(&mut self) {
        let mut alpha = self.whitened.clone();
        self.chol.backward_solve_transposed(&mut alpha);
        self.alpha = alpha;
    }

    /// `k(X, p)` against every stored observation.
    fn cross_cov(&self, source: usize, x: &[f64]) -> Vec<f64> {
        self.observations
            .iter()
            .map(|o| self.kernel.cov(o.source, &o.x, source, x))
            .collect()
    }

    /// `L^{-1} k(X, p)`.
    pub(crate) fn whiten(&self, source: usize, x: &[f64]) -> Vec<f64> {
        let mut w = self.cross_cov(source, x);
        self.chol.forward_solve(&mut w);
        w
    }

    /// Conditions on one more observation in place (rank-one extension of the factor).
    pub fn observe(&mut self, obs: Observation) -> Result<()> {
        self.validate(&obs)?;
        let w = self.whiten(obs.source, &obs.x);
        let prior_var = self.kernel.cov(obs.source, &obs.x, obs.source, &obs.x);
        let d2 = prior_var + self.effective_noise(obs.noise_var) - dot(&w, &w);
        if !(d2.is_finite() && d2 > 0.0) {
            return Err(MisoError::Conditioning(format!(
                "observation #{} (source {}, x = {:?}) leaves a non-positive pivot {d2:e}",
                self.observations.len(),
                obs.source,
                obs.x
            )));
        }
        let diag = d2.sqrt();
        let resid = obs.y - self.mean.eval(&obs.point());
        let z = (resid - dot(&w, &self.whitened)) / diag;
        self.chol.push_row(&w, diag);
        self.whitened.push(z);
        self.observations.push(obs);
        self.refresh_alpha();
        Ok(())
    }

    /// Returns the posterior after one more observation.
    pub fn update(&self, obs: Observation) -> Result<Self> {
        let mut next = self.clone();
        next.observe(obs)?;
        Ok(next)
    }

    /// Posterior mean `mu^n(l, x)`. Panics on an out-of-range source.
    pub fn posterior_mean(&self, p: &AugmentedPoint) -> f64 {
        self.mean_at(p.source, &p.x)
    }

    #[inline]
    pub(crate) fn mean_at(&self, source: usize, x: &[f64]) -> f64 {
        assert!(source < self.kernel.num_sources(), "source {source} out of range");
        let mut m = self.mean.constant;
        for (o, a) in self.observations.iter().zip(&self.alpha) {
            m += a * self.kernel.cov(o.source, &o.x, source, x);
        }
        m
    }

    /// Posterior covariance between `f(p)` and `f(q)`.
    pub fn posterior_cov(&self, p: &AugmentedPoint, q: &AugmentedPoint) -> f64 {
        let prior = self.kernel.cov(p.source, &p.x, q.source, &q.x);
        if self.observations.is_empty() {
            return prior;
        }
        let wp = self.whiten(p.source, &p.x);
        let c = if p == q {
            prior - dot(&wp, &wp)
        } else {
            prior - dot(&wp, &self.whiten(q.source, &q.x))
        };
        if p == q {
            c.max(0.0)
        } else {
            c
        }
    }

    /// Posterior variance, clamped at zero.
    pub fn posterior_var(&self, p: &AugmentedPoint) -> f64 {
        self.posterior_cov(p, p)
    }

    /// One-step standard deviations of the posterior means at `targets` when sampling
    /// `candidate` with noise variance `noise_var`:
    /// `Cov_n(f(t_i), f(c)) / sqrt(noise_var + Var_n(f(c)))`.
    pub fn sigma_tilde(
        &self,
        candidate: &AugmentedPoint,
        noise_var: f64,
        targets: &[AugmentedPoint],
    ) -> Result<Vec<f64>> {
        if targets.is_empty() {
            return invalid("sigma_tilde needs at least one target");
        }
        self.kernel.check_point(candidate)?;
        for t in targets {
            self.kernel.check_point(t)?;
        }
        let cache = TargetCache::new(self, targets);
        cache.sigma_tilde(self, candidate.source, &candidate.x, noise_var)
    }
}

/// Precomputed posterior quantities for a fixed target set, shared across many candidates.
#[derive(Clone, Debug)]
pub struct TargetCache {
    targets: Vec<AugmentedPoint>,
    means: Vec<f64>,
    /// Row `j` is `L^{-1} k(X, t_j)`.
    whitened: Vec<Vec<f64>>,
}

impl TargetCache {
    pub fn new(state: &PosteriorState, targets: &[AugmentedPoint]) -> Self {
        let means = targets
            .iter()
            .map(|t| state.mean_at(t.source, &t.x))
            .collect();
        let whitened = targets.iter().map(|t| state.whiten(t.source, &t.x)).collect();
        TargetCache {
            targets: targets.to_vec(),
            means,
            whitened,
        }
    }

    pub fn targets(&self) -> &[AugmentedPoint] {
        &self.targets
    }

    /// Posterior means at the targets.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sigma_tilde(
        &self,
        state: &PosteriorState,
        source: usize,
        x: &[f64],
        noise_var: f64,
    ) -> Result<Vec<f64>> {
        let wc = state.whiten(source, x);
        let var = (state.kernel.cov(source, x, source, x) - dot(&wc, &wc)).max(0.0);
        let denom = noise_var + var;
        if !(denom.is_finite() && denom > 0.0) {
            return Err(MisoError::Conditioning(format!(
                "predictive variance {denom:e} at source {source}, x = {x:?} is not positive"
            )));
        }
        let scale = 1.0 / denom.sqrt();
        Ok(self
            .targets
            .iter()
            .zip(&self.whitened)
            .map(|(t, wt)| (state.kernel.cov(t.source, &t.x, source, x) - dot(wt, &wc)) * scale)
            .collect())
    }
}
