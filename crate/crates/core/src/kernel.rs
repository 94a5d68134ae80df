//! Covariance kernels over designs and over the augmented space `[M]_0 x D`.
//!
//! The augmented kernel models every information source as the truth plus a
//! discrepancy drawn from its own process:
//!
//! ```text
//! f(l, x) = f(0, x) + eps_{k(l)}(x) + delta_l(x)
//! Cov(f(l,x), f(m,x')) = S0(x,x') + [k(l) = k(m)] Sk(x,x') + [l = m] a_l Sl(x,x')
//! ```
//!
//! The group term is optional (correlated discrepancies); without it the
//! kernel is the independent-discrepancy model. Source 0 never carries a
//! discrepancy or group term, so `Cov(f(0,x), f(0,x')) = S0(x,x')`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, MisoError, Result};
use crate::space::AugmentedPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    SquaredExponential,
    Matern52,
}

impl std::str::FromStr for KernelFamily {
    type Err = MisoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "squaredexponential" | "se" | "rbf" => Ok(KernelFamily::SquaredExponential),
            "matern52" | "matern" => Ok(KernelFamily::Matern52),
            other => invalid(format!("unknown kernel family `{other}`")),
        }
    }
}

/// Natural-unit description of a [`BaseKernel`], used for (de)serialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseKernelSpec {
    pub family: KernelFamily,
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
}

/// Stationary kernel on designs with per-dimension length scales.
///
/// Hyperparameters live in log space; the natural values are cached for evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BaseKernelSpec", into = "BaseKernelSpec")]
pub struct BaseKernel {
    family: KernelFamily,
    log_length_scales: Vec<f64>,
    log_signal_variance: f64,
    inv_length_scales: Vec<f64>,
    signal_variance: f64,
}

impl BaseKernel {
    pub fn new(family: KernelFamily, length_scales: Vec<f64>, signal_variance: f64) -> Result<Self> {
        if length_scales.is_empty() {
            return invalid("kernel needs at least one length scale");
        }
        if let Some(bad) = length_scales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return invalid(format!("length scales must be positive and finite, got {bad}"));
        }
        if !(signal_variance.is_finite() && signal_variance > 0.0) {
            return invalid(format!(
                "signal variance must be positive and finite, got {signal_variance}"
            ));
        }
        let log_ls = length_scales.iter().map(|l| l.ln()).collect();
        let mut k = Self::from_log(family, log_ls, signal_variance.ln());
        // keep the caller's exact values rather than exp(ln(v))
        k.inv_length_scales = length_scales.iter().map(|l| 1.0 / l).collect();
        k.signal_variance = signal_variance;
        Ok(k)
    }

    /// Isotropic squared-exponential kernel.
    pub fn squared_exponential(length_scale: f64, signal_variance: f64, d: usize) -> Result<Self> {
        Self::new(KernelFamily::SquaredExponential, vec![length_scale; d], signal_variance)
    }

    /// Builds a kernel directly from log-hyperparameters. Any finite values are valid.
    pub fn from_log(family: KernelFamily, log_length_scales: Vec<f64>, log_signal_variance: f64) -> Self {
        let inv_length_scales = log_length_scales.iter().map(|l| (-l).exp()).collect();
        BaseKernel {
            family,
            log_length_scales,
            log_signal_variance,
            inv_length_scales,
            signal_variance: log_signal_variance.exp(),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.log_length_scales.len()
    }

    pub fn length_scales(&self) -> Vec<f64> {
        self.inv_length_scales.iter().map(|v| 1.0 / v).collect()
    }

    pub fn log_length_scales(&self) -> &[f64] {
        &self.log_length_scales
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn log_signal_variance(&self) -> f64 {
        self.log_signal_variance
    }

    /// Same kernel with the signal variance replaced.
    pub fn with_signal_variance(&self, signal_variance: f64) -> Result<Self> {
        Self::new(self.family, self.length_scales(), signal_variance)
    }

    /// Checked evaluation of `k(x, x')`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return invalid(format!(
                "kernel of dimension {} evaluated at points of dimension {} and {}",
                self.dim(),
                x.len(),
                y.len()
            ));
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(y)
            .zip(&self.inv_length_scales)
            .map(|((a, b), il)| {
                let t = (a - b) * il;
                t * t
            })
            .sum();
        match self.family {
            KernelFamily::SquaredExponential => self.signal_variance * (-0.5 * r2).exp(),
            KernelFamily::Matern52 => {
                let r = (5.0 * r2).sqrt();
                self.signal_variance * (1.0 + r + r * r / 3.0) * (-r).exp()
            }
        }
    }
}

impl TryFrom<BaseKernelSpec> for BaseKernel {
    type Error = MisoError;

    fn try_from(spec: BaseKernelSpec) -> Result<Self> {
        BaseKernel::new(spec.family, spec.length_scales, spec.signal_variance)
    }
}

impl From<BaseKernel> for BaseKernelSpec {
    fn from(k: BaseKernel) -> Self {
        BaseKernelSpec {
            family: k.family,
            length_scales: k.length_scales(),
            signal_variance: k.signal_variance,
        }
    }
}

/// Partition of the sources into groups with correlated discrepancies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupKernels {
    /// `map[l]` is the group of source `l`; length `M + 1`. The entry for source 0 is ignored.
    pub map: Vec<usize>,
    /// One kernel per group; `None` is the identically-zero kernel.
    pub kernels: Vec<Option<BaseKernel>>,
}

/// Composite covariance over augmented points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisoKernel {
    /// Kernel of the truth `f(0, .)`. `None` is the zero kernel (useful only for toy models).
    truth: Option<BaseKernel>,
    /// Discrepancy kernels for sources `1..=M`; `None` marks an unbiased source.
    discrepancy: Vec<Option<BaseKernel>>,
    /// Fidelity coefficients scaling each discrepancy kernel.
    fidelity: Vec<f64>,
    groups: Option<GroupKernels>,
    dim: usize,
}

impl MisoKernel {
    /// Independent-discrepancy kernel with unit fidelity coefficients.
    pub fn independent(truth: BaseKernel, discrepancy: Vec<Option<BaseKernel>>) -> Result<Self> {
        Self::build(Some(truth), discrepancy, None, None)
    }

    /// General constructor.
    pub fn build(
        truth: Option<BaseKernel>,
        discrepancy: Vec<Option<BaseKernel>>,
        fidelity: Option<Vec<f64>>,
        groups: Option<GroupKernels>,
    ) -> Result<Self> {
        let m = discrepancy.len();
        let dims: Vec<usize> = truth
            .iter()
            .chain(discrepancy.iter().flatten())
            .chain(groups.iter().flat_map(|g| g.kernels.iter().flatten()))
            .map(BaseKernel::dim)
            .collect();
        let Some(&dim) = dims.first() else {
            return invalid("augmented kernel needs at least one non-zero component to fix the dimension");
        };
        if dims.iter().any(|d| *d != dim) {
            return invalid(format!("component kernels disagree on dimension: {dims:?}"));
        }
        let fidelity = fidelity.unwrap_or_else(|| vec![1.0; m]);
        if fidelity.len() != m {
            return invalid(format!(
                "expected {m} fidelity coefficients, got {}",
                fidelity.len()
            ));
        }
        if let Some(bad) = fidelity.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return invalid(format!("fidelity coefficients must be positive, got {bad}"));
        }
        if let Some(g) = &groups {
            if g.map.len() != m + 1 {
                return invalid(format!(
                    "group map must cover sources 0..={m} ({} entries), got {}",
                    m + 1,
                    g.map.len()
                ));
            }
            if let Some(bad) = g.map.iter().find(|q| **q >= g.kernels.len()) {
                return invalid(format!(
                    "group index {bad} out of range for {} group kernels",
                    g.kernels.len()
                ));
            }
        }
        Ok(MisoKernel {
            truth,
            discrepancy,
            fidelity,
            groups,
            dim,
        })
    }

    /// Number of biased-or-not auxiliary sources `M`; sources are `0..=M`.
    pub fn num_sources(&self) -> usize {
        self.discrepancy.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truth(&self) -> Option<&BaseKernel> {
        self.truth.as_ref()
    }

    pub fn discrepancy(&self, source: usize) -> Option<&BaseKernel> {
        if source == 0 {
            None
        } else {
            self.discrepancy.get(source - 1).and_then(Option::as_ref)
        }
    }

    pub fn fidelity(&self) -> &[f64] {
        &self.fidelity
    }

    pub fn groups(&self) -> Option<&GroupKernels> {
        self.groups.as_ref()
    }

    /// Checked evaluation of the augmented covariance.
    pub fn eval(&self, p: &AugmentedPoint, q: &AugmentedPoint) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(self.cov(p.source, &p.x, q.source, &q.x))
    }

    pub(crate) fn check_point(&self, p: &AugmentedPoint) -> Result<()> {
        if p.source >= self.num_sources() {
            return invalid(format!(
                "source index {} out of range (model has sources 0..={})",
                p.source,
                self.num_sources() - 1
            ));
        }
        if p.x.len() != self.dim {
            return invalid(format!(
                "design of dimension {} for a kernel of dimension {}",
                p.x.len(),
                self.dim
            ));
        }
        Ok(())
    }

    /// Unchecked covariance between `f(l, x)` and `f(m, y)`.
    #[inline]
    pub(crate) fn cov(&self, l: usize, x: &[f64], m: usize, y: &[f64]) -> f64 {
        let mut v = match &self.truth {
            Some(k) => k.eval_unchecked(x, y),
            None => 0.0,
        };
        if l == 0 || m == 0 {
            return v;
        }
        if let Some(g) = &self.groups {
            let (gl, gm) = (g.map[l], g.map[m]);
            if gl == gm {
                if let Some(k) = &g.kernels[gl] {
                    v += k.eval_unchecked(x, y);
                }
            }
        }
        if l == m {
            if let Some(k) = &self.discrepancy[l - 1] {
                v += self.fidelity[l - 1] * k.eval_unchecked(x, y);
            }
        }
        v
    }

    /// `[Sigma(p_i, p_j)] + diag(noise)`.
    pub fn gram(&self, points: &[AugmentedPoint], noise: &[f64]) -> Result<DMatrix<f64>> {
        if points.len() != noise.len() {
            return invalid(format!(
                "{} points but {} noise variances",
                points.len(),
                noise.len()
            ));
        }
        for p in points {
            self.check_point(p)?;
        }
        if let Some(bad) = noise.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return invalid(format!("noise variances must be finite and >= 0, got {bad}"));
        }
        let n = points.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.cov(points[i].source, &points[i].x, points[j].source, &points[j].x);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += noise[i];
        }
        Ok(k)
    }
}

/// Constant prior mean `mu(l, x) = mu_0` shared by every source.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanFunction {
    pub constant: f64,
}

impl MeanFunction {
    pub fn constant(constant: f64) -> Self {
        MeanFunction { constant }
    }

    #[inline]
    pub fn eval(&self, _p: &AugmentedPoint) -> f64 {
        self.constant
    }
}
