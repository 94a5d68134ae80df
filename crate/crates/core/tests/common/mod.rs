//! Independent oracles and random instance generators shared by the test targets.
#![allow(dead_code)]

use std::f64::consts::FRAC_1_SQRT_2;

use misokg::kernel::{BaseKernel, GroupKernels, KernelFamily, MeanFunction, MisoKernel};
use misokg::space::AugmentedPoint;
use misokg::{BoxDomain, Observation};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

pub fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn big_phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Monte Carlo `E[max_i a_i + b_i Z] - max_i a_i` over the draws `zs`: `(mean, standard error)`.
pub fn mc_h(a: &[f64], b: &[f64], zs: &[f64]) -> (f64, f64) {
    const CHUNK: usize = 2048;
    let amax = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut best = [0.0f64; CHUNK];
    let (mut s, mut s2) = (0.0, 0.0);
    for chunk in zs.chunks(CHUNK) {
        let best = &mut best[..chunk.len()];
        best.fill(f64::NEG_INFINITY);
        for (&ai, &bi) in a.iter().zip(b) {
            for (m, &z) in best.iter_mut().zip(chunk) {
                let v = ai + bi * z;
                *m = if v > *m { v } else { *m };
            }
        }
        for m in best.iter() {
            let g = m - amax;
            s += g;
            s2 += g * g;
        }
    }
    let n = zs.len() as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `h(a, b)` without pruning: every pairwise crossing is a breakpoint, and on each
/// interval the best line at the midpoint is integrated against the normal density.
pub fn h_all_breakpoints(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut cuts = vec![f64::NEG_INFINITY, f64::INFINITY];
    for i in 0..n {
        for j in i + 1..n {
            if b[i] != b[j] {
                cuts.push((a[i] - a[j]) / (b[j] - b[i]));
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (false, true) => hi - 1.0,
            (true, false) => lo + 1.0,
            (false, false) => 0.0,
        };
        let k = (0..n)
            .max_by(|&i, &j| (a[i] + b[i] * mid).total_cmp(&(a[j] + b[j] * mid)))
            .unwrap();
        // int_lo^hi (a + b z) phi(z) dz
        let mass = if hi <= 0.0 {
            big_phi(hi) - big_phi(lo)
        } else if lo >= 0.0 {
            big_phi(-lo) - big_phi(-hi)
        } else {
            1.0 - big_phi(lo) - big_phi(-hi)
        };
        total += a[k] * mass + b[k] * (phi(lo) - phi(hi));
    }
    total - a.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule for `E[g(Z)]`, `Z ~ N(0, 1)`,
/// from the eigen-decomposition of the Jacobi matrix of the probabilists' polynomials.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = (k as f64).sqrt();
        j[(k - 1, k)] = off;
        j[(k, k - 1)] = off;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// Effective noise: zero noise becomes the default jitter.
pub fn effective(noise: f64) -> f64 {
    if noise == 0.0 {
        1e-6
    } else {
        noise
    }
}

/// Exact GP inference by a dense LU solve.
pub struct DenseGp<'a> {
    pub kernel: &'a MisoKernel,
    pub mean: f64,
    pub points: Vec<AugmentedPoint>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    alpha: DVector<f64>,
}

impl<'a> DenseGp<'a> {
    pub fn new(kernel: &'a MisoKernel, mean: f64, obs: &[Observation]) -> Self {
        let n = obs.len();
        let points: Vec<AugmentedPoint> = obs.iter().map(|o| AugmentedPoint::new(o.source, o.x.clone())).collect();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = kernel.eval(&points[i], &points[j]).unwrap();
            }
            k[(i, i)] += effective(obs[i].noise_var);
        }
        let lu = k.lu();
        let r = DVector::from_iterator(n, obs.iter().map(|o| o.y - mean));
        let alpha = if n == 0 { r } else { lu.solve(&r).expect("dense system is singular") };
        DenseGp {
            kernel,
            mean,
            points,
            lu,
            alpha,
        }
    }

    fn kvec(&self, p: &AugmentedPoint) -> DVector<f64> {
        DVector::from_iterator(self.points.len(), self.points.iter().map(|q| self.kernel.eval(q, p).unwrap()))
    }

    pub fn mean_at(&self, p: &AugmentedPoint) -> f64 {
        self.mean + self.kvec(p).dot(&self.alpha)
    }

    pub fn cov(&self, p: &AugmentedPoint, q: &AugmentedPoint) -> f64 {
        let prior = self.kernel.eval(p, q).unwrap();
        if self.points.is_empty() {
            return prior;
        }
        let kq = self.kvec(q);
        prior - self.kvec(p).dot(&self.lu.solve(&kq).unwrap())
    }
}

pub fn random_base(r: &mut ChaCha8Rng, family: KernelFamily, d: usize, scale: f64) -> BaseKernel {
    let ls = (0..d).map(|_| r.random_range(0.5..2.0) * scale).collect();
    BaseKernel::new(family, ls, r.random_range(0.5..3.0)).unwrap()
}

/// Random augmented kernel with `m` auxiliary sources: some unbiased, sometimes
/// with non-unit fidelity coefficients and a correlated group.
pub fn random_miso(r: &mut ChaCha8Rng, family: KernelFamily, d: usize, m: usize) -> MisoKernel {
    let truth = random_base(r, family, d, 1.0);
    let disc: Vec<Option<BaseKernel>> = (0..m)
        .map(|_| {
            if r.random_bool(0.75) {
                let mut k = random_base(r, family, d, 1.0);
                k = k.with_signal_variance(k.signal_variance() * 0.3).unwrap();
                Some(k)
            } else {
                None
            }
        })
        .collect();
    let fidelity = r
        .random_bool(0.5)
        .then(|| (0..m).map(|_| r.random_range(0.5..2.0)).collect());
    let groups = r.random_bool(0.3).then(|| {
        let mut map = vec![0];
        map.extend((0..m).map(|_| r.random_range(0..2)));
        GroupKernels {
            map,
            kernels: vec![Some(random_base(r, family, d, 1.0)), None],
        }
    });
    MisoKernel::build(Some(truth), disc, fidelity, groups).unwrap()
}

pub fn random_point(r: &mut ChaCha8Rng, domain: &BoxDomain) -> Vec<f64> {
    domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(l, u)| r.random_range(*l..*u))
        .collect()
}

/// Observations at random sources and designs with values from a smooth function.
pub fn random_observations(r: &mut ChaCha8Rng, domain: &BoxDomain, sources: usize, n: usize) -> Vec<Observation> {
    (0..n)
        .map(|_| {
            let source = r.random_range(0..sources);
            let x = random_point(r, domain);
            let y = x.iter().map(|v| v.sin()).sum::<f64>() + 0.3 * source as f64 + r.random_range(-0.5..0.5);
            let noise = if r.random_bool(0.2) { 0.0 } else { r.random_range(1e-3..0.1) };
            Observation::new(source, x, y, noise)
        })
        .collect()
}

pub fn mean_fn(c: f64) -> MeanFunction {
    MeanFunction::constant(c)
}

/// Richardson-extrapolated central difference of `f` along `v`.
pub fn richardson_directional<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], v: &[f64], step: f64) -> f64 {
    let central = |h: f64| {
        let up: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
        let down: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
        (f(&up) - f(&down)) / (2.0 * h)
    };
    let d1 = central(step);
    let d2 = central(step / 2.0);
    let d4 = central(step / 4.0);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d4 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// Draws `n` noisy values of a 1-d zero-mean GP with a squared-exponential kernel
/// at uniform designs in `[0, width]`.
pub fn se_sample_1d(seed: u64, n: usize, width: f64, ls: f64, sv: f64, noise: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let x: Vec<f64> = (0..n).map(|_| r.random_range(0.0..width)).collect();
    let k = DMatrix::from_fn(n, n, |i, j| {
        sv * (-(x[i] - x[j]).powi(2) / (2.0 * ls * ls)).exp() + if i == j { noise + 1e-10 } else { 0.0 }
    });
    let l = k.cholesky().expect("sample covariance is positive definite").l();
    let z = DVector::from_iterator(n, (0..n).map(|_| r.sample::<f64, _>(StandardNormal)));
    let y = l * z;
    (x.into_iter().map(|v| vec![v]).collect(), y.iter().copied().collect())
}

pub const RECOVERY_LS: f64 = 0.7;
pub const RECOVERY_SV: f64 = 2.0;
pub const RECOVERY_WIDTH: f64 = 20.0;
pub const RECOVERY_NOISE: f64 = 1e-6;

/// Recovery experiment on noise-free draws: fitted `(ln ls, ln sv)` of the truth block.
pub fn recovery_trial(seed: u64, n: usize, width: f64, use_priors: bool) -> (f64, f64) {
    recovery_fit(seed, n, width, use_priors).0
}

/// As [`recovery_trial`], plus the fitted objective and the objective at the truth.
pub fn recovery_fit(seed: u64, n: usize, width: f64, use_priors: bool) -> ((f64, f64), f64, f64) {
    use misokg::hyper::{build_priors, fit_map, log_marginal_likelihood, DifferenceDataset, FitOptions};
    const NOISE: f64 = RECOVERY_NOISE;
    let (x, y) = se_sample_1d(seed, n, width, RECOVERY_LS, RECOVERY_SV, NOISE);
    let domain = BoxDomain::new(vec![0.0], vec![width]).unwrap();
    let costs = misokg::CostNoiseModel::constant(&[1.0], &[NOISE]).unwrap();
    let data = DifferenceDataset::new(x, vec![y]).unwrap();
    let priors = build_priors(&data, &domain, &costs).unwrap();
    let opts = FitOptions {
        use_priors,
        seed,
        ..Default::default()
    };
    let fit = fit_map(&data, &priors, &domain, &costs, &opts).unwrap();
    let k = fit.kernel.truth().unwrap();
    let truth = BaseKernel::new(KernelFamily::SquaredExponential, vec![RECOVERY_LS], RECOVERY_SV).unwrap();
    let mut at_truth = log_marginal_likelihood(
        &truth,
        data.designs(),
        data.truth_values(),
        &vec![NOISE; n],
        fit.mean.constant,
    );
    if use_priors {
        at_truth += priors.truth.log_density(&[RECOVERY_LS], RECOVERY_SV);
    }
    ((k.length_scales()[0].ln(), k.signal_variance().ln()), fit.truth.objective, at_truth)
}
