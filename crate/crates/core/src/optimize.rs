//! Box-constrained quasi-Newton ascent with finite-difference gradients.
//!
//! Used for the outer knowledge-gradient search, the hyperparameter fits and the
//! final recommendation. The method is projected BFGS: the search direction is
//! `H g` with bound-blocked components zeroed, the step is projected back into
//! the box, and an Armijo backtracking line search guarantees monotone ascent.

use crate::space::BoxDomain;

#[derive(Clone, Debug)]
pub struct AscentOptions {
    pub max_iters: usize,
    /// Converged when every `|dx_i| < x_tol * width_i`.
    pub x_tol: f64,
    /// Central-difference step as a fraction of each box width.
    pub fd_rel_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            max_iters: 100,
            x_tol: 1e-6,
            fd_rel_step: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub start_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference gradient with per-coordinate steps.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], steps: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    steps
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Maximizes `f` over `domain` starting from `x0` (clamped into the box).
///
/// `f` may return `-inf` to mark infeasible points; non-finite gradients stop the ascent.
pub fn maximize_in_box<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    domain: &BoxDomain,
    opts: &AscentOptions,
) -> AscentResult {
    let d = domain.dim();
    let widths = domain.widths();
    let steps: Vec<f64> = widths.iter().map(|w| opts.fd_rel_step * w).collect();
    let (lo, hi) = (domain.lower(), domain.upper());

    let mut x = x0.to_vec();
    domain.clamp(&mut x);
    let mut fx = f(&x);
    let start_value = fx;
    let mut result = AscentResult {
        x: x.clone(),
        value: fx,
        start_value,
        iterations: 0,
        converged: false,
    };
    if !fx.is_finite() {
        return result;
    }
    let mut g = fd_gradient(&f, &x, &steps);
    // inverse Hessian approximation of -f, scaled to the box
    let identity = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            h[i * d + i] = widths[i] * widths[i];
        }
    };
    let mut hinv = vec![0.0; d * d];
    identity(&mut hinv);
    let mut fresh = true;

    for iter in 0..opts.max_iters {
        result.iterations = iter + 1;
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        let mut dir: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| hinv[i * d + j] * g[j]).sum())
            .collect();
        for i in 0..d {
            if (x[i] <= lo[i] && dir[i] < 0.0) || (x[i] >= hi[i] && dir[i] > 0.0) {
                dir[i] = 0.0;
            }
        }
        let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) {
            if fresh {
                result.converged = true;
                break;
            }
            identity(&mut hinv);
            fresh = true;
            continue;
        }
        // first step moves at most a tenth of the box
        let mut t = if fresh {
            let scale = dir
                .iter()
                .zip(&widths)
                .map(|(v, w)| v.abs() / w)
                .fold(0.0, f64::max);
            (0.1 / scale).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            domain.clamp(&mut xn);
            let fn_ = f(&xn);
            let gain: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if fn_.is_finite() && fn_ >= fx + 1e-4 * gain && fn_ >= fx {
                accepted = Some((xn, fn_));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            if fresh {
                result.converged = true;
                break;
            }
            identity(&mut hinv);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let small = s.iter().zip(&widths).all(|(si, w)| si.abs() < opts.x_tol * w);
        let gn = fd_gradient(&f, &xn, &steps);
        // BFGS on -f: y = -(gn - g)
        let y: Vec<f64> = g.iter().zip(&gn).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if sy > 1e-12 * norm(&s) * norm(&y) {
            let hy: Vec<f64> = (0..d)
                .map(|i| (0..d).map(|j| hinv[i * d + j] * y[j]).sum())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            let coef = (1.0 + rho * yhy) * rho;
            for i in 0..d {
                for j in 0..d {
                    hinv[i * d + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
            fresh = false;
        }
        x = xn;
        fx = fn_;
        g = gn;
        if small {
            result.converged = true;
            break;
        }
    }
    result.x = x;
    result.value = fx;
    result
}
