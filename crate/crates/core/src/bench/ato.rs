//! Synthetic eight-dimensional stand-in for the assemble-to-order problem.
//!
//! The truth `g` on `[0, 20]^8` is an affine image of a sum of three anisotropic
//! Gaussian bumps (one dominant, two secondary modes), steep along three seeded
//! axes and gentle along the rest, with maximum 120. The cheap source adds a
//! smooth bias field `beta` built from random Fourier features and calibrated to
//! mean 6 and variance 200. Noise variances are 0.056 / 2.944 / 0.332 and costs
//! 17.1 / 0.5 / 3.9 for `IS_0` / `IS_1` / `IS_2`; `IS_2` is unbiased.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{gaussian, BenchmarkProblem};
use crate::acquisition::latin_hypercube;
use crate::cost::CostNoiseModel;
use crate::error::Result;
use crate::optimize::{maximize_in_box, AscentOptions};
use crate::rng::{mix, seeded};
use crate::space::BoxDomain;

pub const DIM: usize = 8;
pub const NOISE: [f64; 3] = [0.056, 2.944, 0.332];
pub const COST: [f64; 3] = [17.1, 0.5, 3.9];
pub const OPTIMUM: f64 = 120.0;
pub const BIAS_MEAN: f64 = 6.0;
pub const BIAS_VARIANCE: f64 = 200.0;

const BUMPS: usize = 3;
const RANGE: f64 = 300.0;
const SENSITIVE_AXES: usize = 3;
const MAIN_WIDTHS: ((f64, f64), (f64, f64)) = ((4.0, 6.0), (30.0, 40.0));
const SECONDARY_WIDTHS: ((f64, f64), (f64, f64)) = ((2.5, 4.0), (15.0, 25.0));
const FEATURES: usize = 64;
const BIAS_LENGTH_SCALE: f64 = 10.0;
const CALIBRATION_POINTS: usize = 4000;

#[derive(Clone, Debug)]
struct Bumps {
    centers: Vec<Vec<f64>>,
    /// Per-bump, per-axis `1 / (2 w^2)`.
    inv_two_w2: Vec<Vec<f64>>,
    heights: Vec<f64>,
    peak: f64,
}

impl Bumps {
    fn raw(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.inv_two_w2)
            .zip(&self.heights)
            .map(|((c, k), h)| {
                let q: f64 = c.iter().zip(x).zip(k).map(|((a, b), k)| (a - b).powi(2) * k).sum();
                h * (-q).exp()
            })
            .sum()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        OPTIMUM - RANGE * (1.0 - self.raw(x) / self.peak)
    }
}

#[derive(Clone, Debug)]
struct BiasField {
    omegas: Vec<Vec<f64>>,
    phases: Vec<f64>,
    amplitude: f64,
    offset: f64,
}

impl BiasField {
    fn raw(&self, x: &[f64]) -> f64 {
        self.omegas
            .iter()
            .zip(&self.phases)
            .map(|(w, b)| (w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b).cos())
            .sum()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.amplitude * self.raw(x) + self.offset
    }
}

fn build(seed: u64) -> Result<(BoxDomain, Bumps, BiasField, Vec<f64>)> {
    let domain = BoxDomain::cube(0.0, 20.0, DIM)?;
    let mut rng = seeded(seed, 0xA70);
    let centers: Vec<Vec<f64>> = (0..BUMPS)
        .map(|k| {
            let (lo, hi) = if k == 0 { (7.0, 13.0) } else { (3.0, 17.0) };
            (0..DIM).map(|_| rng.random_range(lo..hi)).collect()
        })
        .collect();
    // a few sensitive axes carry most of the variation
    let mut axes: Vec<usize> = (0..DIM).collect();
    axes.shuffle(&mut rng);
    let sensitive = &axes[..SENSITIVE_AXES];
    let inv_two_w2 = (0..BUMPS)
        .map(|k| {
            let (narrow, broad) = if k == 0 { MAIN_WIDTHS } else { SECONDARY_WIDTHS };
            (0..DIM)
                .map(|i| {
                    let (lo, hi) = if sensitive.contains(&i) { narrow } else { broad };
                    let w: f64 = rng.random_range(lo..hi);
                    1.0 / (2.0 * w * w)
                })
                .collect()
        })
        .collect();
    let heights = vec![1.0, 0.6, 0.5];
    let mut bumps = Bumps {
        centers,
        inv_two_w2,
        heights,
        peak: 1.0,
    };
    let opts = AscentOptions {
        max_iters: 500,
        x_tol: 1e-10,
        fd_rel_step: 1e-7,
    };
    let best = bumps
        .centers
        .iter()
        .map(|c| maximize_in_box(|x| bumps.raw(x), c, &domain, &opts))
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one bump");
    bumps.peak = best.value;

    let omegas = (0..FEATURES)
        .map(|_| (0..DIM).map(|_| gaussian(&mut rng) / BIAS_LENGTH_SCALE).collect())
        .collect();
    let phases = (0..FEATURES).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut bias = BiasField {
        omegas,
        phases,
        amplitude: 1.0,
        offset: 0.0,
    };
    let calib = latin_hypercube(CALIBRATION_POINTS, &domain, mix(seed ^ 0xB1A5))?;
    let raw: Vec<f64> = calib.iter().map(|x| bias.raw(x)).collect();
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    bias.amplitude = (BIAS_VARIANCE / var).sqrt();
    bias.offset = BIAS_MEAN - bias.amplitude * mean;
    Ok((domain, bumps, bias, best.x))
}

/// The truth surface and bias field of the stand-in for `seed`.
pub fn ato_components(seed: u64) -> Result<(impl Fn(&[f64]) -> f64, impl Fn(&[f64]) -> f64)> {
    let (_, bumps, bias, _) = build(seed)?;
    Ok((move |x: &[f64]| bumps.eval(x), move |x: &[f64]| bias.eval(x)))
}

pub fn ato_synthetic(seed: u64) -> Result<BenchmarkProblem> {
    let (domain, bumps, bias, argmax) = build(seed)?;
    let g = Arc::new(bumps);
    let beta = Arc::new(bias);
    let (g0, g1, g2, gt) = (g.clone(), g.clone(), g.clone(), g);
    let sd = NOISE.map(f64::sqrt);
    BenchmarkProblem::new(
        "ato",
        domain,
        vec![
            Arc::new(move |x, rng| g0.eval(x) + sd[0] * gaussian(rng)),
            Arc::new(move |x, rng| g1.eval(x) + beta.eval(x) + sd[1] * gaussian(rng)),
            Arc::new(move |x, rng| g2.eval(x) + sd[2] * gaussian(rng)),
        ],
        CostNoiseModel::constant(&COST, &NOISE)?,
        Some(Arc::new(move |x| gt.eval(x))),
        Some((argmax, OPTIMUM)),
    )
}
