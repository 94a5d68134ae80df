//! Per-source query cost `c_l(x)` and observation noise variance `lambda_l(x)`.

use crate::bench::expr::Expr;
use crate::error::{invalid, Result};

/// A known function of the design: constant or closed form.
#[derive(Clone, Debug, PartialEq)]
pub enum DesignFn {
    Constant(f64),
    Closed(Expr),
}

impl DesignFn {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            DesignFn::Constant(v) => *v,
            DesignFn::Closed(e) => e.eval(x),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            DesignFn::Constant(v) => Some(*v),
            DesignFn::Closed(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostNoiseModel {
    costs: Vec<DesignFn>,
    noises: Vec<DesignFn>,
}

impl CostNoiseModel {
    pub fn new(costs: Vec<DesignFn>, noises: Vec<DesignFn>) -> Result<Self> {
        if costs.is_empty() || costs.len() != noises.len() {
            return invalid(format!(
                "need one cost and one noise function per source (got {} and {})",
                costs.len(),
                noises.len()
            ));
        }
        for (l, c) in costs.iter().enumerate() {
            if let Some(v) = c.as_constant() {
                if !(v.is_finite() && v > 0.0) {
                    return invalid(format!("cost of source {l} must be positive, got {v}"));
                }
            }
        }
        for (l, n) in noises.iter().enumerate() {
            if let Some(v) = n.as_constant() {
                if !(v.is_finite() && v >= 0.0) {
                    return invalid(format!("noise variance of source {l} must be >= 0, got {v}"));
                }
            }
        }
        Ok(CostNoiseModel { costs, noises })
    }

    /// Constant cost and noise per source.
    pub fn constant(costs: &[f64], noises: &[f64]) -> Result<Self> {
        Self::new(
            costs.iter().map(|c| DesignFn::Constant(*c)).collect(),
            noises.iter().map(|n| DesignFn::Constant(*n)).collect(),
        )
    }

    pub fn num_sources(&self) -> usize {
        self.costs.len()
    }

    #[inline]
    pub fn cost(&self, source: usize, x: &[f64]) -> f64 {
        self.costs[source].eval(x)
    }

    #[inline]
    pub fn noise(&self, source: usize, x: &[f64]) -> f64 {
        self.noises[source].eval(x).max(0.0)
    }

    pub fn costs(&self) -> &[DesignFn] {
        &self.costs
    }

    pub fn noises(&self) -> &[DesignFn] {
        &self.noises
    }

    /// Same model with every cost multiplied by `factor`.
    pub fn scale_costs(&self, factor: f64) -> Result<Self> {
        let costs = self
            .costs
            .iter()
            .map(|c| match c {
                DesignFn::Constant(v) => DesignFn::Constant(v * factor),
                DesignFn::Closed(e) => DesignFn::Closed(Expr::Mul(Box::new(Expr::Num(factor)), Box::new(e.clone()))),
            })
            .collect();
        Self::new(costs, self.noises.clone())
    }

    /// Replaces the noise of `source` by a constant estimate.
    pub fn with_noise(mut self, source: usize, noise: f64) -> Result<Self> {
        if !(noise.is_finite() && noise >= 0.0) {
            return invalid(format!("noise variance must be >= 0, got {noise}"));
        }
        self.noises[source] = DesignFn::Constant(noise);
        Ok(self)
    }
}

/// Sample variance of repeated queries at one design: the constant-noise estimate.
pub fn estimate_constant_noise(repeats: &[f64]) -> Result<f64> {
    if repeats.len() < 2 {
        return invalid("noise estimation needs at least two repeated queries");
    }
    let n = repeats.len() as f64;
    let mean = repeats.iter().sum::<f64>() / n;
    Ok(repeats.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_model() {
        let m = CostNoiseModel::constant(&[1000.0, 1.0], &[1e-3, 1e-6]).unwrap();
        assert_eq!(m.cost(0, &[0.0, 0.0]), 1000.0);
        assert_eq!(m.noise(1, &[0.0, 0.0]), 1e-6);
        assert!(CostNoiseModel::constant(&[0.0], &[0.0]).is_err());
        assert!(CostNoiseModel::constant(&[1.0], &[-1.0]).is_err());
        assert_eq!(m.scale_costs(3.0).unwrap().cost(1, &[0.0, 0.0]), 3.0);
    }

    #[test]
    fn noise_estimate_is_sample_variance() {
        assert!((estimate_constant_noise(&[1.0, 2.0, 3.0, 4.0]).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(estimate_constant_noise(&[1.0]).is_err());
    }
}
