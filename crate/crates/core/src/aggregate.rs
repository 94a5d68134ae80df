//! Gain-versus-cost summaries across replications.
//!
//! The gain of a replication at some point is the true objective of its current
//! recommendation minus the best true objective among its initial designs. Each
//! replication is a step function of cumulative cost (initial design included);
//! replications are sampled on a shared cost grid by carrying the last value
//! forward, then averaged with a band of two standard errors.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::runner::{RunLog, RunRecord};

/// One replication's gain as a step function of cumulative cost.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSeries {
    pub seed: u64,
    /// `(cumulative cost, gain)` with non-decreasing cost.
    pub points: Vec<(f64, f64)>,
}

impl GainSeries {
    pub fn new(seed: u64, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return invalid("a gain series needs at least one point");
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0) {
            return invalid("gain series costs must be non-decreasing");
        }
        if points.iter().any(|(c, g)| !c.is_finite() || !g.is_finite()) {
            return invalid("gain series contains non-finite values");
        }
        Ok(GainSeries { seed, points })
    }

    /// Starts at the initial recommendation, then one point per record.
    pub fn from_run(log: &RunLog, records: &[RunRecord]) -> Result<Self> {
        let Some(baseline) = log.baseline else {
            return invalid(format!("run with seed {} has no true objective; gain is undefined", log.seed));
        };
        let Some(first) = log.initial_recommendation.true_value else {
            return invalid("initial recommendation lacks a true value");
        };
        let mut points = vec![(log.initial_cost, first - baseline)];
        for r in records {
            let Some(v) = r.true_value else {
                return invalid(format!("record {} of seed {} lacks a true value", r.iter, log.seed));
            };
            points.push((r.cum_cost, v - baseline));
        }
        Self::new(log.seed, points)
    }

    /// Last value at or before `cost`; the first value before the series starts.
    pub fn value_at(&self, cost: f64) -> f64 {
        let idx = self.points.partition_point(|(c, _)| *c <= cost);
        self.points[idx.saturating_sub(1)].1
    }

    pub fn final_cost(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn final_gain(&self) -> f64 {
        self.points[self.points.len() - 1].1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cum_cost_grid: f64,
    pub mean_gain: f64,
    /// `mean - 2 SE`
    pub lower_2se: f64,
    /// `mean + 2 SE`
    pub upper_2se: f64,
}

/// `n` evenly spaced costs from the earliest start to the latest end.
pub fn cost_grid(series: &[GainSeries], n: usize) -> Result<Vec<f64>> {
    if series.is_empty() || n == 0 {
        return invalid("cost grid needs at least one series and one point");
    }
    let lo = series.iter().map(|s| s.points[0].0).fold(f64::INFINITY, f64::min);
    let hi = series.iter().map(GainSeries::final_cost).fold(f64::NEG_INFINITY, f64::max);
    if n == 1 || hi <= lo {
        return Ok(vec![hi]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn canonical_order(series: &[GainSeries]) -> Vec<&GainSeries> {
    let mut sorted: Vec<&GainSeries> = series.iter().collect();
    sorted.sort_by(|a, b| {
        a.seed.cmp(&b.seed).then_with(|| {
            let ka = a.points.iter().flat_map(|(c, g)| [c.to_bits(), g.to_bits()]);
            let kb = b.points.iter().flat_map(|(c, g)| [c.to_bits(), g.to_bits()]);
            ka.cmp(kb)
        })
    });
    sorted
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean gain and two-standard-error band at each grid cost. Independent of input order.
pub fn summarize(series: &[GainSeries], grid: &[f64]) -> Result<Vec<SummaryRow>> {
    if series.is_empty() {
        return invalid("nothing to summarize");
    }
    let ordered = canonical_order(series);
    Ok(grid
        .iter()
        .map(|&c| {
            let values: Vec<f64> = ordered.iter().map(|s| s.value_at(c)).collect();
            let (mean, se) = mean_se(&values);
            SummaryRow {
                cum_cost_grid: c,
                mean_gain: mean,
                lower_2se: mean - 2.0 * se,
                upper_2se: mean + 2.0 * se,
            }
        })
        .collect())
}

/// Mean final gain and mean total cost over replications.
pub fn final_means(series: &[GainSeries]) -> (f64, f64) {
    let ordered = canonical_order(series);
    let gains: Vec<f64> = ordered.iter().map(|s| s.final_gain()).collect();
    let costs: Vec<f64> = ordered.iter().map(|s| s.final_cost()).collect();
    (mean_se(&gains).0, mean_se(&costs).0)
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
