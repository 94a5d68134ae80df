//! The expected one-step gain `h(a, b) = E[max_i a_i + b_i Z] - max_i a_i`.
//!
//! Each pair `(a_i, b_i)` is a line `z -> a_i + b_i z`. Sorting by slope,
//! dropping equal-slope duplicates and scanning for the upper envelope leaves
//! lines `1..n'` with breakpoints `c_i` where line `i+1` takes over from line
//! `i`. Then
//!
//! ```text
//! h(a, b) = sum_i (b_{i+1} - b_i) f(-|c_i|),   f(z) = phi(z) + z Phi(z).
//! ```

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::normal::expected_positive_part;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Line {
    pub intercept: f64,
    pub slope: f64,
}

/// A line of the upper envelope and the `z` from which it attains the max.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Segment {
    pub line: Line,
    pub start: f64,
}

fn validate(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return invalid(format!("h(a, b) needs equal lengths, got {} and {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return invalid("h(a, b) needs at least one entry");
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return invalid("h(a, b) entries must be finite");
    }
    Ok(())
}

/// Lines sorted by ascending slope; among equal slopes only the largest intercept survives.
pub(crate) fn sorted_lines(a: &[f64], b: &[f64], parallel: bool) -> Vec<Line> {
    let mut lines: Vec<Line> = a
        .iter()
        .zip(b)
        .map(|(&intercept, &slope)| Line { intercept, slope })
        .collect();
    let cmp = |x: &Line, y: &Line| {
        x.slope
            .total_cmp(&y.slope)
            .then(x.intercept.total_cmp(&y.intercept))
    };
    if parallel {
        lines.par_sort_unstable_by(cmp);
    } else {
        lines.sort_unstable_by(cmp);
    }
    // keep the last (largest intercept) of every run of equal slopes
    let mut out: Vec<Line> = Vec::with_capacity(lines.len());
    for l in lines {
        match out.last_mut() {
            Some(last) if last.slope == l.slope => *last = l,
            _ => out.push(l),
        }
    }
    out
}

#[inline]
fn crossing(lo: &Line, hi: &Line) -> f64 {
    (lo.intercept - hi.intercept) / (hi.slope - lo.slope)
}

/// Pushes `line` onto an envelope stack, popping every segment it dominates.
/// Returns whether anything was popped.
#[inline]
fn push_line(stack: &mut Vec<Segment>, line: Line) -> bool {
    let mut popped = false;
    while let Some(top) = stack.last() {
        let z = crossing(&top.line, &line);
        if z <= top.start {
            stack.pop();
            popped = true;
        } else {
            stack.push(Segment { line, start: z });
            return popped;
        }
    }
    stack.push(Segment {
        line,
        start: f64::NEG_INFINITY,
    });
    popped
}

/// Linear domination scan over slope-sorted lines.
pub(crate) fn upper_envelope(lines: &[Line]) -> Vec<Segment> {
    let mut stack = Vec::with_capacity(lines.len());
    for &l in lines {
        push_line(&mut stack, l);
    }
    stack
}

/// Envelope of `left ++ right` given the envelopes of each part (left has smaller slopes).
///
/// Only the boundary needs work: the right envelope is pushed line by line until one
/// of its lines lands on its own predecessor without popping, after which the rest
/// of `right` is unchanged.
pub(crate) fn merge_envelopes(mut left: Vec<Segment>, right: &[Segment]) -> Vec<Segment> {
    for (j, seg) in right.iter().enumerate() {
        let popped = push_line(&mut left, seg.line);
        let below_is_prev = j > 0 && left.len() >= 2 && left[left.len() - 2].line == right[j - 1].line;
        if !popped && below_is_prev {
            left.extend_from_slice(&right[j + 1..]);
            return left;
        }
    }
    left
}

#[inline]
fn term(prev: &Segment, next: &Segment) -> f64 {
    (next.line.slope - prev.line.slope) * expected_positive_part(-next.start.abs())
}

fn envelope_sum(env: &[Segment]) -> f64 {
    env.windows(2).map(|w| term(&w[0], &w[1])).sum()
}

/// `h(a, b)` by sorting, domination pruning and the closed-form sum.
pub fn h(a: &[f64], b: &[f64]) -> Result<f64> {
    validate(a, b)?;
    Ok(envelope_sum(&upper_envelope(&sorted_lines(a, b, false))))
}

/// `h(a, b)` with the envelope scan split across `workers` contiguous chunks,
/// merged pairwise in `ceil(log2 workers)` rounds, and a chunked final sum.
pub fn h_parallel(a: &[f64], b: &[f64], workers: usize) -> Result<f64> {
    if workers == 0 {
        return invalid("h_parallel needs at least one worker");
    }
    if workers == 1 {
        return h(a, b);
    }
    validate(a, b)?;
    let lines = sorted_lines(a, b, true);
    let chunk = lines.len().div_ceil(workers).max(1);
    let mut parts: Vec<Vec<Segment>> = lines.par_chunks(chunk).map(upper_envelope).collect();
    while parts.len() > 1 {
        parts = parts
            .par_chunks(2)
            .map(|pair| match pair {
                [l, r] => merge_envelopes(l.clone(), r),
                [l] => l.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    let env = parts.pop().unwrap_or_default();
    if env.len() < 2 {
        return Ok(0.0);
    }
    // fixed partition of the terms so the reduction order does not depend on scheduling
    let n_terms = env.len() - 1;
    let span = n_terms.div_ceil(workers).max(1);
    let partials: Vec<f64> = (0..n_terms)
        .step_by(span)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&start| {
            (start..(start + span).min(n_terms))
                .map(|i| term(&env[i], &env[i + 1]))
                .sum::<f64>()
        })
        .collect();
    Ok(partials.iter().sum())
}
