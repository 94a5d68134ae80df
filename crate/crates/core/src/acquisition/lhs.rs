use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::seeded;
use crate::space::BoxDomain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateOrigin {
    LatinHypercube,
    UserSupplied,
}

/// Finite set `A` of designs used for the inner maximization of the knowledge gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCandidateSet {
    points: Vec<Vec<f64>>,
    origin: CandidateOrigin,
}

impl DiscreteCandidateSet {
    pub fn new(points: Vec<Vec<f64>>, domain: &BoxDomain, origin: CandidateOrigin) -> Result<Self> {
        if points.len() < 2 {
            return invalid(format!("candidate set needs at least 2 points, got {}", points.len()));
        }
        if let Some(p) = points.iter().find(|p| !domain.contains(p)) {
            return invalid(format!("candidate {p:?} lies outside the domain"));
        }
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return invalid(format!("duplicate candidate {:?}", points[i]));
                }
            }
        }
        Ok(DiscreteCandidateSet { points, origin })
    }

    pub fn user_supplied(points: Vec<Vec<f64>>, domain: &BoxDomain) -> Result<Self> {
        Self::new(points, domain, CandidateOrigin::UserSupplied)
    }

    /// Latin hypercube set of `n >= 2` points.
    pub fn latin_hypercube(n: usize, domain: &BoxDomain, seed: u64) -> Result<Self> {
        Self::new(latin_hypercube(n, domain, seed)?, domain, CandidateOrigin::LatinHypercube)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn origin(&self) -> CandidateOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n` points with exactly one point in each of the `n` equal-width strata of every axis.
pub fn latin_hypercube(n: usize, domain: &BoxDomain, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return invalid("latin hypercube needs n >= 1");
    }
    let mut rng = seeded(seed, 0x1a7);
    let d = domain.dim();
    let mut points = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(&mut rng);
        let (lo, w) = (domain.lower()[j], domain.width(j));
        for (p, &s) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            // stay strictly inside the stratum and the box
            let v = lo + w * (s as f64 + u) / n as f64;
            p[j] = v.min(lo + w * (s as f64 + 1.0) / n as f64).min(domain.upper()[j]);
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stratum(v: f64, lo: f64, w: f64, n: usize) -> usize {
        (((v - lo) / w * n as f64).floor() as usize).min(n - 1)
    }

    #[test]
    fn one_point_per_unit_interval() {
        let dom = BoxDomain::new(vec![0.0], vec![5.0]).unwrap();
        let pts = latin_hypercube(5, &dom, 1).unwrap();
        let mut seen = [0; 5];
        for p in &pts {
            seen[stratum(p[0], 0.0, 5.0, 5)] += 1;
        }
        assert_eq!(seen, [1; 5]);
    }

    #[test]
    fn marginals_are_stratified_in_2d() {
        let dom = BoxDomain::new(vec![-2.0, 0.0], vec![2.0, 10.0]).unwrap();
        let pts = latin_hypercube(100, &dom, 9).unwrap();
        for j in 0..2 {
            let mut hist = vec![0; 100];
            for p in &pts {
                hist[stratum(p[j], dom.lower()[j], dom.width(j), 100)] += 1;
            }
            assert!(hist.iter().all(|c| *c == 1));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let dom = BoxDomain::cube(0.0, 1.0, 3).unwrap();
        assert_eq!(latin_hypercube(20, &dom, 4).unwrap(), latin_hypercube(20, &dom, 4).unwrap());
        assert_ne!(latin_hypercube(20, &dom, 4).unwrap(), latin_hypercube(20, &dom, 5).unwrap());
    }

    #[test]
    fn candidate_set_validation() {
        let dom = BoxDomain::cube(0.0, 1.0, 1).unwrap();
        assert!(DiscreteCandidateSet::user_supplied(vec![vec![0.5]], &dom).is_err());
        assert!(DiscreteCandidateSet::user_supplied(vec![vec![0.5], vec![0.5]], &dom).is_err());
        assert!(DiscreteCandidateSet::user_supplied(vec![vec![0.5], vec![1.5]], &dom).is_err());
        assert!(DiscreteCandidateSet::latin_hypercube(1, &dom, 0).is_err());
        assert_eq!(DiscreteCandidateSet::latin_hypercube(7, &dom, 0).unwrap().len(), 7);
    }
}
