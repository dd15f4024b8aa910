//! Finite probability mass functions over `{0, 1, ..., support_max}`.

use crate::error::{Error, Result};

/// Tolerance used when checking that a mass vector sums to one.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A discrete distribution on the integers `0..=support_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    /// Builds a PMF from raw masses, checking nonnegativity and unit sum.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParams("pmf must have at least one entry".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParams(format!("pmf entry {p} is not a finite nonnegative number")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidParams(format!("pmf sums to {total}, expected 1")));
        }
        Ok(Self { probs })
    }

    /// Wraps masses produced internally, where the construction guarantees validity.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-10, "pmf sum {}", probs.iter().sum::<f64>());
        Self { probs }
    }

    pub fn point_mass(at: usize) -> Self {
        let mut probs = vec![0.0; at + 1];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn support_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Mass at `n`, zero outside the support.
    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn cdf(&self) -> Vec<f64> {
        self.probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    /// Distribution of the sum of two independent variables.
    pub fn convolve(&self, other: &Pmf) -> Pmf {
        let mut out = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, a) in self.probs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.probs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Pmf { probs: out }
    }

    /// Distribution of the sum of `k` independent copies (`k = 0` gives a point mass at 0).
    pub fn convolve_power(&self, k: usize) -> Pmf {
        (0..k).fold(Pmf::point_mass(0), |acc, _| acc.convolve(self))
    }

    /// Caps the support at `cap`, moving all mass above it into bin `cap`.
    pub fn fold_at(&self, cap: usize) -> Pmf {
        if cap >= self.support_max() {
            let mut probs = self.probs.clone();
            probs.resize(cap + 1, 0.0);
            return Pmf { probs };
        }
        let mut probs = self.probs[..=cap].to_vec();
        probs[cap] += self.probs[cap + 1..].iter().sum::<f64>();
        Pmf { probs }
    }
}

/// Total variation distance between two mass vectors (missing entries are zero).
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    0.5 * (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_mass() {
        assert!(Pmf::new(vec![0.5, 0.6]).is_err());
        assert!(Pmf::new(vec![-0.1, 1.1]).is_err());
        assert!(Pmf::new(vec![]).is_err());
        assert!(Pmf::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Pmf::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn fold_keeps_mass() {
        let p = Pmf::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let f = p.fold_at(1);
        assert_eq!(f.probs()[0], 0.1);
        assert!((f.probs()[1] - 0.9).abs() < 1e-15);
        let g = p.fold_at(5);
        assert_eq!(g.support_max(), 5);
        assert!((g.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn binomial_by_convolution() {
        let coin = Pmf::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(coin.convolve_power(2).probs(), &[0.25, 0.5, 0.25]);
        assert_eq!(coin.convolve_power(0).probs(), &[1.0]);
    }
}
