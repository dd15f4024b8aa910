//! Small dense helpers: GTH stationary solve, matrix products.

use crate::error::{Error, Result};

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    n: usize,
    data: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::LengthMismatch { left: bad.len(), right: n });
        }
        Ok(Self { n, data: rows.iter().flatten().copied().collect() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn matmul(&self, other: &Dense) -> Dense {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Dense::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn add_assign(&mut self, other: &Dense) {
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    pub fn max_abs_diff(&self, other: &Dense) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Dense {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Dense {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Stationary vector of an irreducible chain by Grassmann–Taksar–Heyman elimination.
///
/// Only the off-diagonal entries of `weights` are read, so the input may be either a
/// stochastic matrix or a generator. The elimination is subtraction-free.
pub fn gth_stationary(weights: &Dense) -> Result<Vec<f64>> {
    let n = weights.dim();
    if n == 0 {
        return Err(Error::InvalidParams("empty matrix".into()));
    }
    let mut a = weights.clone();
    for k in (1..n).rev() {
        let outflow: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if !(outflow > 0.0) {
            return Err(Error::NotIrreducible(format!("state {k} has no path to lower-indexed states")));
        }
        for i in 0..k {
            let f = a[(i, k)] / outflow;
            if f == 0.0 {
                continue;
            }
            for j in 0..k {
                if i != j {
                    let v = a[(k, j)];
                    a[(i, j)] += f * v;
                }
            }
        }
        for i in 0..k {
            a[(i, k)] /= outflow;
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[(i, k)]).sum();
    }
    let total: f64 = pi.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Solver("GTH normalization failed".into()));
    }
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(pi)
}

/// Returns `true` when every state reaches every other through positive off-diagonal entries.
pub fn is_irreducible(weights: &Dense) -> bool {
    let n = weights.dim();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { weights[(i, j)] } else { weights[(j, i)] };
                if i != j && w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n > 0 && reach(true) && reach(false)
}
