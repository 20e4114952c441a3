//! Perron eigen-data of nonnegative irreducible matrices.

use crate::error::{Error, Result};

pub const POWER_TOLERANCE: f64 = 1e-14;
const MAX_ITERATIONS: usize = 2_000_000;

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Dense { n, data: vec![0.0; n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn transpose(&self) -> Dense {
        let mut t = Dense::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            if v[i] != 0.0 {
                for j in 0..self.n {
                    out[j] += v[i] * self.get(i, j);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerronData {
    pub lambda: f64,
    /// Right eigenvector r, normalized so that Σ l_i r_i = 1.
    pub right: Vec<f64>,
    /// Left eigenvector l, normalized so that Σ l_i = 1.
    pub left: Vec<f64>,
    pub iterations: usize,
}

fn normalize(left: &mut [f64], right: &mut [f64]) {
    let sl: f64 = left.iter().sum();
    left.iter_mut().for_each(|x| *x /= sl);
    let dot: f64 = left.iter().zip(right.iter()).map(|(a, b)| a * b).sum();
    right.iter_mut().for_each(|x| *x /= dot);
}

/// Dominant eigenvector of M + I by power iteration from the all-ones vector.
/// The unit shift makes irreducible periodic matrices converge too.
fn power(m: &Dense) -> Result<(f64, Vec<f64>, usize)> {
    let n = m.n;
    let mut v = vec![1.0 / n as f64; n];
    for it in 1..=MAX_ITERATIONS {
        let mut w = m.mul_vec(&v);
        for i in 0..n {
            w[i] += v[i];
        }
        let s: f64 = w.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Degenerate("power iteration lost positivity".into()));
        }
        w.iter_mut().for_each(|x| *x /= s);
        let diff = w.iter().zip(&v).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        v = w;
        if diff < POWER_TOLERANCE {
            let mv = m.mul_vec(&v);
            let lambda = mv.iter().sum::<f64>() / v.iter().sum::<f64>();
            return Ok((lambda, v, it));
        }
    }
    Err(Error::Degenerate(format!("power iteration did not converge in {MAX_ITERATIONS} steps")))
}

pub fn perron(m: &Dense) -> Result<PerronData> {
    match m.n {
        0 => Err(Error::Degenerate("empty matrix".into())),
        1 => {
            let lambda = m.get(0, 0);
            if lambda <= 0.0 {
                return Err(Error::Degenerate("1x1 matrix with nonpositive entry".into()));
            }
            Ok(PerronData { lambda, right: vec![1.0], left: vec![1.0], iterations: 0 })
        }
        2 => perron_2x2(m),
        _ => {
            let (lambda, mut right, it_r) = power(m)?;
            let (_, mut left, it_l) = power(&m.transpose())?;
            normalize(&mut left, &mut right);
            Ok(PerronData { lambda, right, left, iterations: it_r.max(it_l) })
        }
    }
}

fn perron_2x2(m: &Dense) -> Result<PerronData> {
    let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    if b <= 0.0 || c <= 0.0 {
        // Reducible 2x2: fall back to the generic iteration.
        let (lambda, mut right, it_r) = power(m)?;
        let (_, mut left, it_l) = power(&m.transpose())?;
        normalize(&mut left, &mut right);
        return Ok(PerronData { lambda, right, left, iterations: it_r.max(it_l) });
    }
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    let lambda = if tr >= 0.0 { 0.5 * (tr + disc) } else { 2.0 * det / (tr - disc) };
    // (M − λ) r = 0 via the first row; l (M − λ) = 0 via the first column.
    let mut right = vec![b, lambda - a];
    let mut left = vec![c, lambda - a];
    normalize(&mut left, &mut right);
    Ok(PerronData { lambda, right, left, iterations: 0 })
}
