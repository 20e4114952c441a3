//! Transfer operator of a conformal interval system, discretized by Chebyshev collocation.
//!
//! L_t g(x) = Σ_e |φ_e'(x)|^t g(φ_e(x)) on [0,1]. Right eigenvector h, left eigenvector
//! (the conformal measure ν as quadrature weights), eigenvalue λ = e^{P}.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::maps::Contraction;
use crate::symbolic::Word;

use super::potential::gauss_tail_bound;

pub const DEFAULT_NODES: usize = 48;
const CDF_GRID: usize = 1 << 16;

#[derive(Clone, Debug)]
pub struct ConformalOperator {
    pub branches: Vec<Contraction>,
    pub t: f64,
    pub nodes: usize,
    /// Bound on the mass of omitted branches (0 for finite systems).
    pub tail_bound: f64,
}

/// Chebyshev points of the second kind mapped to [0,1].
fn chebyshev_nodes(m: usize) -> Vec<f64> {
    (0..m).map(|j| 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / (m - 1) as f64).cos())).collect()
}

fn barycentric_weights(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == m - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Clenshaw–Curtis weights on [0,1] for the second-kind nodes.
fn clenshaw_curtis(m: usize) -> Vec<f64> {
    let n = m - 1;
    (0..m)
        .map(|k| {
            let theta = std::f64::consts::PI * k as f64 / n as f64;
            let mut s = 0.0;
            for j in 1..=n / 2 {
                let b = if 2 * j == n { 1.0 } else { 2.0 };
                s += b / (4.0 * (j * j) as f64 - 1.0) * (2.0 * j as f64 * theta).cos();
            }
            let c = if k == 0 || k == n { 1.0 } else { 2.0 };
            0.5 * c / n as f64 * (1.0 - s)
        })
        .collect()
}

/// Lagrange basis values at y.
fn basis(nodes: &[f64], bw: &[f64], y: f64, out: &mut [f64]) {
    if let Some(j) = nodes.iter().position(|&x| x == y) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[j] = 1.0;
        return;
    }
    let mut total = 0.0;
    for j in 0..nodes.len() {
        out[j] = bw[j] / (y - nodes[j]);
        total += out[j];
    }
    out.iter_mut().for_each(|v| *v /= total);
}

fn interpolate(nodes: &[f64], bw: &[f64], values: &[f64], y: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..nodes.len() {
        let d = y - nodes[j];
        if d == 0.0 {
            return values[j];
        }
        let q = bw[j] / d;
        num += q * values[j];
        den += q;
    }
    num / den
}

impl ConformalOperator {
    /// Continued-fraction system truncated at N branches with weight |φ_n'|^t.
    pub fn gauss(t: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("truncation N must be ≥ 1");
        }
        if t <= 0.5 {
            return Err(Error::NotSummable(format!("gauss_t requires t > 1/2, got {t}")));
        }
        Ok(ConformalOperator {
            branches: (1..=n as u64).map(Contraction::continued_fraction).collect(),
            t,
            nodes: DEFAULT_NODES,
            tail_bound: gauss_tail_bound(t, n),
        })
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes.max(8);
        self
    }

    pub fn solve(&self) -> Result<ConformalGibbs> {
        let m = self.nodes;
        let nodes = chebyshev_nodes(m);
        let bw = barycentric_weights(m);
        let mut mat = vec![0.0; m * m];
        let mut row = vec![0.0; m];
        for (i, &x) in nodes.iter().enumerate() {
            for phi in &self.branches {
                let y = phi.apply(x);
                let weight = phi.derivative(x).abs().powf(self.t);
                basis(&nodes, &bw, y, &mut row);
                for j in 0..m {
                    mat[i * m + j] += weight * row[j];
                }
            }
        }
        let (lambda, h) = dominant(&mat, m, false)?;
        let (_, w) = dominant(&mat, m, true)?;
        // Normalize: ν total mass 1, ∫ h dν = 1.
        let sw: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / sw).collect();
        let hn: f64 = w.iter().zip(&h).map(|(a, b)| a * b).sum();
        let h: Vec<f64> = h.iter().map(|v| v / hn).collect();
        let cc = clenshaw_curtis(m);
        let mut g = ConformalGibbs {
            branches: self.branches.clone(),
            t: self.t,
            lambda,
            nodes,
            bw,
            h,
            w,
            cc,
            tail_bound: self.tail_bound,
            cdf: Vec::new(),
        };
        if (self.t - 1.0).abs() < 1e-12 {
            g.cdf = g.tabulate_cdf();
        }
        Ok(g)
    }
}

/// Power iteration on the collocation matrix (or its transpose).
fn dominant(mat: &[f64], m: usize, transpose: bool) -> Result<(f64, Vec<f64>)> {
    let mut v = vec![1.0; m];
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let mut w = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                let a = if transpose { mat[j * m + i] } else { mat[i * m + j] };
                w[i] += a * v[j];
            }
        }
        let norm = w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate("transfer operator iteration collapsed".into()));
        }
        let sign = if w.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        w.iter_mut().for_each(|x| *x *= sign / norm);
        let diff = w.iter().zip(&v).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        lambda = norm;
        v = w;
        if diff < 1e-14 {
            break;
        }
    }
    Ok((lambda, v))
}

/// Eigen-data of the discretized operator and the induced measure on [0,1].
#[derive(Clone, Debug)]
pub struct ConformalGibbs {
    branches: Vec<Contraction>,
    pub t: f64,
    pub lambda: f64,
    nodes: Vec<f64>,
    bw: Vec<f64>,
    h: Vec<f64>,
    w: Vec<f64>,
    cc: Vec<f64>,
    pub tail_bound: f64,
    cdf: Vec<f64>,
}

impl ConformalGibbs {
    pub fn pressure(&self) -> f64 {
        self.lambda.ln()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn h(&self, x: f64) -> f64 {
        interpolate(&self.nodes, &self.bw, &self.h, x)
    }

    /// μ(π[ω]) = λ^{−n} ∫ |φ_ω'|^t h∘φ_ω dν; for t = 1, ∫ over φ_ω([0,1]) of the density.
    pub fn cylinder_mass(&self, word: &Word) -> Result<f64> {
        let mut map = Contraction::affine(1.0, 0.0);
        for &s in word.symbols() {
            let phi = self
                .branches
                .get(s as usize)
                .ok_or_else(|| Error::Inadmissible(format!("symbol {} beyond truncation", s + 1)))?;
            map = map.compose(phi);
        }
        if !self.cdf.is_empty() {
            let (a, b) = map.image(0.0, 1.0);
            return Ok(self.h_integral_on(a, b) / self.h_integral());
        }
        let mut total = 0.0;
        for (j, &x) in self.nodes.iter().enumerate() {
            total += self.w[j] * map.derivative(x).abs().powf(self.t) * self.h(map.apply(x));
        }
        Ok(total * self.lambda.powi(-(word.len() as i32)))
    }

    fn require_sampling(&self) -> Result<()> {
        if self.cdf.is_empty() {
            return Err(Error::Unsupported(format!(
                "sampling the conformal measure is implemented for t = 1 only (t = {})",
                self.t
            )));
        }
        Ok(())
    }

    /// Density of μ with respect to Lebesgue. For t = 1 the weight |φ'| makes L the
    /// Perron–Frobenius operator of Lebesgue measure, so ν is Lebesgue and dμ/dx = h/∫h.
    pub fn density(&self, x: f64) -> Result<f64> {
        self.require_sampling()?;
        Ok(self.h(x) / self.h_integral())
    }

    fn h_integral(&self) -> f64 {
        self.cc.iter().zip(&self.h).map(|(a, b)| a * b).sum()
    }

    /// ∫_a^b h dx by Clenshaw–Curtis on [a, b].
    fn h_integral_on(&self, a: f64, b: f64) -> f64 {
        let len = b - a;
        self.nodes.iter().zip(&self.cc).map(|(&x, &c)| c * len * self.h(a + len * x)).sum()
    }

    fn tabulate_cdf(&self) -> Vec<f64> {
        let mut cdf = Vec::with_capacity(CDF_GRID + 1);
        cdf.push(0.0);
        let dx = 1.0 / CDF_GRID as f64;
        let mut prev = self.h(0.0);
        let mut acc = 0.0;
        for i in 1..=CDF_GRID {
            let x = i as f64 * dx;
            let mid = self.h(x - 0.5 * dx);
            let cur = self.h(x);
            acc += dx * (prev + 4.0 * mid + cur) / 6.0;
            cdf.push(acc);
            prev = cur;
        }
        cdf.iter_mut().for_each(|v| *v /= acc);
        cdf
    }

    /// μ([0, x]) for t = 1.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.require_sampling()?;
        let x = x.clamp(0.0, 1.0);
        let pos = x * CDF_GRID as f64;
        let i = (pos.floor() as usize).min(CDF_GRID - 1);
        let frac = pos - i as f64;
        Ok(self.cdf[i] + frac * (self.cdf[i + 1] - self.cdf[i]))
    }

    /// Draw x ~ μ by inverting the tabulated CDF.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        self.require_sampling()?;
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, CDF_GRID);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        let x = ((i - 1) as f64 + frac) / CDF_GRID as f64;
        Ok(x.max(f64::MIN_POSITIVE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clenshaw_curtis_integrates_polynomials() {
        let m = 17;
        let x = chebyshev_nodes(m);
        let w = clenshaw_curtis(m);
        let s0: f64 = w.iter().sum();
        let s3: f64 = w.iter().zip(&x).map(|(a, b)| a * b.powi(3)).sum();
        assert!((s0 - 1.0).abs() < 1e-14);
        assert!((s3 - 0.25).abs() < 1e-14);
    }

    #[test]
    fn full_gauss_like_small_truncation() {
        // Finite dyadic-like check: two affine halves give Lebesgue with λ = 1 at t = 1.
        let op = ConformalOperator {
            branches: vec![Contraction::affine(0.5, 0.0), Contraction::affine(0.5, 0.5)],
            t: 1.0,
            nodes: 16,
            tail_bound: 0.0,
        };
        let g = op.solve().unwrap();
        assert!((g.lambda - 1.0).abs() < 1e-13);
        let m = g.cylinder_mass(&Word::parse("1,2").unwrap()).unwrap();
        assert!((m - 0.25).abs() < 1e-12);
        assert!((g.cdf(0.3).unwrap() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn gauss_measure_first_cylinder() {
        let g = ConformalOperator::gauss(1.0, 2000).unwrap().solve().unwrap();
        let m1 = g.cylinder_mass(&Word::parse("1").unwrap()).unwrap();
        assert!((m1 - (4.0f64 / 3.0).log2()).abs() < 2e-3, "{m1}");
        let d = g.density(0.5).unwrap();
        assert!((d - 1.0 / (1.5 * 2f64.ln())).abs() < 5e-3, "{d}");
    }

    #[test]
    fn sampling_refused_off_t1() {
        let g = ConformalOperator::gauss(1.5, 50).unwrap().solve().unwrap();
        assert!(g.density(0.2).is_err());
        assert!(g.pressure() < 0.0);
    }
}
