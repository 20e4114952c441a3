//! Topological pressure by truncated limits and by the Perron root.

use crate::error::{invalid, Error, Result};
use crate::symbolic::{IncidenceMatrix, Symbol, Word, ENUMERATION_BUDGET};

use super::conformal::ConformalOperator;
use super::eigen::{perron, Dense};
use super::potential::{LocalPotential, Potential};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PressureMethod {
    TruncatedLimit,
    Spectral,
}

impl PressureMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            PressureMethod::TruncatedLimit => "truncated-limit",
            PressureMethod::Spectral => "spectral",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PressureEstimate {
    pub value: f64,
    pub depth: usize,
    /// (1/n) log Z_n for n = 1..depth (truncated-limit method only).
    pub partials: Vec<f64>,
    pub method: PressureMethod,
    pub warning: Option<String>,
    /// Tail bound from the summability certificate for truncated alphabets.
    pub truncation_tail: f64,
}

/// Transition structure on admissible m-blocks of a locally constant potential.
#[derive(Clone, Debug)]
pub struct BlockGraph {
    pub alphabet: usize,
    pub block_len: usize,
    pub blocks: Vec<Word>,
    /// Dense lookup from the mixed-radix code of an m-word to its block index.
    lookup: Vec<usize>,
    /// For block b and appended symbol s: (next block, f on the window) if allowed.
    pub edges: Vec<Vec<(Symbol, usize, f64)>>,
}

impl BlockGraph {
    pub fn build(f: &LocalPotential, a: &IncidenceMatrix) -> Result<Self> {
        let m = f.depth().saturating_sub(1).max(1);
        let blocks = a.enumerate(m, ENUMERATION_BUDGET)?;
        let alphabet = a.size();
        let mut lookup = vec![usize::MAX; alphabet.pow(m as u32)];
        for (i, b) in blocks.iter().enumerate() {
            lookup[code(b.symbols(), alphabet)] = i;
        }
        let mut edges = vec![Vec::new(); blocks.len()];
        for (i, b) in blocks.iter().enumerate() {
            let last = b.last().expect("blocks are non-empty");
            for s in a.successors(last) {
                let extended = b.extended(s);
                let next = lookup[code(&extended.symbols()[1..], alphabet)];
                let window = if f.depth() == 1 { f.value(b.symbols()) } else { f.value(extended.symbols()) };
                if window > f64::NEG_INFINITY {
                    edges[i].push((s, next, window));
                }
            }
        }
        Ok(BlockGraph { alphabet, block_len: m, blocks, lookup, edges })
    }

    pub fn index_of(&self, symbols: &[Symbol]) -> Option<usize> {
        if symbols.len() != self.block_len || symbols.iter().any(|&s| s as usize >= self.alphabet) {
            return None;
        }
        let i = self.lookup[code(symbols, self.alphabet)];
        (i != usize::MAX).then_some(i)
    }

    pub fn weight_matrix(&self) -> Dense {
        let mut m = Dense::zeros(self.blocks.len());
        for (i, es) in self.edges.iter().enumerate() {
            for &(_, j, w) in es {
                m.set(i, j, m.get(i, j) + w.exp());
            }
        }
        m
    }

    pub fn support(&self) -> Result<IncidenceMatrix> {
        let n = self.blocks.len();
        let mut rows = vec![vec![0u8; n]; n];
        for (i, es) in self.edges.iter().enumerate() {
            for &(_, j, _) in es {
                rows[i][j] = 1;
            }
        }
        IncidenceMatrix::new(rows)
    }
}

fn code(symbols: &[Symbol], alphabet: usize) -> usize {
    symbols.iter().fold(0usize, |acc, &s| acc * alphabet + s as usize)
}

/// Streaming log-sum-exp accumulator.
#[derive(Clone, Copy, Debug)]
struct Lse {
    max: f64,
    sum: f64,
}

impl Lse {
    fn new() -> Self {
        Lse { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn add(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v > self.max {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.sum += (v - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// log Z_n = log Σ_{ω ∈ E^n_A} exp(sup_{[ω]} S_n f).
pub fn log_partition_sum(f: &Potential, a: &IncidenceMatrix, n: usize) -> Result<f64> {
    if n == 0 {
        return invalid("partition sums need n ≥ 1");
    }
    let needed = (a.size() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if needed > ENUMERATION_BUDGET {
        return Err(Error::Budget { needed, budget: ENUMERATION_BUDGET });
    }
    let mut acc = Lse::new();
    match f {
        Potential::Local(l) => {
            // Windows lying inside ω are summed on the way down; the last depth−1
            // windows depend on the continuation and are maximized at the leaf.
            let mut cache = std::collections::HashMap::new();
            let mut cur = Vec::with_capacity(n);
            local_dfs(l, a, n, &mut cur, 0.0, &mut acc, &mut cache);
        }
        Potential::GaussT { .. } => {
            for w in a.enumerate(n, ENUMERATION_BUDGET)? {
                acc.add(f.birkhoff_sup(&w, a)?);
            }
        }
    }
    Ok(acc.value())
}

fn local_dfs(
    l: &LocalPotential,
    a: &IncidenceMatrix,
    n: usize,
    cur: &mut Vec<Symbol>,
    inside: f64,
    acc: &mut Lse,
    cache: &mut std::collections::HashMap<Vec<Symbol>, f64>,
) {
    if cur.len() == n {
        let k = l.depth();
        let tail_key: Vec<Symbol> = cur[n.saturating_sub(k - 1).min(n)..].to_vec();
        // The trailing windows see only the last k − 1 symbols plus the continuation,
        // which is what birkhoff_sup of that short word maximizes.
        let tail = *cache.entry(tail_key.clone()).or_insert_with(|| {
            if tail_key.is_empty() {
                0.0
            } else {
                Potential::Local(l.clone()).birkhoff_sup(&Word::new(tail_key), a).unwrap_or(f64::NEG_INFINITY)
            }
        });
        acc.add(inside + tail);
        return;
    }
    for s in 0..a.size() as Symbol {
        if cur.last().is_none_or(|&p| a.allows(p, s)) {
            cur.push(s);
            let len = cur.len();
            let k = l.depth();
            // Every window completed here starts at len − k ≤ n − k, so it lies inside ω.
            let add = if len >= k { l.value(&cur[len - k..]) } else { 0.0 };
            local_dfs(l, a, n, cur, inside + add, acc, cache);
            cur.pop();
        }
    }
}

pub fn pressure(f: &Potential, a: &IncidenceMatrix, depth: usize, method: PressureMethod) -> Result<PressureEstimate> {
    if depth == 0 {
        return invalid("pressure depth must be ≥ 1");
    }
    let truncation_tail = f.summability(a)?.tail_bound;
    match method {
        PressureMethod::TruncatedLimit => truncated(f, a, depth, truncation_tail, None),
        PressureMethod::Spectral => match f {
            Potential::Local(l) => {
                let g = BlockGraph::build(l, a)?;
                let support = g.support()?;
                if support.irreducibility_witness(support.size()).is_none() || !support.is_primitive() {
                    return truncated(
                        f,
                        a,
                        depth,
                        truncation_tail,
                        Some("weighted matrix is not primitive; fell back to truncated-limit".into()),
                    );
                }
                let p = perron(&g.weight_matrix())?;
                Ok(PressureEstimate {
                    value: p.lambda.ln(),
                    depth,
                    partials: Vec::new(),
                    method,
                    warning: None,
                    truncation_tail,
                })
            }
            Potential::GaussT { t } => {
                let op = ConformalOperator::gauss(*t, a.size())?;
                let eig = op.solve()?;
                Ok(PressureEstimate {
                    value: eig.lambda.ln(),
                    depth,
                    partials: Vec::new(),
                    method,
                    warning: None,
                    truncation_tail,
                })
            }
        },
    }
}

fn truncated(
    f: &Potential,
    a: &IncidenceMatrix,
    depth: usize,
    truncation_tail: f64,
    warning: Option<String>,
) -> Result<PressureEstimate> {
    let mut partials = Vec::with_capacity(depth);
    for n in 1..=depth {
        partials.push(log_partition_sum(f, a, n)? / n as f64);
    }
    Ok(PressureEstimate {
        value: *partials.last().expect("depth ≥ 1"),
        depth,
        partials,
        method: PressureMethod::TruncatedLimit,
        warning,
        truncation_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_shift_zero() {
        let f = Potential::zero(2);
        let a = IncidenceMatrix::full(2);
        let s = pressure(&f, &a, 12, PressureMethod::Spectral).unwrap();
        assert!((s.value - 2f64.ln()).abs() < 1e-12);
        let t = pressure(&f, &a, 12, PressureMethod::TruncatedLimit).unwrap();
        assert!((t.value - 2f64.ln()).abs() < 1e-9);
        assert_eq!(t.partials.len(), 12);
    }

    #[test]
    fn golden_mean_zero() {
        let f = Potential::zero(2);
        let a = IncidenceMatrix::golden_mean();
        let s = pressure(&f, &a, 1, PressureMethod::Spectral).unwrap();
        assert!((s.value - 0.4812118250596034).abs() < 1e-10);
        // Z_n counts admissible words: (1/n) log F_{n+2}.
        let t = pressure(&f, &a, 12, PressureMethod::TruncatedLimit).unwrap();
        assert!((t.value - (377f64).ln() / 12.0).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_pressure_zero() {
        let f = Potential::bernoulli(&[0.3, 0.7]).unwrap();
        let a = IncidenceMatrix::full(2);
        let t = pressure(&f, &a, 10, PressureMethod::TruncatedLimit).unwrap();
        for p in &t.partials {
            assert!(p.abs() < 1e-12);
        }
        let s = pressure(&f, &a, 1, PressureMethod::Spectral).unwrap();
        assert!(s.value.abs() < 1e-14);
    }

    #[test]
    fn markov_truncated_sup_is_exact() {
        // Depth-2 potential: sup over [ω] of S_n f includes a max over the next symbol.
        let f = Potential::markov_depth1(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let a = IncidenceMatrix::golden_mean();
        let z1 = log_partition_sum(&f, &a, 1).unwrap();
        // ω = 1: sup_c log P_{1c} = log 0.5; ω = 2: log P_{21} = 0.
        assert!((z1 - (0.5f64 + 1.0).ln()).abs() < 1e-14);
        let spec = pressure(&f, &a, 1, PressureMethod::Spectral).unwrap();
        assert!(spec.value.abs() < 1e-12);
        let t = pressure(&f, &a, 14, PressureMethod::TruncatedLimit).unwrap();
        assert!(t.value.abs() < 0.05);
    }

    #[test]
    fn periodic_matrix_falls_back() {
        let a = IncidenceMatrix::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let e = pressure(&Potential::zero(2), &a, 6, PressureMethod::Spectral).unwrap();
        assert!(e.warning.is_some());
        assert_eq!(e.method, PressureMethod::TruncatedLimit);
        assert!(e.value.abs() < 0.2);
    }
}
