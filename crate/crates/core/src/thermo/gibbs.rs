//! Gibbs states of locally constant potentials and their Markov realizations.

use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::seeds::SeedStream;
use crate::symbolic::{IncidenceMatrix, PathRule, Symbol, SymbolPath, SymbolSource, Word, ENUMERATION_BUDGET};

use super::eigen::perron;
use super::potential::{LocalPotential, Potential};
use super::pressure::BlockGraph;

/// Stationary Markov chain on m-blocks: the sampling realization of a Gibbs state.
#[derive(Debug)]
pub struct BlockChain {
    pub label: String,
    pub alphabet: usize,
    pub block_len: usize,
    pub blocks: Vec<Word>,
    pub stationary: Vec<f64>,
    /// transitions[b] = [(appended symbol, next block, probability)]
    pub transitions: Vec<Vec<(Symbol, usize, f64)>>,
    /// Dense (block, symbol) → probability, 0 when not allowed.
    step: Vec<f64>,
    /// Dense (block, symbol) → next block.
    next: Vec<usize>,
    initial_cdf: Vec<f64>,
    row_cdf: Vec<Vec<(f64, Symbol, usize)>>,
    /// Some(k) when the chain is i.i.d. uniform on 2^k symbols.
    uniform_bits: Option<u32>,
    graph: BlockGraph,
}

impl BlockChain {
    fn new(label: String, graph: BlockGraph, stationary: Vec<f64>, transitions: Vec<Vec<(Symbol, usize, f64)>>) -> Self {
        let alphabet = graph.alphabet;
        let nb = graph.blocks.len();
        let mut step = vec![0.0; nb * alphabet];
        let mut next = vec![usize::MAX; nb * alphabet];
        let mut row_cdf = Vec::with_capacity(nb);
        for (b, row) in transitions.iter().enumerate() {
            let mut acc = 0.0;
            let mut cdf = Vec::with_capacity(row.len());
            for &(s, j, p) in row {
                step[b * alphabet + s as usize] = p;
                next[b * alphabet + s as usize] = j;
                acc += p;
                cdf.push((acc, s, j));
            }
            if let Some(last) = cdf.last_mut() {
                last.0 = f64::INFINITY;
            }
            row_cdf.push(cdf);
        }
        let mut initial_cdf = Vec::with_capacity(nb);
        let mut acc = 0.0;
        for &p in &stationary {
            acc += p;
            initial_cdf.push(acc);
        }
        if let Some(last) = initial_cdf.last_mut() {
            *last = f64::INFINITY;
        }
        let uniform_bits = if graph.block_len == 1
            && alphabet.is_power_of_two()
            && transitions.iter().all(|row| {
                row.len() == alphabet && row.iter().all(|&(_, _, p)| (p * alphabet as f64 - 1.0).abs() < 1e-15)
            }) {
            Some(alphabet.trailing_zeros())
        } else {
            None
        };
        BlockChain {
            label,
            alphabet,
            block_len: graph.block_len,
            blocks: graph.blocks.clone(),
            stationary,
            transitions,
            step,
            next,
            initial_cdf,
            row_cdf,
            uniform_bits,
            graph,
        }
    }

    pub fn block_index(&self, symbols: &[Symbol]) -> Option<usize> {
        self.graph.index_of(symbols)
    }

    pub fn prob(&self, block: usize, s: Symbol) -> f64 {
        self.step[block * self.alphabet + s as usize]
    }

    pub fn next_block(&self, block: usize, s: Symbol) -> usize {
        self.next[block * self.alphabet + s as usize]
    }

    /// max_b |Σ_a π_a P_ab − π_b|
    pub fn stationarity_error(&self) -> f64 {
        let mut out = vec![0.0; self.blocks.len()];
        for (a, row) in self.transitions.iter().enumerate() {
            for &(_, b, p) in row {
                out[b] += self.stationary[a] * p;
            }
        }
        out.iter().zip(&self.stationary).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
    }

    /// μ([ω]) for the stationary chain.
    pub fn cylinder_measure(&self, word: &Word) -> f64 {
        let s = word.symbols();
        let m = self.block_len;
        if s.is_empty() {
            return 1.0;
        }
        if s.iter().any(|&x| x as usize >= self.alphabet) {
            return 0.0;
        }
        if s.len() < m {
            // Sum over admissible extensions to a full block.
            return self
                .blocks
                .iter()
                .enumerate()
                .filter(|(_, b)| b.symbols()[..s.len()] == *s)
                .map(|(i, _)| self.stationary[i])
                .sum();
        }
        let Some(mut b) = self.block_index(&s[..m]) else { return 0.0 };
        let mut mass = self.stationary[b];
        for &x in &s[m..] {
            let p = self.prob(b, x);
            if p == 0.0 {
                return 0.0;
            }
            mass *= p;
            b = self.next_block(b, x);
        }
        mass
    }

    /// μ([ωe]) given μ([ω]) = mass, in O(|ω|) only when |ω| < m.
    pub fn extend_mass(&self, word: &Word, mass: f64, e: Symbol) -> f64 {
        let m = self.block_len;
        let s = word.symbols();
        if s.len() < m || (e as usize) >= self.alphabet {
            return self.cylinder_measure(&word.extended(e));
        }
        match self.block_index(&s[s.len() - m..]) {
            Some(b) => mass * self.prob(b, e),
            None => 0.0,
        }
    }

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.initial_cdf.partition_point(|&c| c <= u).min(self.blocks.len() - 1)
    }

    fn sample_step(&self, block: usize, rng: &mut ChaCha8Rng) -> (Symbol, usize) {
        let row = &self.row_cdf[block];
        let u: f64 = rng.random();
        let i = row.partition_point(|&(c, _, _)| c <= u).min(row.len() - 1);
        (row[i].1, row[i].2)
    }
}

/// Path rule: a trajectory of the chain with a given seed stream.
#[derive(Debug, Clone)]
pub struct ChainRule {
    pub chain: Arc<BlockChain>,
    pub seeds: SeedStream,
    pub task: u64,
}

struct ChainSource {
    chain: Arc<BlockChain>,
    rng: ChaCha8Rng,
    block: usize,
    pending: Vec<Symbol>,
    bits: u64,
    bits_left: u32,
}

impl SymbolSource for ChainSource {
    fn next_symbol(&mut self) -> Symbol {
        if let Some(k) = self.chain.uniform_bits {
            if self.bits_left < k {
                self.bits = self.rng.next_u64();
                self.bits_left = 64;
            }
            let s = (self.bits & ((1u64 << k) - 1)) as Symbol;
            self.bits >>= k;
            self.bits_left -= k;
            return s;
        }
        if let Some(s) = self.pending.pop() {
            return s;
        }
        let (s, next) = self.chain.sample_step(self.block, &mut self.rng);
        self.block = next;
        s
    }

    fn fill(&mut self, out: &mut [Symbol]) {
        match self.chain.uniform_bits {
            Some(k) => {
                let mask = (1u64 << k) - 1;
                for s in out {
                    if self.bits_left < k {
                        self.bits = self.rng.next_u64();
                        self.bits_left = 64;
                    }
                    *s = (self.bits & mask) as Symbol;
                    self.bits >>= k;
                    self.bits_left -= k;
                }
            }
            None => {
                for s in out {
                    *s = self.next_symbol();
                }
            }
        }
    }
}

impl PathRule for ChainRule {
    fn source(&self) -> Box<dyn SymbolSource> {
        let mut rng = self.seeds.rng(self.task);
        let chain = self.chain.clone();
        let (block, pending) = if chain.uniform_bits.is_some() {
            (0, Vec::new())
        } else {
            let b = chain.sample_initial(&mut rng);
            let mut p = chain.blocks[b].symbols().to_vec();
            p.reverse();
            (b, p)
        };
        Box::new(ChainSource { chain, rng, block, pending, bits: 0, bits_left: 0 })
    }

    fn key(&self) -> String {
        format!("chain[{}]/{}:{}/{}", self.chain.label, self.seeds.master, self.seeds.domain, self.task)
    }
}

#[derive(Clone, Debug)]
pub struct GibbsState {
    pub matrix: IncidenceMatrix,
    pub potential: Potential,
    pub chain: Arc<BlockChain>,
    pub lambda: f64,
    pub pressure: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// Gibbs constant from the eigen-data.
    pub q: f64,
    pub entropy: f64,
    pub mean_potential: f64,
    /// min over n ≤ DECAY_DEPTH of −(1/n) log max μ([ω|_n]).
    pub decay: f64,
    pub truncation_tail: f64,
}

pub const DECAY_DEPTH: usize = 64;

impl GibbsState {
    pub fn new(f: &Potential, a: &IncidenceMatrix) -> Result<Self> {
        let Some(local) = f.as_local() else {
            return Err(Error::Unsupported(
                "symbolic Gibbs states need a locally constant potential; use the conformal construction for gauss_t"
                    .into(),
            ));
        };
        if a.irreducibility_witness(a.size()).is_none() {
            return Err(Error::NotIrreducible(a.size()));
        }
        let summ = f.summability(a)?;
        let graph = BlockGraph::build(local, a)?;
        if graph.support()?.irreducibility_witness(graph.blocks.len()).is_none() {
            return Err(Error::NotIrreducible(graph.blocks.len()));
        }
        let p = perron(&graph.weight_matrix())?;
        let lambda = p.lambda;
        let (l, r) = (p.left, p.right);
        let nb = graph.blocks.len();
        let stationary: Vec<f64> = (0..nb).map(|i| l[i] * r[i]).collect();
        let mut transitions = vec![Vec::new(); nb];
        for (i, es) in graph.edges.iter().enumerate() {
            for &(s, j, w) in es {
                transitions[i].push((s, j, w.exp() * r[j] / (lambda * r[i])));
            }
        }
        let mut entropy = 0.0;
        let mut mean = 0.0;
        for (i, es) in graph.edges.iter().enumerate() {
            for (k, &(_, _, w)) in es.iter().enumerate() {
                let pij = transitions[i][k].2;
                if pij > 0.0 {
                    entropy -= stationary[i] * pij * pij.ln();
                    mean += stationary[i] * pij * w;
                }
            }
        }
        let q = gibbs_constant(local, a, &graph, &l, &r, lambda)?;
        let label = format!("{:?}|{}", f, a.to_text().replace('\n', ";"));
        let chain = Arc::new(BlockChain::new(label, graph, stationary, transitions));
        let mut state = GibbsState {
            matrix: a.clone(),
            potential: f.clone(),
            chain,
            lambda,
            pressure: lambda.ln(),
            left: l,
            right: r,
            q,
            entropy,
            mean_potential: mean,
            decay: 0.0,
            truncation_tail: summ.tail_bound,
        };
        state.decay = state.decay_exponent(DECAY_DEPTH);
        Ok(state)
    }

    pub fn block_len(&self) -> usize {
        self.chain.block_len
    }

    pub fn cylinder_measure(&self, word: &Word) -> f64 {
        if !self.matrix.is_admissible(word) {
            return 0.0;
        }
        self.chain.cylinder_measure(word)
    }

    /// max over admissible n-words of μ([ω]) by a max-product recursion on blocks.
    pub fn max_cylinder_measure(&self, n: usize) -> f64 {
        let c = &self.chain;
        let m = c.block_len;
        if n == 0 {
            return 1.0;
        }
        if n <= m {
            return c
                .blocks
                .iter()
                .map(|b| c.cylinder_measure(&b.prefix(n)))
                .fold(0.0f64, f64::max);
        }
        let mut best = c.stationary.clone();
        for _ in m..n {
            let mut nb = vec![0.0f64; best.len()];
            for (b, row) in c.transitions.iter().enumerate() {
                for &(_, j, p) in row {
                    nb[j] = nb[j].max(best[b] * p);
                }
            }
            best = nb;
        }
        best.into_iter().fold(0.0f64, f64::max)
    }

    pub fn decay_exponent(&self, depth: usize) -> f64 {
        (1..=depth)
            .map(|n| -self.max_cylinder_measure(n).ln() / n as f64)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sample_rule(&self, seeds: SeedStream, task: u64) -> ChainRule {
        ChainRule { chain: self.chain.clone(), seeds, task }
    }

    /// An admissible path distributed according to μ, deterministic in (seeds, task);
    /// `length` symbols are materialized up front.
    pub fn sample_typical(&self, length: usize, seeds: SeedStream, task: u64) -> SymbolPath {
        let path = SymbolPath::from_rule(Arc::new(self.sample_rule(seeds, task)));
        if length > 0 {
            path.prefix(length);
        }
        path
    }

    /// Scan every admissible cylinder up to `depth` and compare with exp(S_n f − nP).
    pub fn verify_gibbs_property(&self, depth: usize) -> Result<GibbsAudit> {
        let needed: u128 = (1..=depth).map(|n| self.matrix.count_admissible(n)).sum();
        if needed > ENUMERATION_BUDGET {
            return Err(Error::Budget { needed, budget: ENUMERATION_BUDGET });
        }
        let Potential::Local(local) = &self.potential else { unreachable!("checked at construction") };
        let mut audit = GibbsAudit {
            depth,
            q: self.q,
            min_ratio: f64::INFINITY,
            max_ratio: 0.0,
            argmin: Word::empty(),
            argmax: Word::empty(),
            cylinders: 0,
            max_additivity_error: 0.0,
            normalization_error: 0.0,
            pass: false,
        };
        let mut bounds_cache = std::collections::HashMap::new();
        let mut cur = Vec::new();
        self.audit_dfs(local, depth, &mut cur, 1.0, &mut audit, &mut bounds_cache)?;
        let first: f64 = (0..self.matrix.size() as Symbol)
            .map(|e| self.cylinder_measure(&Word::new(vec![e])))
            .sum();
        audit.normalization_error = (first - 1.0).abs();
        let slack = 1.0 + 1e-12;
        audit.pass = audit.min_ratio * self.q * slack >= 1.0
            && audit.max_ratio <= self.q * slack
            && audit.max_additivity_error <= 1e-12
            && audit.normalization_error <= 1e-12;
        Ok(audit)
    }

    fn audit_dfs(
        &self,
        local: &LocalPotential,
        depth: usize,
        cur: &mut Vec<Symbol>,
        mass: f64,
        audit: &mut GibbsAudit,
        cache: &mut std::collections::HashMap<Vec<Symbol>, (f64, f64)>,
    ) -> Result<()> {
        let n = cur.len();
        if n >= self.block_len().max(1) {
            let word = Word::new(cur.clone());
            let (lo, hi) = self.birkhoff_bounds_cached(local, &word, cache)?;
            let np = n as f64 * self.pressure;
            let max_r = mass / (lo - np).exp();
            let min_r = mass / (hi - np).exp();
            audit.cylinders += 1;
            if max_r > audit.max_ratio {
                audit.max_ratio = max_r;
                audit.argmax = word.clone();
            }
            if min_r < audit.min_ratio {
                audit.min_ratio = min_r;
                audit.argmin = word;
            }
        }
        if n == depth {
            return Ok(());
        }
        let word = Word::new(cur.clone());
        let mut children = 0.0;
        for s in 0..self.matrix.size() as Symbol {
            if cur.last().is_none_or(|&p| self.matrix.allows(p, s)) {
                let child = if n == 0 {
                    self.cylinder_measure(&Word::new(vec![s]))
                } else {
                    self.chain.extend_mass(&word, mass, s)
                };
                children += child;
                cur.push(s);
                self.audit_dfs(local, depth, cur, child, audit, cache)?;
                cur.pop();
            }
        }
        if n > 0 {
            audit.max_additivity_error = audit.max_additivity_error.max((children - mass).abs());
        }
        Ok(())
    }

    fn birkhoff_bounds_cached(
        &self,
        local: &LocalPotential,
        word: &Word,
        cache: &mut std::collections::HashMap<Vec<Symbol>, (f64, f64)>,
    ) -> Result<(f64, f64)> {
        // Windows fully inside the word are exact; only the last depth − 1 shifts
        // carry a spread, so cache on that suffix.
        let s = word.symbols();
        let k = local.depth();
        let n = s.len();
        let split = n.saturating_sub(k - 1);
        let inside: f64 = (0..split).map(|j| local.value(&s[j..])).sum();
        let key = s[split..].to_vec();
        let tail = match cache.get(&key) {
            Some(v) => *v,
            None => {
                let mut lo = 0.0;
                let mut hi = 0.0;
                for j in 0..key.len() {
                    let (a, b) = self.potential.cylinder_bounds(&Word::new(key[j..].to_vec()), &self.matrix)?;
                    lo += a;
                    hi += b;
                }
                cache.insert(key, (lo, hi));
                (lo, hi)
            }
        };
        Ok((inside + tail.0, inside + tail.1))
    }

    /// Exact μ(T^{−n}[a] ∩ [b]) / (μ([a]) μ([b])) for n ≥ |b| and |a|, |b| ≥ m.
    pub fn mixing_ratio(&self, a: &Word, b: &Word, gap: usize) -> Result<f64> {
        let m = self.block_len();
        if gap < b.len() {
            return invalid(format!("gap {gap} must be at least the depth {} of the conditioning cylinder", b.len()));
        }
        if a.len() < m || b.len() < m {
            return Err(Error::Unsupported("exact mixing ratios need cylinders of length ≥ block length".into()));
        }
        let (ma, mb) = (self.cylinder_measure(a), self.cylinder_measure(b));
        if ma == 0.0 || mb == 0.0 {
            return Err(Error::Degenerate("measure-zero cylinder in mixing probe".into()));
        }
        let c = &self.chain;
        let from = c.block_index(&b.symbols()[b.len() - m..]).expect("admissible");
        let to = c.block_index(&a.symbols()[..m]).expect("admissible");
        let steps = gap - b.len() + m;
        let mut v = vec![0.0; c.blocks.len()];
        v[from] = 1.0;
        for _ in 0..steps {
            let mut w = vec![0.0; v.len()];
            for (i, row) in c.transitions.iter().enumerate() {
                if v[i] != 0.0 {
                    for &(_, j, p) in row {
                        w[j] += v[i] * p;
                    }
                }
            }
            v = w;
        }
        Ok(v[to] / c.stationary[to])
    }

    /// Fit C (max ratio) and the envelope |ratio − 1| ≤ D γ^{n−k}.
    pub fn fit_mixing_constants(&self, probe_depth: usize, max_extra_gap: usize) -> Result<MixingFit> {
        let m = self.block_len();
        let mut probes = Vec::new();
        let mut per_gap = vec![0.0f64; max_extra_gap + 1];
        let mut c_max = 1.0f64;
        for kb in m..=probe_depth.max(m) {
            for b in self.matrix.enumerate(kb, ENUMERATION_BUDGET)? {
                for a in self.matrix.enumerate(m, ENUMERATION_BUDGET)? {
                    for extra in 0..=max_extra_gap {
                        let ratio = self.mixing_ratio(&a, &b, kb + extra)?;
                        c_max = c_max.max(ratio);
                        per_gap[extra] = per_gap[extra].max((ratio - 1.0).abs());
                        probes.push(MixingProbe { a: a.clone(), b: b.clone(), gap: kb + extra, ratio });
                    }
                }
            }
        }
        let floor = 1e-13;
        let pts: Vec<(f64, f64)> =
            per_gap.iter().enumerate().filter(|(_, &e)| e > floor).map(|(j, &e)| (j as f64, e.ln())).collect();
        let (d, gamma) = if pts.is_empty() {
            (0.0, 0.0)
        } else {
            let gamma = if pts.len() >= 2 {
                let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
                crate::stats::least_squares(&xs, &ys).map(|f| f.slope.exp()).unwrap_or(0.5).clamp(1e-6, 0.999)
            } else {
                0.5
            };
            let d = per_gap
                .iter()
                .enumerate()
                .map(|(j, &e)| e / gamma.powi(j as i32))
                .fold(0.0f64, f64::max);
            (d, gamma)
        };
        Ok(MixingFit { c: c_max, d, gamma, per_gap_deviation: per_gap, probes })
    }

    /// h_ν + ∫ f dν for the stationary chain of another kernel on the same blocks.
    pub fn free_energy_of_kernel(&self, kernel: &[Vec<f64>]) -> Result<f64> {
        let c = &self.chain;
        let nb = c.blocks.len();
        if kernel.len() != nb {
            return invalid("kernel must be indexed by blocks");
        }
        // Stationary vector by power iteration with damping.
        let mut pi = vec![1.0 / nb as f64; nb];
        for _ in 0..200_000 {
            let mut w = vec![0.0; nb];
            for (i, row) in c.transitions.iter().enumerate() {
                for (k, &(_, j, _)) in row.iter().enumerate() {
                    w[j] += pi[i] * kernel[i][k];
                }
            }
            let diff = w.iter().zip(&pi).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            pi = w.iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).collect();
            if diff < 1e-15 {
                break;
            }
        }
        let Potential::Local(local) = &self.potential else { unreachable!() };
        let mut total = 0.0;
        for (i, row) in c.transitions.iter().enumerate() {
            for (k, &(s, _, _)) in row.iter().enumerate() {
                let p = kernel[i][k];
                if p > 0.0 {
                    let block = &c.blocks[i];
                    let w = if local.depth() == 1 { local.value(block.symbols()) } else { local.value(block.extended(s).symbols()) };
                    total += pi[i] * p * (w - p.ln());
                }
            }
        }
        Ok(total)
    }
}

fn gibbs_constant(
    local: &LocalPotential,
    a: &IncidenceMatrix,
    graph: &BlockGraph,
    l: &[f64],
    r: &[f64],
    lambda: f64,
) -> Result<f64> {
    // μ([ω]) / exp(S_n f − nP) = l_{B1} r_{Blast} λ^{m} e^{−tail}, where tail is the sum
    // of f over the last m shifts, which depend on an extension of length k − 1.
    let m = graph.block_len;
    let k = local.depth();
    let mut q = 1.0f64;
    let lmin = l.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = l.iter().copied().fold(0.0f64, f64::max);
    for (bi, b) in graph.blocks.iter().enumerate() {
        let mut tails = Vec::new();
        let ext_len = k - 1;
        let exts = if ext_len == 0 { vec![Word::empty()] } else { a.enumerate(ext_len, ENUMERATION_BUDGET)? };
        for e in exts {
            let full = b.concat(&e);
            if !a.is_admissible(&full) {
                continue;
            }
            let s = full.symbols();
            let tail: f64 = (0..m).map(|j| local.value(&s[j..])).sum();
            if tail > f64::NEG_INFINITY {
                tails.push(tail);
            }
        }
        for tail in tails {
            let base = r[bi] * lambda.powi(m as i32) * (-tail).exp();
            for ratio in [lmin * base, lmax * base] {
                q = q.max(ratio).max(1.0 / ratio);
            }
        }
    }
    Ok(q)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsAudit {
    pub depth: usize,
    pub q: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub argmin: Word,
    pub argmax: Word,
    pub cylinders: usize,
    pub max_additivity_error: f64,
    pub normalization_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingProbe {
    pub a: Word,
    pub b: Word,
    pub gap: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingFit {
    pub c: f64,
    pub d: f64,
    pub gamma: f64,
    /// max |ratio − 1| over probes, indexed by gap − depth(B).
    pub per_gap_deviation: Vec<f64>,
    pub probes: Vec<MixingProbe>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    #[test]
    fn uniform_full_shift() {
        let g = GibbsState::new(&Potential::zero(2), &IncidenceMatrix::full(2)).unwrap();
        assert!((g.cylinder_measure(&w("1,2,2,1")) - 1.0 / 16.0).abs() < 1e-15);
        assert!((g.q - 1.0).abs() < 1e-12);
        assert!((g.entropy - 2f64.ln()).abs() < 1e-14);
        assert!((g.decay - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_closed_form() {
        let g = GibbsState::new(&Potential::bernoulli(&[0.3, 0.7]).unwrap(), &IncidenceMatrix::full(2)).unwrap();
        assert!((g.cylinder_measure(&w("1,2")) - 0.21).abs() < 1e-15);
        assert!(g.pressure.abs() < 1e-15);
        assert!((g.entropy - 0.6108643020548935).abs() < 1e-12);
        assert!((g.entropy + g.mean_potential - g.pressure).abs() < 1e-12);
        let audit = g.verify_gibbs_property(10).unwrap();
        assert!((audit.max_ratio - 1.0).abs() < 1e-12 && (audit.min_ratio - 1.0).abs() < 1e-12);
        assert!(audit.pass);
    }

    #[test]
    fn golden_mean_parry() {
        let g = GibbsState::new(&Potential::zero(2), &IncidenceMatrix::golden_mean()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        // Parry measure: μ([1]) = φ²/(1+φ²), P_11 = 1/φ.
        let mu1 = phi * phi / (1.0 + phi * phi);
        assert!((g.cylinder_measure(&w("1")) - mu1).abs() < 1e-14);
        assert!((g.cylinder_measure(&w("1,1")) - mu1 / phi).abs() < 1e-14);
        assert_eq!(g.cylinder_measure(&w("2,2")), 0.0);
        let audit = g.verify_gibbs_property(12).unwrap();
        assert!(audit.pass, "{audit:?}");
        assert!(audit.max_additivity_error <= 1e-12);
        assert!((g.entropy - phi.ln()).abs() < 1e-12);
        assert!(g.chain.stationarity_error() < 1e-12);
    }

    #[test]
    fn markov_depth2_is_its_own_chain() {
        let p = vec![vec![0.5, 0.5], vec![1.0, 0.0]];
        let g = GibbsState::new(&Potential::markov_depth1(&p).unwrap(), &IncidenceMatrix::golden_mean()).unwrap();
        assert!(g.pressure.abs() < 1e-14);
        assert!((g.cylinder_measure(&w("1,2,1")) - (2.0 / 3.0) * 0.5).abs() < 1e-14);
        let audit = g.verify_gibbs_property(10).unwrap();
        assert!(audit.pass, "{audit:?}");
        assert!((g.entropy + g.mean_potential - g.pressure).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_mixing_is_independent() {
        let g = GibbsState::new(&Potential::zero(2), &IncidenceMatrix::full(2)).unwrap();
        for gap in 2..6 {
            assert!((g.mixing_ratio(&w("1"), &w("1,2"), gap).unwrap() - 1.0).abs() < 1e-14);
        }
        let fit = g.fit_mixing_constants(2, 6).unwrap();
        assert_eq!((fit.c, fit.d), (1.0, 0.0));
        assert!(g.mixing_ratio(&w("1"), &w("1,2"), 1).is_err());
    }

    #[test]
    fn golden_mixing_matches_matrix_power() {
        let g = GibbsState::new(&Potential::zero(2), &IncidenceMatrix::golden_mean()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        // Two-state chain with P = [[1/φ, 1/φ²],[1,0]]; second eigenvalue −1/φ².
        let mu1 = phi * phi / (1.0 + phi * phi);
        for n in 1..10 {
            let ratio = g.mixing_ratio(&w("1"), &w("1"), n).unwrap();
            let p11 = mu1 + (1.0 - mu1) * (-1.0 / (phi * phi)).powi(n as i32);
            assert!((ratio - p11 / mu1).abs() < 1e-12, "n = {n}");
        }
        let fit = g.fit_mixing_constants(2, 12).unwrap();
        assert!(fit.gamma > 0.3 && fit.gamma < 0.45, "{fit:?}");
        for pr in &fit.probes {
            let j = pr.gap - pr.b.len();
            assert!((pr.ratio - 1.0).abs() <= fit.d * fit.gamma.powi(j as i32) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn sampler_respects_forbidden_words_and_frequency() {
        let g = GibbsState::new(&Potential::zero(2), &IncidenceMatrix::golden_mean()).unwrap();
        let path = g.sample_typical(0, SeedStream::new(7, "test"), 0);
        let mut src = path.stream();
        let mut prev = src.next_symbol();
        let mut ones = (prev == 0) as usize;
        let n = 200_000;
        for _ in 1..n {
            let s = src.next_symbol();
            assert!(!(prev == 1 && s == 1));
            ones += (s == 0) as usize;
            prev = s;
        }
        let mu1 = g.cylinder_measure(&w("1"));
        let freq = ones as f64 / n as f64;
        // Negative correlation (ρ = −1/φ²) makes the i.i.d. σ conservative.
        let sigma = (mu1 * (1.0 - mu1) / n as f64).sqrt();
        assert!((freq - mu1).abs() < 5.0 * sigma, "{freq} vs {mu1}");
    }

    #[test]
    fn variational_dominance() {
        let g = GibbsState::new(&Potential::bernoulli(&[0.3, 0.7]).unwrap(), &IncidenceMatrix::full(2)).unwrap();
        for q in [0.1, 0.3, 0.5, 0.9] {
            let kernel = vec![vec![q, 1.0 - q], vec![q, 1.0 - q]];
            assert!(g.free_energy_of_kernel(&kernel).unwrap() <= g.pressure + 1e-9);
        }
        let own: Vec<Vec<f64>> = g.chain.transitions.iter().map(|r| r.iter().map(|t| t.2).collect()).collect();
        assert!((g.free_energy_of_kernel(&own).unwrap() - g.pressure).abs() < 1e-12);
    }

    #[test]
    fn refuses_gauss_and_reducible() {
        assert!(GibbsState::new(&Potential::gauss_t(1.0).unwrap(), &IncidenceMatrix::truncated_full(4)).is_err());
        let diag = IncidenceMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert!(matches!(GibbsState::new(&Potential::zero(2), &diag), Err(Error::NotIrreducible(_))));
    }
}
