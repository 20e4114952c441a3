//! Potentials given by their (inf, sup) over cylinders.

use crate::error::{invalid, Error, Result};
use crate::maps::Contraction;
use crate::symbolic::{IncidenceMatrix, Symbol, Word, ENUMERATION_BUDGET};

/// A locally constant potential: f(ω) depends on ω|_depth only.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPotential {
    depth: usize,
    alphabet: usize,
    table: Vec<f64>,
}

impl LocalPotential {
    pub fn new(depth: usize, alphabet: usize, table: Vec<f64>) -> Result<Self> {
        if depth == 0 || alphabet == 0 {
            return invalid("potential depth and alphabet must be positive");
        }
        let expected = (alphabet as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
        if expected > ENUMERATION_BUDGET || table.len() as u128 != expected {
            return invalid(format!("table must have {expected} entries, got {}", table.len()));
        }
        if table.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return invalid("potential values must be finite or -inf");
        }
        Ok(Self { depth, alphabet, table })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn index(&self, symbols: &[Symbol]) -> usize {
        symbols[..self.depth].iter().fold(0usize, |acc, &s| acc * self.alphabet + s as usize)
    }

    /// Value on a word of length ≥ depth.
    pub fn value(&self, symbols: &[Symbol]) -> f64 {
        self.table[self.index(symbols)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Local(LocalPotential),
    /// f(ω) = −2t log(ω_1 + π(σω)) on the continued-fraction coding.
    GaussT { t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderData {
    pub alpha: f64,
    pub variation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summability {
    /// Σ_e exp(sup f|[e]) over the represented alphabet.
    pub sum: f64,
    /// Bound on the omitted tail for truncated alphabets (0 when finite).
    pub tail_bound: f64,
}

impl Potential {
    pub fn zero(alphabet: usize) -> Self {
        Potential::Local(LocalPotential { depth: 1, alphabet, table: vec![0.0; alphabet] })
    }

    /// f(ω) = log p_{ω_1}.
    pub fn bernoulli(p: &[f64]) -> Result<Self> {
        if p.is_empty() || p.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return invalid("bernoulli weights must be positive");
        }
        Ok(Potential::Local(LocalPotential::new(1, p.len(), p.iter().map(|x| x.ln()).collect())?))
    }

    /// f(ω) = values[ω_1].
    pub fn first_symbol(values: &[f64]) -> Result<Self> {
        Ok(Potential::Local(LocalPotential::new(1, values.len(), values.to_vec())?))
    }

    /// f(ω) = log P_{ω_1 ω_2} for a transition table P.
    pub fn markov_depth1(table: &[Vec<f64>]) -> Result<Self> {
        let n = table.len();
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return invalid(format!("transition table row {} has {} entries, expected {n}", i + 1, row.len()));
            }
            for &v in row {
                if !(v >= 0.0 && v.is_finite()) {
                    return invalid("transition table entries must be nonnegative");
                }
                flat.push(if v > 0.0 { v.ln() } else { f64::NEG_INFINITY });
            }
        }
        Ok(Potential::Local(LocalPotential::new(2, n, flat)?))
    }

    pub fn gauss_t(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return invalid(format!("gauss_t parameter must be positive, got {t}"));
        }
        Ok(Potential::GaussT { t })
    }

    pub fn as_local(&self) -> Option<&LocalPotential> {
        match self {
            Potential::Local(l) => Some(l),
            Potential::GaussT { .. } => None,
        }
    }

    pub fn depth(&self) -> Option<usize> {
        self.as_local().map(|l| l.depth)
    }

    fn check_alphabet(&self, a: &IncidenceMatrix) -> Result<()> {
        if let Potential::Local(l) = self {
            if l.alphabet != a.size() {
                return invalid(format!("potential alphabet {} does not match matrix size {}", l.alphabet, a.size()));
            }
        }
        Ok(())
    }

    /// (inf, sup) of f over the cylinder [word]; the empty word means the whole space.
    pub fn cylinder_bounds(&self, word: &Word, a: &IncidenceMatrix) -> Result<(f64, f64)> {
        self.check_alphabet(a)?;
        match self {
            Potential::Local(l) => {
                if word.len() >= l.depth {
                    let v = l.value(word.symbols());
                    return Ok((v, v));
                }
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut cur = word.symbols().to_vec();
                extend_bounds(l, a, &mut cur, &mut lo, &mut hi);
                if lo == f64::INFINITY {
                    return Err(Error::Inadmissible(word.to_string()));
                }
                Ok((lo, hi))
            }
            Potential::GaussT { t } => {
                let n_max = a.size() as f64;
                match word.first() {
                    None => Ok((-2.0 * t * (n_max + 1.0).ln(), 0.0)),
                    Some(first) => {
                        let n = first as f64 + 1.0;
                        let (xl, xh) = gauss_tail_interval(&word.suffix_from(1));
                        Ok((-2.0 * t * (n + xh).ln(), -2.0 * t * (n + xl).ln()))
                    }
                }
            }
        }
    }

    /// Largest sup − inf over admissible words of length n.
    pub fn variation(&self, n: usize, a: &IncidenceMatrix) -> Result<f64> {
        let mut worst = 0.0f64;
        for w in a.enumerate(n, ENUMERATION_BUDGET)? {
            let (lo, hi) = self.cylinder_bounds(&w, a)?;
            if lo.is_finite() && hi.is_finite() {
                worst = worst.max(hi - lo);
            }
        }
        Ok(worst)
    }

    /// Declared Hölder exponent and variation constant V with
    /// var_n ≤ V e^{−α(n−1)}.
    pub fn holder_data(&self, a: &IncidenceMatrix) -> Result<HolderData> {
        match self {
            Potential::Local(l) => {
                let alpha = 1.0;
                let mut v = 0.0f64;
                for n in 1..l.depth {
                    v = v.max(self.variation(n, a)? * (alpha * (n as f64 - 1.0)).exp());
                }
                Ok(HolderData { alpha, variation: v })
            }
            Potential::GaussT { t } => {
                let golden = (1.0 + 5f64.sqrt()) / 2.0;
                Ok(HolderData { alpha: 2.0 * golden.ln(), variation: 2.0 * t * golden * golden })
            }
        }
    }

    pub fn summability(&self, a: &IncidenceMatrix) -> Result<Summability> {
        self.check_alphabet(a)?;
        match self {
            Potential::Local(_) => {
                let mut sum = 0.0;
                for e in 0..a.size() as Symbol {
                    let (_, hi) = self.cylinder_bounds(&Word::new(vec![e]), a)?;
                    sum += hi.exp();
                }
                Ok(Summability { sum, tail_bound: 0.0 })
            }
            Potential::GaussT { t } => {
                if *t <= 0.5 {
                    return Err(Error::NotSummable(format!("Σ n^(-2t) diverges for t = {t} ≤ 1/2")));
                }
                let n = a.size();
                let sum: f64 = (1..=n).map(|k| (k as f64).powf(-2.0 * t)).sum();
                let tail_bound = if a.is_truncated() { gauss_tail_bound(*t, n) } else { 0.0 };
                Ok(Summability { sum, tail_bound })
            }
        }
    }

    /// sup of S_n f over [word], exact (not a sum of per-shift sups).
    pub fn birkhoff_sup(&self, word: &Word, a: &IncidenceMatrix) -> Result<f64> {
        a.check_admissible(word)?;
        match self {
            Potential::Local(l) => {
                let s = word.symbols();
                let n = s.len();
                let inside: f64 = if n >= l.depth { (0..=n - l.depth).map(|j| l.value(&s[j..])).sum() } else { 0.0 };
                let tail_start = if n >= l.depth { n - l.depth + 1 } else { 0 };
                let mut best = f64::NEG_INFINITY;
                let mut cur = s.to_vec();
                tail_max(l, a, tail_start, n + l.depth - 1, &mut cur, &mut best);
                Ok(inside + best)
            }
            Potential::GaussT { t } => Ok(t * gauss_log_derivative_max(word)),
        }
    }
}

fn extend_bounds(l: &LocalPotential, a: &IncidenceMatrix, cur: &mut Vec<Symbol>, lo: &mut f64, hi: &mut f64) {
    if cur.len() >= l.depth {
        let v = l.value(cur);
        *lo = lo.min(v);
        *hi = hi.max(v);
        return;
    }
    for s in 0..a.size() as Symbol {
        if cur.last().is_none_or(|&p| a.allows(p, s)) {
            cur.push(s);
            extend_bounds(l, a, cur, lo, hi);
            cur.pop();
        }
    }
}

/// Max over admissible extensions to total length `total` of Σ_{j ≥ start} f(σ^j ·).
fn tail_max(l: &LocalPotential, a: &IncidenceMatrix, start: usize, total: usize, cur: &mut Vec<Symbol>, best: &mut f64) {
    if cur.len() >= total {
        let n_windows = total + 1 - l.depth;
        let v: f64 = (start..n_windows).map(|j| l.value(&cur[j..])).sum();
        *best = best.max(v);
        return;
    }
    for s in 0..a.size() as Symbol {
        if cur.last().is_none_or(|&p| a.allows(p, s)) {
            cur.push(s);
            tail_max(l, a, start, total, cur, best);
            cur.pop();
        }
    }
}

/// Continued-fraction maps φ_n(x) = 1/(n + x) composed along a word (symbol s ↦ n = s + 1).
pub fn gauss_word_map(word: &Word) -> Contraction {
    word.symbols()
        .iter()
        .fold(Contraction::affine(1.0, 0.0), |acc, &s| acc.compose(&Contraction::continued_fraction(s as u64 + 1)))
}

/// The interval φ_word([0,1]).
pub fn gauss_tail_interval(word: &Word) -> (f64, f64) {
    gauss_word_map(word).image(0.0, 1.0)
}

/// max over y ∈ [0,1] of log|φ_word'(y)|; |φ'| is monotone so the max is at an endpoint.
pub fn gauss_log_derivative_max(word: &Word) -> f64 {
    let m = gauss_word_map(word);
    m.derivative(0.0).abs().ln().max(m.derivative(1.0).abs().ln())
}

/// Tail Σ_{n>N} n^{−2t} ≤ ∫_N^∞ x^{−2t} dx.
pub fn gauss_tail_bound(t: f64, n: usize) -> f64 {
    (n as f64).powf(1.0 - 2.0 * t) / (2.0 * t - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_bounds_exact() {
        let f = Potential::bernoulli(&[0.3, 0.7]).unwrap();
        let a = IncidenceMatrix::full(2);
        let (lo, hi) = f.cylinder_bounds(&Word::parse("2").unwrap(), &a).unwrap();
        assert_eq!(lo, 0.7f64.ln());
        assert_eq!(hi, lo);
        let (lo, hi) = f.cylinder_bounds(&Word::empty(), &a).unwrap();
        assert_eq!((lo, hi), (0.3f64.ln(), 0.7f64.ln()));
    }

    #[test]
    fn nested_monotonicity_markov() {
        let f = Potential::markov_depth1(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let a = IncidenceMatrix::golden_mean();
        let (lo1, hi1) = f.cylinder_bounds(&Word::parse("1").unwrap(), &a).unwrap();
        for w in ["1,1", "1,2"] {
            let (lo, hi) = f.cylinder_bounds(&Word::parse(w).unwrap(), &a).unwrap();
            assert!(lo1 <= lo && hi <= hi1);
        }
    }

    #[test]
    fn gauss_bounds_and_summability() {
        let f = Potential::gauss_t(1.0).unwrap();
        let a = IncidenceMatrix::truncated_full(100);
        let (lo, hi) = f.cylinder_bounds(&Word::parse("1").unwrap(), &a).unwrap();
        assert!((hi - 0.0).abs() < 1e-15 && (lo + 2.0 * 2f64.ln()).abs() < 1e-15);
        let s = f.summability(&a).unwrap();
        assert!((s.tail_bound - 0.01).abs() < 1e-15);
        assert!(Potential::gauss_t(0.5).unwrap().summability(&a).is_err());
        let h = f.holder_data(&a).unwrap();
        for n in 1..6 {
            let v = f.variation(n, &IncidenceMatrix::truncated_full(5)).unwrap();
            assert!(v <= h.variation * (-h.alpha * (n as f64 - 1.0)).exp() + 1e-12, "n = {n}");
        }
    }

    #[test]
    fn birkhoff_sup_gauss_matches_product() {
        // exp(S_n f) = |φ_ω'|^t; on [1,1] the sup is at y = 0: |φ'(0)| for φ = φ1∘φ1, φ(y) = (1+y)/(2+y).
        let f = Potential::gauss_t(1.0).unwrap();
        let a = IncidenceMatrix::truncated_full(3);
        let s = f.birkhoff_sup(&Word::parse("1,1").unwrap(), &a).unwrap();
        assert!((s - (0.25f64).ln()).abs() < 1e-14);
    }
}
