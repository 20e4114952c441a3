//! Words, incidence matrices, cylinders, symbol paths and the ultrametric d_α.
//!
//! Symbols are stored 0-based. Text forms (words, matrices) use 1-based symbols.

use std::collections::VecDeque;
use std::fmt;
use std::sync::{Arc, Mutex, RwLock};

use crate::error::{invalid, Error, Result};

pub type Symbol = u32;

/// Default cap on the number of candidate words an enumeration may visit.
pub const ENUMERATION_BUDGET: u128 = 1 << 24;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<Symbol>);

impl Word {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn first(&self) -> Option<Symbol> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Symbol> {
        self.0.last().copied()
    }

    pub fn push(&mut self, s: Symbol) {
        self.0.push(s);
    }

    pub fn pop(&mut self) -> Option<Symbol> {
        self.0.pop()
    }

    pub fn extended(&self, s: Symbol) -> Word {
        let mut v = self.0.clone();
        v.push(s);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn suffix_from(&self, i: usize) -> Word {
        Word(self.0[i.min(self.0.len())..].to_vec())
    }

    /// Parse "1,2,2" (1-based). The empty string is the empty word.
    pub fn parse(text: &str) -> Result<Word> {
        let t = text.trim();
        if t.is_empty() || t == "ε" {
            return Ok(Word::empty());
        }
        t.split(',')
            .map(|s| {
                let v: u64 = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad symbol {s:?} in word {text:?}")))?;
                if v == 0 || v > Symbol::MAX as u64 {
                    return Err(Error::Parse(format!("symbol {v} out of range (symbols are 1-based)")));
                }
                Ok((v - 1) as Symbol)
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl From<Vec<Symbol>> for Word {
    fn from(v: Vec<Symbol>) -> Self {
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| (s + 1).to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// 0/1 incidence matrix on a finite (possibly truncated) alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceMatrix {
    size: usize,
    entries: Vec<bool>,
    truncated: bool,
}

impl IncidenceMatrix {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return invalid("incidence matrix must have at least one symbol");
        }
        let mut entries = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return invalid(format!("row {} has {} entries, expected {size}", i + 1, row.len()));
            }
            for &v in row {
                match v {
                    0 => entries.push(false),
                    1 => entries.push(true),
                    _ => return invalid(format!("row {} contains {v}; entries must be 0 or 1", i + 1)),
                }
            }
        }
        Ok(Self { size, entries, truncated: false })
    }

    pub fn full(size: usize) -> Self {
        Self { size, entries: vec![true; size * size], truncated: false }
    }

    /// Full shift on N symbols standing in for a countable alphabet.
    pub fn truncated_full(n: usize) -> Self {
        Self { truncated: true, ..Self::full(n) }
    }

    pub fn golden_mean() -> Self {
        Self::new(vec![vec![1, 1], vec![1, 0]]).expect("static matrix")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn with_truncated(mut self, flag: bool) -> Self {
        self.truncated = flag;
        self
    }

    pub fn allows(&self, a: Symbol, b: Symbol) -> bool {
        self.entries[a as usize * self.size + b as usize]
    }

    pub fn successors(&self, a: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.size as Symbol).filter(move |&b| self.allows(a, b))
    }

    pub fn is_full(&self) -> bool {
        self.entries.iter().all(|&e| e)
    }

    pub fn is_admissible(&self, word: &Word) -> bool {
        let s = word.symbols();
        s.iter().all(|&x| (x as usize) < self.size) && s.windows(2).all(|w| self.allows(w[0], w[1]))
    }

    pub fn check_admissible(&self, word: &Word) -> Result<()> {
        if self.is_admissible(word) {
            Ok(())
        } else {
            Err(Error::Inadmissible(word.to_string()))
        }
    }

    /// Remove symbols with no successor until every row has a 1.
    /// Returns the pruned matrix and the kept original symbols.
    pub fn prune(&self) -> (IncidenceMatrix, Vec<Symbol>) {
        let mut alive: Vec<bool> = vec![true; self.size];
        loop {
            let mut changed = false;
            for a in 0..self.size {
                if alive[a] && !(0..self.size).any(|b| alive[b] && self.entries[a * self.size + b]) {
                    alive[a] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let kept: Vec<Symbol> = (0..self.size as Symbol).filter(|&a| alive[a as usize]).collect();
        let n = kept.len();
        let mut entries = Vec::with_capacity(n * n);
        for &a in &kept {
            for &b in &kept {
                entries.push(self.allows(a, b));
            }
        }
        (IncidenceMatrix { size: n, entries, truncated: self.truncated }, kept)
    }

    pub fn has_dead_symbols(&self) -> bool {
        (0..self.size as Symbol).any(|a| self.successors(a).next().is_none())
    }

    /// Primitive iff some power is strictly positive (Wielandt bound).
    pub fn is_primitive(&self) -> bool {
        let n = self.size;
        let limit = (n - 1) * (n - 1) + 1;
        let mut p = self.entries.clone();
        for _ in 0..limit.max(1) {
            if p.iter().all(|&e| e) {
                return true;
            }
            let mut q = vec![false; n * n];
            for i in 0..n {
                for k in 0..n {
                    if p[i * n + k] {
                        for j in 0..n {
                            if self.entries[k * n + j] {
                                q[i * n + j] = true;
                            }
                        }
                    }
                }
            }
            p = q;
        }
        p.iter().all(|&e| e)
    }

    /// Load the plain-text form: first line `n`, then `n` rows of 0/1.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let first = lines.next().ok_or_else(|| Error::Parse("empty matrix text".into()))?;
        let n: usize = first.parse().map_err(|_| Error::Parse(format!("line 1: expected size, got {first:?}")))?;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("expected {n} rows, found {i}")))?;
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<u8>().map_err(|_| Error::Parse(format!("line {}: bad entry {t:?}", i + 2))))
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        if lines.next().is_some() {
            return Err(Error::Parse(format!("trailing content after {n} rows")));
        }
        Self::new(rows)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.size);
        for a in 0..self.size {
            let row: Vec<&str> =
                (0..self.size).map(|b| if self.entries[a * self.size + b] { "1" } else { "0" }).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// Shortest connecting word ω with iωj admissible, lexicographically least among
    /// the shortest, with |ω| ≤ max_len.
    fn shortest_connector(&self, i: Symbol, j: Symbol, max_len: usize) -> Option<Word> {
        if self.allows(i, j) {
            return Some(Word::empty());
        }
        // dist[v] = least number of steps from v to j.
        let n = self.size;
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        dist[j as usize] = 0;
        queue.push_back(j);
        while let Some(v) = queue.pop_front() {
            for u in 0..n as Symbol {
                if self.allows(u, v) && dist[u as usize] == usize::MAX {
                    dist[u as usize] = dist[v as usize] + 1;
                    queue.push_back(u);
                }
            }
        }
        // The connector has d intermediate symbols, d = least distance from a successor of i.
        let d = self.successors(i).map(|s| dist[s as usize]).min()?;
        if d == usize::MAX || d > max_len {
            return None;
        }
        let mut word = Word::empty();
        let mut cur = i;
        for step in 0..d {
            let next = self
                .successors(cur)
                .find(|&s| dist[s as usize] == d - step)
                .expect("distance labels are consistent");
            word.push(next);
            cur = next;
        }
        Some(word)
    }

    /// Greedy witness set Λ for finite irreducibility, or None.
    pub fn irreducibility_witness(&self, max_len: usize) -> Option<Vec<Word>> {
        let mut lambda: Vec<Word> = Vec::new();
        for i in 0..self.size as Symbol {
            for j in 0..self.size as Symbol {
                let covered = lambda.iter().any(|w| {
                    let mut full = Word::new(vec![i]).concat(w);
                    full.push(j);
                    self.is_admissible(&full)
                });
                if covered {
                    continue;
                }
                let w = self.shortest_connector(i, j, max_len)?;
                lambda.push(w);
            }
        }
        lambda.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        lambda.dedup();
        Some(lambda)
    }

    /// All admissible words of length n, lexicographically sorted.
    pub fn enumerate(&self, n: usize, budget: u128) -> Result<Vec<Word>> {
        if n == 0 {
            return Ok(vec![Word::empty()]);
        }
        let needed = (self.size as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if needed > budget {
            return Err(Error::Budget { needed, budget });
        }
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(n);
        self.enumerate_rec(n, &mut cur, &mut out);
        Ok(out)
    }

    fn enumerate_rec(&self, n: usize, cur: &mut Vec<Symbol>, out: &mut Vec<Word>) {
        if cur.len() == n {
            out.push(Word(cur.clone()));
            return;
        }
        for s in 0..self.size as Symbol {
            if cur.last().is_none_or(|&l| self.allows(l, s)) {
                cur.push(s);
                self.enumerate_rec(n, cur, out);
                cur.pop();
            }
        }
    }

    /// Number of admissible words of length n (transfer count).
    pub fn count_admissible(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let mut v = vec![1u128; self.size];
        for _ in 1..n {
            let mut w = vec![0u128; self.size];
            for a in 0..self.size {
                for b in 0..self.size {
                    if self.entries[a * self.size + b] {
                        w[a] = w[a].saturating_add(v[b]);
                    }
                }
            }
            v = w;
        }
        v.iter().fold(0u128, |acc, x| acc.saturating_add(*x))
    }
}

/// Generator of successive symbols.
pub trait SymbolSource: Send {
    fn next_symbol(&mut self) -> Symbol;

    fn fill(&mut self, out: &mut [Symbol]) {
        for s in out {
            *s = self.next_symbol();
        }
    }
}

/// A deterministic rule producing an infinite admissible sequence.
pub trait PathRule: Send + Sync + fmt::Debug {
    fn source(&self) -> Box<dyn SymbolSource>;
    /// Identity used for declared equality of infinite paths.
    fn key(&self) -> String;
}

/// Eventually periodic sequence prefix · period^∞.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicRule {
    pub prefix: Word,
    pub period: Word,
}

struct PeriodicSource {
    prefix: Vec<Symbol>,
    period: Vec<Symbol>,
    pos: usize,
}

impl SymbolSource for PeriodicSource {
    fn next_symbol(&mut self) -> Symbol {
        let s = if self.pos < self.prefix.len() {
            self.prefix[self.pos]
        } else {
            self.period[(self.pos - self.prefix.len()) % self.period.len()]
        };
        self.pos += 1;
        s
    }
}

impl PathRule for PeriodicRule {
    fn source(&self) -> Box<dyn SymbolSource> {
        Box::new(PeriodicSource {
            prefix: self.prefix.symbols().to_vec(),
            period: self.period.symbols().to_vec(),
            pos: 0,
        })
    }

    fn key(&self) -> String {
        format!("periodic[{}|{}]", self.prefix, self.period)
    }
}

struct PathCore {
    rule: Arc<dyn PathRule>,
    memo: RwLock<Vec<Symbol>>,
    source: Mutex<Box<dyn SymbolSource>>,
}

/// Memoized infinite path; cheap to clone and share across threads.
#[derive(Clone)]
pub struct SymbolPath {
    core: Arc<PathCore>,
    offset: usize,
}

impl fmt::Debug for SymbolPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymbolPath({}, offset {})", self.core.rule.key(), self.offset)
    }
}

impl SymbolPath {
    pub fn from_rule(rule: Arc<dyn PathRule>) -> Self {
        let source = Mutex::new(rule.source());
        SymbolPath { core: Arc::new(PathCore { rule, memo: RwLock::new(Vec::new()), source }), offset: 0 }
    }

    pub fn periodic(prefix: Word, period: Word) -> Result<Self> {
        if period.is_empty() {
            return invalid("period must be non-empty");
        }
        Ok(Self::from_rule(Arc::new(PeriodicRule { prefix, period })))
    }

    pub fn constant(s: Symbol) -> Self {
        Self::periodic(Word::empty(), Word::new(vec![s])).expect("non-empty period")
    }

    pub fn rule_key(&self) -> String {
        self.core.rule.key()
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    fn materialize(&self, upto: usize) {
        if self.core.memo.read().expect("memo lock").len() >= upto {
            return;
        }
        let mut memo = self.core.memo.write().expect("memo lock");
        if memo.len() >= upto {
            return;
        }
        let mut src = self.core.source.lock().expect("source lock");
        let extra = upto - memo.len();
        memo.reserve(extra);
        for _ in 0..extra {
            memo.push(src.next_symbol());
        }
    }

    /// Longest prefix materialized so far (relative to this path's start).
    pub fn horizon(&self) -> usize {
        self.core.memo.read().expect("memo lock").len().saturating_sub(self.offset)
    }

    /// Symbol at 0-based position i.
    pub fn symbol(&self, i: usize) -> Symbol {
        let idx = self.offset + i;
        {
            let memo = self.core.memo.read().expect("memo lock");
            if idx < memo.len() {
                return memo[idx];
            }
        }
        self.materialize((idx + 1).max(2 * idx.min(1 << 20)));
        self.core.memo.read().expect("memo lock")[idx]
    }

    pub fn prefix(&self, n: usize) -> Word {
        self.materialize(self.offset + n);
        let memo = self.core.memo.read().expect("memo lock");
        Word::new(memo[self.offset..self.offset + n].to_vec())
    }

    /// σ^k of this path.
    pub fn shift(&self, k: usize) -> SymbolPath {
        SymbolPath { core: self.core.clone(), offset: self.offset + k }
    }

    pub fn declared_equal(&self, other: &SymbolPath) -> bool {
        self.offset == other.offset
            && (Arc::ptr_eq(&self.core, &other.core) || self.core.rule.key() == other.core.rule.key())
    }

    /// A fresh, unmemoized stream starting at this path's offset.
    pub fn stream(&self) -> Box<dyn SymbolSource> {
        let mut src = self.core.rule.source();
        for _ in 0..self.offset {
            src.next_symbol();
        }
        src
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WedgeLength {
    Exact(usize),
    AtLeast(usize),
}

impl WedgeLength {
    pub fn value(self) -> usize {
        match self {
            WedgeLength::Exact(n) | WedgeLength::AtLeast(n) => n,
        }
    }
}

/// |ω ∧ τ| compared up to `horizon` symbols.
pub fn wedge_length(omega: &SymbolPath, tau: &SymbolPath, horizon: usize) -> WedgeLength {
    if omega.declared_equal(tau) {
        return WedgeLength::AtLeast(horizon);
    }
    for i in 0..horizon {
        if omega.symbol(i) != tau.symbol(i) {
            return WedgeLength::Exact(i);
        }
    }
    WedgeLength::AtLeast(horizon)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UltrametricSpec {
    pub alpha: f64,
}

impl UltrametricSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return invalid(format!("metric exponent must be positive, got {alpha}"));
        }
        Ok(Self { alpha })
    }

    pub fn distance_from_wedge(&self, wedge: usize) -> f64 {
        (-self.alpha * wedge as f64).exp()
    }

    /// Least n with e^{-αn} < r (open ball B(ρ, r) = [ρ|_n]).
    pub fn ball_depth(&self, r: f64) -> Result<usize> {
        if !(r > 0.0 && r <= 1.0) {
            return invalid(format!("radius must lie in (0,1], got {r}"));
        }
        let mut n = ((-r.ln()) / self.alpha).floor().max(0.0) as usize;
        while n > 0 && self.distance_from_wedge(n - 1) < r {
            n -= 1;
        }
        while self.distance_from_wedge(n) >= r {
            n += 1;
        }
        Ok(n)
    }

    /// Least n with e^{-αn} ≤ r (closed ball).
    pub fn closed_ball_depth(&self, r: f64) -> Result<usize> {
        if !(r > 0.0 && r <= 1.0) {
            return invalid(format!("radius must lie in (0,1], got {r}"));
        }
        let mut n = ((-r.ln()) / self.alpha).floor().max(0.0) as usize;
        while n > 0 && self.distance_from_wedge(n - 1) <= r {
            n -= 1;
        }
        while self.distance_from_wedge(n) > r {
            n += 1;
        }
        Ok(n)
    }
}

pub fn d_alpha(
    omega: &SymbolPath,
    tau: &SymbolPath,
    spec: &UltrametricSpec,
    horizon: usize,
    floor_zero: bool,
) -> Result<f64> {
    if horizon < 1 {
        return invalid("horizon must be at least 1");
    }
    Ok(match wedge_length(omega, tau, horizon) {
        WedgeLength::Exact(w) => spec.distance_from_wedge(w),
        WedgeLength::AtLeast(h) => {
            if floor_zero {
                0.0
            } else {
                spec.distance_from_wedge(h)
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cylinder {
    pub word: Word,
}

impl Cylinder {
    pub fn new(word: Word) -> Self {
        Cylinder { word }
    }

    pub fn depth(&self) -> usize {
        self.word.len()
    }

    pub fn contains(&self, path: &SymbolPath) -> bool {
        self.word.symbols().iter().enumerate().all(|(i, &s)| path.symbol(i) == s)
    }

    pub fn contains_word(&self, w: &Word) -> bool {
        w.len() >= self.word.len() && w.symbols()[..self.word.len()] == *self.word.symbols()
    }
}

pub fn ball_to_cylinder(rho: &SymbolPath, r: f64, spec: &UltrametricSpec) -> Result<Cylinder> {
    let n = spec.ball_depth(r)?;
    Ok(Cylinder::new(rho.prefix(n)))
}
