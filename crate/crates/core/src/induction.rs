//! First-return systems on a base set X̂, return sums, Kac checks, local IFS structure and
//! induced potentials.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::hitting::{record_sequence, RecordSequence};
use crate::seeds::SeedStream;
use crate::stats;
use crate::symbolic::{Symbol, SymbolPath, Word};
use crate::system::{BaseSet, Geometry, MeasuredSystem, Orbit, Target};

/// Rejection attempts per sample are encoded in the low 16 bits of the task index.
pub const MAX_ATTEMPTS: u64 = 1 << 16;

#[derive(Clone, Debug)]
pub struct InducedSystem {
    pub base: MeasuredSystem,
    pub set: BaseSet,
    /// μ(X̂)
    pub mu_set: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSums {
    /// A_l(x) for l = 1..=sums.len()
    pub sums: Vec<u64>,
    /// Fewer than the requested L returns happened within the horizon.
    pub censored: bool,
}

impl InducedSystem {
    pub fn new(base: MeasuredSystem, set: BaseSet) -> Result<Self> {
        let mu_set = base.set_measure(&set)?;
        if !(mu_set > 0.0) {
            return Err(Error::Degenerate("base set has measure zero".into()));
        }
        if mu_set > 1.0 + 1e-12 {
            return invalid("base set parts overlap (measure exceeds 1)");
        }
        Ok(InducedSystem { base, set, mu_set })
    }

    /// μ̂(B) = μ(B)/μ(X̂) for B ⊂ X̂.
    pub fn conditional(&self, mu: f64) -> f64 {
        mu / self.mu_set
    }

    /// A μ̂-distributed point: base samples with task (i << 16) | attempt until one lands in X̂.
    pub fn sample_point(&self, seeds: SeedStream, i: u64) -> Result<SymbolPath> {
        for attempt in 0..MAX_ATTEMPTS {
            let path = self.base.sample_path(seeds, (i << 16) | attempt);
            if self.base.orbit_of(&path).in_set(&self.set) {
                return Ok(path);
            }
        }
        Err(Error::Degenerate(format!("no sample landed in the base set after {MAX_ATTEMPTS} attempts")))
    }

    /// Orbit of a μ̂-distributed point (unmemoized stream).
    pub fn sample_orbit(&self, seeds: SeedStream, i: u64) -> Result<Box<dyn Orbit>> {
        for attempt in 0..MAX_ATTEMPTS {
            let mut orbit = self.base.orbit(self.base.sample_source(seeds, (i << 16) | attempt));
            if orbit.in_set(&self.set) {
                return Ok(orbit);
            }
        }
        Err(Error::Degenerate(format!("no sample landed in the base set after {MAX_ATTEMPTS} attempts")))
    }

    /// t(x) for the current point of `orbit`, which must lie in X̂. On return the orbit sits at
    /// T̂x; None means no return within the horizon (the orbit is left at the horizon).
    pub fn first_return_time(&self, orbit: &mut dyn Orbit, horizon: u64) -> Result<Option<u64>> {
        if horizon < 1 {
            return invalid("horizon must be at least 1");
        }
        if !orbit.in_set(&self.set) {
            return invalid("first return time needs a point of the base set");
        }
        Ok(self.return_unchecked(orbit, horizon))
    }

    fn return_unchecked(&self, orbit: &mut dyn Orbit, horizon: u64) -> Option<u64> {
        for t in 1..=horizon {
            orbit.step();
            if orbit.in_set(&self.set) {
                return Some(t);
            }
        }
        None
    }

    /// A_1..A_L along the induced orbit, within a total base-time horizon.
    pub fn return_sums(&self, orbit: &mut dyn Orbit, l: usize, horizon: u64) -> Result<ReturnSums> {
        if horizon < 1 {
            return invalid("horizon must be at least 1");
        }
        if !orbit.in_set(&self.set) {
            return invalid("return sums need a point of the base set");
        }
        let mut sums = Vec::with_capacity(l);
        let mut total = 0u64;
        while sums.len() < l {
            match self.return_unchecked(orbit, horizon - total) {
                Some(t) => {
                    total += t;
                    sums.push(total);
                    if total >= horizon && sums.len() < l {
                        return Ok(ReturnSums { sums, censored: true });
                    }
                }
                None => return Ok(ReturnSums { sums, censored: true }),
            }
        }
        Ok(ReturnSums { sums, censored: false })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KacReport {
    pub samples: usize,
    pub censored: usize,
    pub mean: f64,
    pub stderr: f64,
    /// 1/μ(X̂)
    pub target: f64,
    pub z: f64,
    pub warning: Option<String>,
}

pub const CENSOR_WARN: f64 = 0.01;

/// Empirical mean of t under μ̂ against 1/μ(X̂).
pub fn kac_check(induced: &InducedSystem, samples: usize, horizon: u64, seeds: SeedStream) -> Result<KacReport> {
    if samples < 2 {
        return invalid("kac check needs at least 2 samples");
    }
    if horizon < 1 {
        return invalid("horizon must be at least 1");
    }
    let times: Vec<Option<u64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<u64>> {
            let mut orbit = induced.sample_orbit(seeds, i)?;
            Ok(induced.return_unchecked(orbit.as_mut(), horizon))
        })
        .collect::<Result<Vec<_>>>()?;
    let observed: Vec<f64> = times.iter().flatten().map(|&t| t as f64).collect();
    let censored = samples - observed.len();
    if observed.len() < 2 {
        return Err(Error::Degenerate("almost every sample was censored".into()));
    }
    let (mean, stderr) = stats::mean_se(&observed);
    let target = 1.0 / induced.mu_set;
    let frac = censored as f64 / samples as f64;
    let warning = (frac > CENSOR_WARN).then(|| {
        format!("{:.2}% of samples censored at horizon {horizon}; the mean is biased low", 100.0 * frac)
    });
    Ok(KacReport {
        samples,
        censored,
        mean,
        stderr,
        target,
        z: if stderr > 0.0 { (mean - target) / stderr } else { f64::INFINITY * (mean - target).signum() },
        warning,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSpectrum {
    /// masses[n − 1] = μ̂(t = n)
    pub masses: Vec<f64>,
    pub exact: bool,
    /// 1 − Σ masses
    pub tail: f64,
    /// Σ n·μ̂(t = n) over the listed n
    pub partial_mean: f64,
    pub samples: usize,
}

/// μ̂(t = n) for n ≤ max_n: exact taboo recursion for cylinder base sets, sampled otherwise.
pub fn return_time_spectrum(
    induced: &InducedSystem,
    max_n: usize,
    sampling: Option<(usize, SeedStream)>,
) -> Result<ReturnSpectrum> {
    if max_n < 1 {
        return invalid("max_n must be at least 1");
    }
    let masses = match as_cylinders(&induced.base, &induced.set) {
        Some(words) => exact_spectrum(induced, &words, max_n),
        None => {
            let (samples, seeds) = sampling
                .ok_or_else(|| Error::Unsupported("base set is not a union of cells; pass a sample budget".into()))?;
            let times: Vec<Option<u64>> = (0..samples as u64)
                .into_par_iter()
                .map(|i| -> Result<Option<u64>> {
                    let mut orbit = induced.sample_orbit(seeds, i)?;
                    Ok(induced.return_unchecked(orbit.as_mut(), max_n as u64))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut m = vec![0.0; max_n];
            for t in times.into_iter().flatten() {
                m[t as usize - 1] += 1.0 / samples as f64;
            }
            return Ok(spectrum(m, false, samples));
        }
    };
    Ok(spectrum(masses, true, 0))
}

fn spectrum(masses: Vec<f64>, exact: bool, samples: usize) -> ReturnSpectrum {
    let total: f64 = masses.iter().sum();
    let partial_mean = masses.iter().enumerate().map(|(i, m)| (i + 1) as f64 * m).sum();
    ReturnSpectrum { masses, exact, tail: 1.0 - total, partial_mean, samples }
}

/// Window DP: mass of paths that start in X̂ and avoid it at times 1..n−1, keyed by the
/// current window of W = max(longest word, chain block) symbols.
fn exact_spectrum(induced: &InducedSystem, words: &[Word], max_n: usize) -> Vec<f64> {
    let g = &induced.base.gibbs;
    let chain = &g.chain;
    let w = words.iter().map(Word::len).max().unwrap_or(1).max(chain.block_len);
    let in_set = |win: &[Symbol]| words.iter().any(|u| win[..u.len()] == *u.symbols());
    let all = g.matrix.enumerate(w, 1 << 22).expect("window enumeration within budget");
    let mut state: BTreeMap<Vec<Symbol>, f64> = BTreeMap::new();
    for word in all {
        if in_set(word.symbols()) {
            let m = g.cylinder_measure(&word);
            if m > 0.0 {
                state.insert(word.symbols().to_vec(), m / induced.mu_set);
            }
        }
    }
    let mut masses = vec![0.0; max_n];
    for slot in masses.iter_mut() {
        let mut next: BTreeMap<Vec<Symbol>, f64> = BTreeMap::new();
        for (win, p) in &state {
            let last = *win.last().expect("window");
            let as_word = Word::new(win.clone());
            for e in g.matrix.successors(last) {
                let q = chain.extend_mass(&as_word, *p, e);
                if q == 0.0 {
                    continue;
                }
                let mut nw = win[1..].to_vec();
                nw.push(e);
                if in_set(&nw) {
                    *slot += q;
                } else {
                    *next.entry(nw).or_insert(0.0) += q;
                }
            }
        }
        state = next;
    }
    masses
}

/// Cylinder words whose union is the base set, if it is one.
fn as_cylinders(system: &MeasuredSystem, set: &BaseSet) -> Option<Vec<Word>> {
    match set {
        BaseSet::Cylinders(ws) => Some(ws.clone()),
        BaseSet::Intervals(iv) => {
            let coding = system.coding()?;
            let mut out = Vec::new();
            for &(a, b) in iv {
                out.extend(interval_cells(coding, a, b, 16)?);
            }
            Some(out)
        }
    }
}

/// Cells of depth ≤ max_depth tiling [a, b) exactly, refining only the straddling cells.
fn interval_cells(coding: &crate::coding::Coding, a: f64, b: f64, max_depth: usize) -> Option<Vec<Word>> {
    let tol = 1e-12 * (b - a).abs();
    let mut frontier = vec![Word::empty()];
    let mut out = Vec::new();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for word in &frontier {
            if word.len() >= max_depth {
                return None;
            }
            for (e, (lo, hi)) in coding.children(word) {
                if lo >= a - tol && hi <= b + tol {
                    out.push(word.extended(e));
                } else if hi > a + tol && lo < b - tol {
                    next.push(word.extended(e));
                }
            }
        }
        if next.len() > 1 << 12 {
            return None;
        }
        frontier = next;
    }
    Some(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IfsBranch {
    /// Return time n of every point of the domain.
    pub n: usize,
    /// Code of the domain A; T^n maps [word] onto Γ.
    pub word: Word,
    pub domain: (f64, f64),
    pub mass: f64,
    pub conditional_mass: f64,
    /// Lip of φ_A = (T^n|_A)^{−1} on Γ.
    pub lipschitz: f64,
    /// Distance between φ_A(∂Γ) and ∂A.
    pub endpoint_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalIfsStructure {
    pub center: Option<f64>,
    pub gamma: Word,
    pub interval: (f64, f64),
    pub branches: Vec<IfsBranch>,
    /// max Lip φ_A
    pub contraction: f64,
    pub disjoint: bool,
    /// μ(Γ) − Σ μ(A)
    pub uncovered_mass: f64,
    /// the same, conditioned on Γ
    pub uncovered_conditional: f64,
}

/// First-return branches to Γ = [γ] with return time ≤ max_return; `budget` caps the
/// enumeration nodes.
pub fn build_local_ifs(
    system: &MeasuredSystem,
    gamma: &BaseSet,
    center: Option<f64>,
    max_return: usize,
    budget: usize,
) -> Result<LocalIfsStructure> {
    let coding = system
        .coding()
        .ok_or_else(|| Error::Unsupported("local IFS structure needs an interval system".into()))?
        .clone();
    let words = as_cylinders(system, gamma).ok_or_else(|| Error::Unsupported("Γ is not a union of cells".into()))?;
    let [g] = words.as_slice() else {
        return Err(Error::Unsupported("Γ must be a single cylinder".into()));
    };
    system.gibbs.matrix.check_admissible(g)?;
    let interval = coding.cylinder_interval(g);
    if let Some(z) = center {
        if !(interval.0 < z && z < interval.1) {
            return invalid(format!("center {z} is not interior to Γ = [{}, {})", interval.0, interval.1));
        }
    }
    let m = g.len();
    let mu_gamma = system.gibbs.cylinder_measure(g);
    if !(mu_gamma > 0.0) {
        return Err(Error::Degenerate("Γ has measure zero".into()));
    }
    let mut branches = Vec::new();
    let mut nodes = 0usize;
    let mut stack = vec![g.clone()];
    while let Some(word) = stack.pop() {
        let last = word.last().expect("non-empty");
        for e in system.gibbs.matrix.successors(last) {
            nodes += 1;
            if nodes > budget {
                return Err(Error::Budget { needed: nodes as u128, budget: budget as u128 });
            }
            let w = word.extended(e);
            let j = w.len() - m;
            if w.symbols()[j..] == *g.symbols() {
                let map = coding.word_map(&w.prefix(j));
                let domain = coding.cylinder_interval(&w);
                let (ilo, ihi) = map.image(interval.0, interval.1);
                let mass = system.gibbs.cylinder_measure(&w);
                branches.push(IfsBranch {
                    n: j,
                    domain,
                    mass,
                    conditional_mass: mass / mu_gamma,
                    lipschitz: map.lipschitz_on(interval.0, interval.1),
                    endpoint_error: (ilo - domain.0).abs().max((ihi - domain.1).abs()),
                    word: w,
                });
            } else if j < max_return {
                stack.push(w);
            }
        }
    }
    branches.sort_by(|a, b| a.n.cmp(&b.n).then(a.domain.0.total_cmp(&b.domain.0)));
    let mut by_lo: Vec<(f64, f64)> = branches.iter().map(|b| b.domain).collect();
    by_lo.sort_by(|a, b| a.0.total_cmp(&b.0));
    let disjoint = by_lo.windows(2).all(|w| w[0].1 <= w[1].0 + 1e-15);
    let covered: f64 = branches.iter().map(|b| b.mass).sum();
    Ok(LocalIfsStructure {
        center,
        gamma: g.clone(),
        interval,
        contraction: branches.iter().map(|b| b.lipschitz).fold(0.0, f64::max),
        disjoint,
        uncovered_mass: (mu_gamma - covered).max(0.0),
        uncovered_conditional: ((mu_gamma - covered) / mu_gamma).max(0.0),
        branches,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub r: f64,
    pub tau: Option<u64>,
    pub tau_hat: Option<u64>,
    pub mu_ball: f64,
    /// μ(B)/μ(X̂)
    pub mu_hat_ball: f64,
    /// B(y, r) ⊂ X̂
    pub ball_inside: bool,
    /// A_{τ̂} = τ, read off the induced walk; None unless the ball lies in X̂.
    pub identity: Option<bool>,
    /// τ̂(1/μ(X̂) − ε) ≤ τ ≤ τ̂(1/μ(X̂) + ε) with ε = |A_τ̂/τ̂ − 1/μ(X̂)|.
    pub sandwich: Option<bool>,
}

impl ComparisonRow {
    pub fn e_base(&self) -> Option<f64> {
        self.tau.map(|t| t as f64 * self.mu_ball)
    }

    pub fn e_induced(&self) -> Option<f64> {
        self.tau_hat.map(|t| t as f64 * self.mu_hat_ball)
    }

    /// |τ·μ(B) − τ̂·μ̂(B)| / (τ̂·μ̂(B))
    pub fn relative_gap(&self) -> Option<f64> {
        match (self.e_base(), self.e_induced()) {
            (Some(a), Some(b)) if b > 0.0 => Some((a - b).abs() / b),
            _ => None,
        }
    }

    pub fn censored(&self) -> bool {
        self.tau.is_none() || self.tau_hat.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InducedRecord {
    /// l: number of induced steps
    pub l: u64,
    /// A_l: base time of the same point
    pub n: u64,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HittingComparison {
    pub rows: Vec<ComparisonRow>,
    pub base_records: RecordSequence,
    pub induced_records: Vec<InducedRecord>,
    /// Distance from y to the complement of X̂.
    pub margin: f64,
    /// Closest-approach points below the margin coincide for T and T̂.
    pub record_equivalent: bool,
}

/// Base and induced entry statistics at y for the orbit of x ∈ X̂. Without explicit radii the
/// rows sit at the left ends r_{k−1} of the base record windows.
pub fn compare_hitting_statistics(
    induced: &InducedSystem,
    target: &Target,
    x: &SymbolPath,
    radii: Option<&[f64]>,
    horizon: u64,
) -> Result<HittingComparison> {
    if horizon < 1 {
        return invalid("horizon must be at least 1");
    }
    let margin = interior_margin(induced, target)?;
    if !(margin > 0.0) {
        return invalid("target is not interior to the base set");
    }
    let base_records = record_sequence(induced.base.orbit_of(x).as_mut(), target, horizon)?;
    let mut walk = induced.base.orbit_of(x);
    if !walk.in_set(&induced.set) {
        return invalid("x must lie in the base set");
    }
    let mut induced_records: Vec<InducedRecord> = Vec::new();
    let (mut l, mut n, mut best) = (0u64, 0u64, f64::INFINITY);
    while n < horizon {
        match induced.return_unchecked(walk.as_mut(), horizon - n) {
            Some(t) => {
                l += 1;
                n += t;
                let d = walk.distance(target);
                if d < best {
                    best = d;
                    induced_records.push(InducedRecord { l, n, r: d });
                    if d == 0.0 {
                        break;
                    }
                }
            }
            None => break,
        }
    }
    let below = |r: f64| r < margin;
    let base_pts: Vec<u64> = base_records.records.iter().filter(|rec| below(rec.r)).map(|rec| rec.n).collect();
    let ind_pts: Vec<u64> = induced_records.iter().filter(|rec| below(rec.r)).map(|rec| rec.n).collect();
    let record_equivalent = base_pts == ind_pts;

    let rs: Vec<f64> = match radii {
        Some(r) => r.to_vec(),
        None => base_records.records.windows(2).map(|w| w[0].r).collect(),
    };
    let mut rows = Vec::with_capacity(rs.len());
    for r in rs {
        let tau = base_records.tau(r);
        let k = induced_records.partition_point(|rec| rec.r >= r);
        let hit = induced_records.get(k);
        let tau_hat = hit.map(|h| h.l);
        let mu_ball = induced.base.ball_measure(target, r);
        let ball_inside = r <= margin;
        // Outside X̂ the base orbit can enter the ball between returns; neither relation applies.
        let identity = match (tau, hit) {
            (Some(t), Some(h)) if ball_inside => Some(h.n == t),
            _ => None,
        };
        let sandwich = match (tau, tau_hat, hit) {
            (Some(t), Some(th), Some(h)) if ball_inside => {
                let inv = 1.0 / induced.mu_set;
                let eps = (h.n as f64 / th as f64 - inv).abs();
                let (t, th) = (t as f64, th as f64);
                let slack = 1e-9 * t;
                Some(th * (inv - eps) <= t + slack && t <= th * (inv + eps) + slack)
            }
            _ => None,
        };
        rows.push(ComparisonRow {
            r,
            tau,
            tau_hat,
            mu_ball,
            mu_hat_ball: induced.conditional(mu_ball),
            ball_inside,
            identity,
            sandwich,
        });
    }
    Ok(HittingComparison { rows, base_records, induced_records, margin, record_equivalent })
}

/// Largest r with B(y, r) ⊂ X̂ (0 when y is not interior).
fn interior_margin(induced: &InducedSystem, target: &Target) -> Result<f64> {
    match (&induced.base.geometry, target, &induced.set) {
        (Geometry::Interval { .. }, Target::Point { y, .. }, set) => {
            let cells;
            let iv: &[(f64, f64)] = match set {
                BaseSet::Intervals(iv) => iv,
                BaseSet::Cylinders(ws) => {
                    let coding = induced.base.coding().expect("interval geometry");
                    cells = ws.iter().map(|w| coding.cylinder_interval(w)).collect::<Vec<_>>();
                    &cells
                }
            };
            Ok(merged(iv)
                .into_iter()
                .find(|&(a, b)| a < *y && *y < b)
                .map_or(0.0, |(a, b)| (y - a).min(b - y)))
        }
        (Geometry::Shift(spec), Target::Sequence { path, .. }, BaseSet::Cylinders(ws)) => {
            // B(y, r) = [y|_n] lies in [w] iff y starts with w and n ≥ |w|.
            let depth = ws
                .iter()
                .filter(|w| path.prefix(w.len()) == **w)
                .map(Word::len)
                .min();
            Ok(depth.map_or(0.0, |d| spec.distance_from_wedge(d.saturating_sub(1))))
        }
        _ => Err(Error::Unsupported("target and base set live on different geometries".into())),
    }
}

fn merged(iv: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v = iv.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// g_F(x) = Σ_{k < τ_F(x)} g(T^k x).
pub struct InducedPotential<G: Fn(f64) -> f64> {
    pub g: G,
    pub set: BaseSet,
}

impl<G: Fn(f64) -> f64> InducedPotential<G> {
    pub fn new(g: G, set: BaseSet) -> Self {
        InducedPotential { g, set }
    }

    /// None when τ_F(x) exceeds the horizon.
    pub fn eval(&self, orbit: &mut dyn Orbit, horizon: u64) -> Result<Option<f64>> {
        if horizon < 1 {
            return invalid("horizon must be at least 1");
        }
        if !orbit.in_set(&self.set) {
            return invalid("induced potential needs a point of F");
        }
        let mut sum = 0.0;
        for _ in 0..horizon {
            let x = orbit.position().ok_or_else(|| Error::Unsupported("induced potential needs positions".into()))?;
            sum += (self.g)(x);
            orbit.step();
            if orbit.in_set(&self.set) {
                return Ok(Some(sum));
            }
        }
        Ok(None)
    }
}

pub fn induced_potential<G: Fn(f64) -> f64>(g: G, set: &BaseSet, orbit: &mut dyn Orbit, horizon: u64) -> Result<Option<f64>> {
    InducedPotential::new(g, set.clone()).eval(orbit, horizon)
}
