//! Closest-approach records and the statistics built from them.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::seeds::SeedStream;
use crate::stats;
use crate::symbolic::Symbol;
use crate::system::{Geometry, MeasuredSystem, Orbit, Target};
use crate::thermo::MixingFit;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record {
    pub n: u64,
    pub r: f64,
}

/// Records (n_k, r_k): n_1 = 1, n_{k+1} = min{n : d(T^n x, y) < r_k}.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordSequence {
    pub records: Vec<Record>,
    pub horizon: u64,
    /// The orbit reached distance 0; no further records exist.
    pub terminal: bool,
}

impl RecordSequence {
    /// 1-based k with r_k < r ≤ r_{k−1} (r_0 = ∞); None if r ≤ r_last and the sequence is censored.
    pub fn window(&self, r: f64) -> Option<usize> {
        let k = self.records.partition_point(|rec| rec.r >= r);
        (k < self.records.len()).then_some(k + 1)
    }

    /// τ_{B(y,r)}(x) read off the records.
    pub fn tau(&self, r: f64) -> Option<u64> {
        self.window(r).map(|k| self.records[k - 1].n)
    }

    pub fn censored(&self) -> bool {
        !self.terminal
    }
}

pub fn record_sequence(orbit: &mut dyn Orbit, target: &Target, horizon: u64) -> Result<RecordSequence> {
    if horizon < 1 {
        return invalid("horizon must be at least 1");
    }
    let start = orbit.time();
    orbit.step();
    let mut best = orbit.distance(target);
    let mut records = vec![Record { n: 1, r: best }];
    while best > 0.0 && orbit.time() - start < horizon {
        orbit.step();
        let d = orbit.distance(target);
        if d < best {
            best = d;
            records.push(Record { n: orbit.time() - start, r: d });
        }
    }
    Ok(RecordSequence { records, horizon, terminal: best == 0.0 })
}

/// First n in 1..=horizon with d(T^n x, y) < r, by direct search.
pub fn tau_direct(orbit: &mut dyn Orbit, target: &Target, r: f64, horizon: u64) -> Option<u64> {
    let start = orbit.time();
    while orbit.time() - start < horizon {
        orbit.step();
        if orbit.distance(target) < r {
            return Some(orbit.time() - start);
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntryRow {
    pub r: f64,
    pub tau: Option<u64>,
    pub mu_ball: f64,
    pub e_r: Option<f64>,
    /// Record window k of r (τ = n_k).
    pub window: Option<usize>,
    pub running_max: f64,
    /// Running minimum of E_r over rows in record windows k ≥ 3.
    pub running_min_deep: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntryTable {
    pub rows: Vec<EntryRow>,
}

/// E_r = τ_{B(y,r)}·μ(B(y,r)) on a radius schedule, rows in decreasing r.
pub fn entry_table(records: &RecordSequence, system: &MeasuredSystem, target: &Target, radii: &[f64]) -> Result<EntryTable> {
    if radii.iter().any(|&r| !(r > 0.0)) {
        return invalid("entry radii must be positive");
    }
    let mut rs = radii.to_vec();
    rs.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(rs.len());
    let mut running_max = 0.0f64;
    let mut running_min: Option<f64> = None;
    for r in rs {
        let window = records.window(r);
        let tau = window.map(|k| records.records[k - 1].n);
        let mu_ball = system.ball_measure(target, r);
        let e_r = tau.map(|t| t as f64 * mu_ball);
        if let Some(e) = e_r {
            running_max = running_max.max(e);
            if window.is_some_and(|k| k >= 3) {
                running_min = Some(running_min.map_or(e, |m| m.min(e)));
            }
        }
        rows.push(EntryRow { r, tau, mu_ball, e_r, window, running_max, running_min_deep: running_min });
    }
    Ok(EntryTable { rows })
}

/// Radii whose open balls in d_α are the cylinders [y|_n], n = 1..=depth.
pub fn cylinder_radii(alpha: f64, depth: usize) -> Vec<f64> {
    (1..=depth).map(|n| (-alpha * (n as f64 - 1.0)).exp()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimates {
    /// Slope envelopes of log τ against −log r.
    pub hitting_lower: f64,
    pub hitting_upper: f64,
    pub hitting_fit: f64,
    /// Slope envelopes of log μ(B(y,r)) against log r.
    pub dim_lower: f64,
    pub dim_upper: f64,
    pub dim_fit: f64,
    pub points: usize,
}

pub const MIN_RATE_ROWS: usize = 10;

/// Slopes over the uncensored rows of an entry table (needs at least 10 of them).
pub fn rate_estimates(table: &EntryTable) -> Result<RateEstimates> {
    let rows: Vec<&EntryRow> = table.rows.iter().filter(|row| row.tau.is_some() && row.mu_ball > 0.0).collect();
    if rows.len() < MIN_RATE_ROWS {
        return invalid(format!("rate estimates need at least {MIN_RATE_ROWS} uncensored rows, got {}", rows.len()));
    }
    let hx: Vec<f64> = rows.iter().map(|row| -row.r.ln()).collect();
    let hy: Vec<f64> = rows.iter().map(|row| (row.tau.expect("filtered") as f64).ln()).collect();
    let dx: Vec<f64> = rows.iter().map(|row| row.r.ln()).collect();
    let dy: Vec<f64> = rows.iter().map(|row| row.mu_ball.ln()).collect();
    let fit = |xs: &[f64], ys: &[f64]| -> Result<(f64, f64, f64)> {
        let width = (xs.len() / 2).max(5).min(xs.len());
        let full = stats::least_squares(xs, ys).ok_or_else(|| Error::Degenerate("flat radius schedule".into()))?;
        let (lo, hi) = stats::window_slopes(xs, ys, width).unwrap_or((full.slope, full.slope));
        Ok((lo.min(full.slope), hi.max(full.slope), full.slope))
    };
    let (hl, hu, hf) = fit(&hx, &hy)?;
    let (dl, du, df) = fit(&dx, &dy)?;
    Ok(RateEstimates {
        hitting_lower: hl,
        hitting_upper: hu,
        hitting_fit: hf,
        dim_lower: dl,
        dim_upper: du,
        dim_fit: df,
        points: rows.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairScan {
    pub pair: usize,
    /// Orbit landed on the target (atomless guard); excluded from medians.
    pub degenerate: bool,
    pub records: RecordSequence,
    /// Running max of n_k·μ(B(y, r_{k−1})) over k ≥ 2, one entry per record.
    pub running_max: Vec<f64>,
    /// Per horizon: sup of E_r over the record windows that close by that horizon.
    pub sup_by_horizon: Vec<f64>,
    /// Per horizon: min over k ≥ 3 of n_k·μ(closed B(y, r_k)).
    pub deep_min_by_horizon: Vec<Option<f64>>,
}

impl PairScan {
    pub fn monotone(&self) -> bool {
        self.running_max.windows(2).all(|w| w[0] <= w[1]) && self.sup_by_horizon.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceScan {
    pub horizons: Vec<u64>,
    pub pairs: Vec<PairScan>,
    pub median_sup: Vec<f64>,
    pub median_deep_min: Vec<f64>,
    pub excluded: usize,
}

impl DivergenceScan {
    /// Medians of the running max strictly increase across horizons.
    pub fn trend_increasing(&self) -> bool {
        self.median_sup.windows(2).all(|w| w[0] < w[1])
    }
}

/// Scan `pairs` μ-typical (x, y) pairs (or y = x in diagonal mode) up to the largest horizon.
pub fn divergence_scan(
    system: &MeasuredSystem,
    pairs: usize,
    horizons: &[u64],
    seeds: SeedStream,
    diagonal: bool,
) -> Result<DivergenceScan> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) || horizons[0] < 1 {
        return invalid("horizons must be positive and strictly increasing");
    }
    let max_h = *horizons.last().expect("non-empty");
    let scans: Vec<PairScan> = (0..pairs)
        .into_par_iter()
        .map(|i| -> Result<PairScan> {
            let x_seeds = seeds.child("x");
            let (target, source) = if diagonal {
                let path = system.sample_path(x_seeds, i as u64);
                (system.target(&path), path.stream())
            } else {
                let y = system.sample_path(seeds.child("y"), i as u64);
                (system.target(&y), system.sample_source(x_seeds, i as u64))
            };
            let mut orbit = system.orbit(source);
            let records = record_sequence(orbit.as_mut(), &target, max_h)?;
            Ok(scan_pair(system, &target, i, records, horizons))
        })
        .collect::<Result<Vec<_>>>()?;
    let live: Vec<&PairScan> = scans.iter().filter(|p| !p.degenerate).collect();
    let mut median_sup = Vec::with_capacity(horizons.len());
    let mut median_deep_min = Vec::with_capacity(horizons.len());
    for h in 0..horizons.len() {
        let sups: Vec<f64> = live.iter().map(|p| p.sup_by_horizon[h]).collect();
        median_sup.push(stats::median(&sups));
        let mins: Vec<f64> = live.iter().filter_map(|p| p.deep_min_by_horizon[h]).collect();
        median_deep_min.push(if mins.is_empty() { f64::NAN } else { stats::median(&mins) });
    }
    Ok(DivergenceScan {
        horizons: horizons.to_vec(),
        excluded: scans.len() - live.len(),
        pairs: scans,
        median_sup,
        median_deep_min,
    })
}

fn scan_pair(system: &MeasuredSystem, target: &Target, pair: usize, records: RecordSequence, horizons: &[u64]) -> PairScan {
    let recs = &records.records;
    let mut running = 0.0f64;
    let mut running_max = Vec::with_capacity(recs.len());
    // E at the left end of window k (r = r_{k−1}) and the closed-ball value at its right end.
    let mut left = vec![f64::NAN; recs.len()];
    let mut right = vec![f64::NAN; recs.len()];
    for k in 1..recs.len() {
        left[k] = recs[k].n as f64 * system.ball_measure(target, recs[k - 1].r);
        running = running.max(left[k]);
        running_max.push(running);
        if k >= 2 && recs[k].r > 0.0 {
            right[k] = recs[k].n as f64 * system.closed_ball_measure(target, recs[k].r);
        }
    }
    let mut sup_by_horizon = Vec::with_capacity(horizons.len());
    let mut deep_min_by_horizon = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let upto = recs.partition_point(|r| r.n <= h);
        sup_by_horizon.push(left[1.min(upto)..upto].iter().copied().fold(0.0, f64::max));
        let m = right[2.min(upto)..upto].iter().copied().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min);
        deep_min_by_horizon.push(m.is_finite().then_some(m));
    }
    PairScan { pair, degenerate: records.terminal, records, running_max, sup_by_horizon, deep_min_by_horizon }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailRow {
    pub k: u64,
    /// â_r^(k) = share of samples with τ_{B_r} ≤ k
    pub a: f64,
    pub a_se: f64,
    /// q̂_r^(k) = share of samples with τ_{R_r} ≤ k
    pub q: f64,
    pub q_se: f64,
    /// k·μ(R_r)
    pub bound: f64,
}

impl TailRow {
    pub fn bound_ok(&self) -> bool {
        self.q <= self.bound + 3.0 * self.q_se
    }

    pub fn ordered(&self) -> bool {
        self.a <= self.q + 2.0 * (self.a_se * self.a_se + self.q_se * self.q_se).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaitingTail {
    pub r: f64,
    pub mu_ball: f64,
    pub mu_cover: f64,
    pub samples: usize,
    pub rows: Vec<TailRow>,
    /// (j, share of samples with T^j x ∈ B_r, standard error): μ(T^{−j}B) = μ(B).
    pub window_check: Vec<(u64, f64, f64)>,
}

pub const SAMPLE_BUDGET: usize = 100_000_000;

pub fn waiting_tail(
    system: &MeasuredSystem,
    target: &Target,
    r: f64,
    k_grid: &[u64],
    samples: usize,
    seeds: SeedStream,
) -> Result<WaitingTail> {
    if samples == 0 || samples > SAMPLE_BUDGET {
        return Err(Error::Budget { needed: samples as u128, budget: SAMPLE_BUDGET as u128 });
    }
    if !(r > 0.0) {
        return invalid("radius must be positive");
    }
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let kmax = grid.last().copied().unwrap_or(0);
    let mu_ball = system.ball_measure(target, r);
    // The shift's ball is a cylinder and is its own cover; intervals use the Markov cover.
    let cover = match (&system.geometry, target) {
        (Geometry::Interval { coding, .. }, Target::Point { y, .. }) => {
            let c = coding.markov_cover(&*system.gibbs, *y, r)?;
            Some((c.left, c.right, c.mu_cover))
        }
        _ => None,
    };
    let mu_cover = cover.map_or(mu_ball, |c| c.2);
    let checks = [1u64, kmax.max(1)];
    let results: Vec<(u64, u64, [bool; 2])> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut orbit = system.orbit(system.sample_source(seeds, i as u64));
            let mut tb = u64::MAX;
            let mut tr = u64::MAX;
            let mut seen = [false; 2];
            for j in 1..=kmax.max(1) {
                orbit.step();
                let in_b = orbit.distance(target) < r;
                let in_r = match cover {
                    Some((lo, hi, _)) => orbit.position().is_some_and(|x| lo <= x && x < hi),
                    None => in_b,
                };
                if in_b && tb == u64::MAX {
                    tb = j;
                }
                if in_r && tr == u64::MAX {
                    tr = j;
                }
                for (c, &cj) in checks.iter().enumerate() {
                    if cj == j {
                        seen[c] = in_b;
                    }
                }
            }
            (tb, tr, seen)
        })
        .collect();
    let n = samples as f64;
    let rows = grid
        .iter()
        .map(|&k| {
            let a = results.iter().filter(|x| x.0 <= k).count() as f64 / n;
            let q = results.iter().filter(|x| x.1 <= k).count() as f64 / n;
            TailRow {
                k,
                a,
                a_se: stats::binomial_se(a, samples),
                q,
                q_se: stats::binomial_se(q, samples),
                bound: k as f64 * mu_cover,
            }
        })
        .collect();
    let window_check = checks
        .iter()
        .enumerate()
        .map(|(c, &j)| {
            let p = results.iter().filter(|x| x.2[c]).count() as f64 / n;
            (j, p, stats::binomial_se(p, samples))
        })
        .collect();
    Ok(WaitingTail { r, mu_ball, mu_cover, samples, rows, window_check })
}

/// 1 − (1 − μ)^k
pub fn independent_hit_probability(mu: f64, k: u64) -> f64 {
    1.0 - (1.0 - mu).powf(k as f64)
}

/// Exact P(the word occurs starting at some position j = 1..=k) for i.i.d. symbols with the
/// given probabilities, by a KMP automaton over the k + |w| − 1 symbols involved.
pub fn pattern_hit_probability(word: &[Symbol], probs: &[f64], k: u64) -> f64 {
    let l = word.len();
    if k == 0 || l == 0 {
        return if l == 0 && k > 0 { 1.0 } else { 0.0 };
    }
    let mut fail = vec![0usize; l];
    let mut j = 0;
    for i in 1..l {
        while j > 0 && word[i] != word[j] {
            j = fail[j - 1];
        }
        if word[i] == word[j] {
            j += 1;
        }
        fail[i] = j;
    }
    let delta = |state: usize, s: Symbol| -> usize {
        let mut q = state;
        loop {
            if q < l && word[q] == s {
                return q + 1;
            }
            if q == 0 {
                return 0;
            }
            q = fail[q - 1];
        }
    };
    // Symbol x_0 is irrelevant; positions 1..k+l−1 are scanned.
    let steps = k as usize + l - 1;
    let mut dist = vec![0.0f64; l];
    dist[0] = 1.0;
    let mut hit = 0.0;
    for _ in 0..steps {
        let mut next = vec![0.0f64; l];
        for (q, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (s, &ps) in probs.iter().enumerate() {
                let t = delta(q, s as Symbol);
                if t == l {
                    hit += p * ps;
                } else {
                    next[t] += p * ps;
                }
            }
        }
        dist = next;
    }
    hit
}

/// Γ(M) = 1 − e^{−4MC}
pub fn gamma_of(m: f64, c: f64) -> f64 {
    1.0 - (-4.0 * m * c).exp()
}

/// Least Ω with (WΓ)^{Ω+1} ≤ δ/2.
pub fn stage_count(delta: f64, w_gamma: f64) -> Result<usize> {
    if !(w_gamma > 0.0 && w_gamma < 1.0) {
        return Err(Error::Infeasible(format!("WΓ = {w_gamma} is not in (0,1)")));
    }
    if !(delta > 0.0 && delta < 2.0) {
        return invalid("failure budget δ must lie in (0,2)");
    }
    let mut omega = ((delta / 2.0).ln() / w_gamma.ln()).ceil().max(1.0) as usize - 1;
    while omega > 0 && w_gamma.powi(omega as i32) <= delta / 2.0 {
        omega -= 1;
    }
    while w_gamma.powi(omega as i32 + 1) > delta / 2.0 {
        omega += 1;
    }
    Ok(omega)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderStage {
    pub i: usize,
    pub r: f64,
    pub mu_ball: f64,
    pub mu_cover: f64,
    /// k_i = 2M/μ(R_{r_i})
    pub k: f64,
    /// k_i − 2(s + k_{i−1}); None for i = 0.
    pub slack_gap: Option<f64>,
    /// (δ/2Ω)/(k_{i−1} + s) − μ(R_{r_i}); None for i = 0.
    pub slack_mass: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub m: f64,
    pub c: f64,
    pub d: f64,
    pub gamma: f64,
    pub big_gamma: f64,
    pub s: usize,
    pub w: f64,
    pub delta: f64,
    pub omega: usize,
    pub stages: Vec<LadderStage>,
    pub samples: usize,
    /// Monte Carlo share of x with τ_{B_{r_i}} ≤ M/μ(B_{r_i}) at every stage.
    pub bad_fraction: f64,
    pub stderr: f64,
}

impl Certificate {
    pub fn verdict(&self) -> bool {
        self.bad_fraction <= self.delta + 3.0 * self.stderr
    }
}

pub const MAX_GAP: usize = 100_000;

/// Stage ladder on the radius lattice of the system and a Monte Carlo estimate of μ(∩ A_{r_i}^c).
pub fn build_certificate(
    system: &MeasuredSystem,
    target: &Target,
    m: f64,
    delta: f64,
    fit: &MixingFit,
    samples: usize,
    seeds: SeedStream,
) -> Result<Certificate> {
    if !(m > 0.0) {
        return invalid("M must be positive");
    }
    if samples == 0 || samples > SAMPLE_BUDGET {
        return Err(Error::Budget { needed: samples as u128, budget: SAMPLE_BUDGET as u128 });
    }
    let big_gamma = gamma_of(m, fit.c);
    let mut s = 0usize;
    while big_gamma * (1.0 + fit.d * fit.gamma.powi(s as i32)) >= 1.0 {
        s += 1;
        if s > MAX_GAP {
            return Err(Error::Infeasible(format!("no gap s ≤ {MAX_GAP} makes Γ(1 + Dγ^s) < 1")));
        }
    }
    let w = 1.0 + fit.d * fit.gamma.powi(s as i32);
    let omega = stage_count(delta, w * big_gamma)?;
    let lattice = radius_lattice(system)?;
    let mu = |r: f64| -> Result<(f64, f64)> {
        let b = system.ball_measure(target, r);
        let c = match (&system.geometry, target) {
            (Geometry::Interval { coding, .. }, Target::Point { y, .. }) => {
                coding.markov_cover(&*system.gibbs, *y, r)?.mu_cover
            }
            _ => b,
        };
        Ok((b, c))
    };
    // r_0: the largest lattice radius whose event {τ ≤ M/μ(B)} is not empty.
    let mut idx = 0usize;
    let mut stages = Vec::with_capacity(omega + 1);
    loop {
        let r = *lattice.get(idx).ok_or_else(|| Error::Infeasible("radius lattice exhausted before r_0".into()))?;
        let (b, c) = mu(r)?;
        if b > 0.0 && m / b >= 1.0 {
            stages.push(LadderStage { i: 0, r, mu_ball: b, mu_cover: c, k: 2.0 * m / c, slack_gap: None, slack_mass: None });
            break;
        }
        idx += 1;
    }
    let mass_cap = delta / (2.0 * omega.max(1) as f64);
    while stages.len() <= omega {
        let prev = *stages.last().expect("r_0 exists");
        let need_gap = 2.0 * (s as f64 + prev.k);
        let need_mass = mass_cap / (prev.k + s as f64);
        let mut found = None;
        while idx + 1 < lattice.len() {
            idx += 1;
            let r = lattice[idx];
            let (b, c) = mu(r)?;
            if !(c > 0.0) {
                break;
            }
            let k = 2.0 * m / c;
            if k >= need_gap && c <= need_mass {
                found = Some(LadderStage {
                    i: stages.len(),
                    r,
                    mu_ball: b,
                    mu_cover: c,
                    k,
                    slack_gap: Some(k - need_gap),
                    slack_mass: Some(need_mass - c),
                });
                break;
            }
        }
        match found {
            Some(st) => stages.push(st),
            None => {
                return Err(Error::Infeasible(format!(
                    "stage {}: no lattice radius meets k ≥ {need_gap:.4e} and μ(R) ≤ {need_mass:.4e}",
                    stages.len()
                )))
            }
        }
    }
    let limits: Vec<u64> = stages.iter().map(|st| (m / st.mu_ball).floor() as u64).collect();
    let horizon = *limits.iter().max().expect("non-empty");
    let bad: usize = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut orbit = system.orbit(system.sample_source(seeds, i as u64));
            let mut hit = vec![false; stages.len()];
            let mut open = stages.len();
            for j in 1..=horizon {
                orbit.step();
                let d = orbit.distance(target);
                for (h, st) in stages.iter().enumerate() {
                    if !hit[h] && j <= limits[h] && d < st.r {
                        hit[h] = true;
                        open -= 1;
                    }
                }
                // A stage whose window has closed without a hit clears x from the bad set.
                if (0..stages.len()).any(|h| !hit[h] && j >= limits[h]) || open == 0 {
                    break;
                }
            }
            hit.iter().all(|&b| b) as usize
        })
        .sum();
    let p = bad as f64 / samples as f64;
    Ok(Certificate {
        m,
        c: fit.c,
        d: fit.d,
        gamma: fit.gamma,
        big_gamma,
        s,
        w,
        delta,
        omega,
        stages,
        samples,
        bad_fraction: p,
        stderr: stats::binomial_se(p, samples),
    })
}

/// Radii at which R_r can change: cylinder radii on a shift, dyadic radii on intervals.
fn radius_lattice(system: &MeasuredSystem) -> Result<Vec<f64>> {
    Ok(match &system.geometry {
        Geometry::Shift(spec) => {
            let max_n = ((745.0 / spec.alpha) as usize).min(4000);
            cylinder_radii(spec.alpha, max_n)
        }
        Geometry::Interval { .. } => (1..23).map(|j| 0.5f64.powi(j)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expanding::{ExpandingMap, OrbitPoint, PointOrbit};
    use crate::symbolic::{IncidenceMatrix, SymbolPath, Word};
    use crate::thermo::{GibbsState, Potential};
    use std::sync::Arc;

    fn doubling() -> MeasuredSystem {
        let map = ExpandingMap::doubling();
        let g = GibbsState::new(&Potential::zero(2), &IncidenceMatrix::full(2)).unwrap();
        MeasuredSystem::interval("doubling", Arc::new(g), map.coding().unwrap().clone()).unwrap()
    }

    fn shift2() -> MeasuredSystem {
        let g = GibbsState::new(&Potential::zero(2), &IncidenceMatrix::full(2)).unwrap();
        MeasuredSystem::shift("full-shift2", Arc::new(g), 1.0).unwrap()
    }

    #[test]
    fn records_of_one_fifth() {
        let sys = doubling();
        let map = Arc::new(ExpandingMap::doubling());
        let mut o = PointOrbit::new(map.clone(), OrbitPoint::rational(1, 5)).unwrap();
        let y = sys.point_target(0.0).unwrap();
        let rec = record_sequence(&mut o, &y, 1000).unwrap();
        assert_eq!(rec.records, vec![Record { n: 1, r: 0.4 }, Record { n: 4, r: 0.2 }]);
        assert!(rec.censored());
        let t = entry_table(&rec, &sys, &y, &[0.3, 0.5]).unwrap();
        assert_eq!(t.rows[0].tau, Some(1));
        assert!((t.rows[0].e_r.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(t.rows[1].tau, Some(4));
        assert!((t.rows[1].mu_ball - 0.3).abs() < 1e-15);
        assert!((t.rows[1].e_r.unwrap() - 1.2).abs() < 1e-12);
        assert!(t.rows.windows(2).all(|w| w[0].running_max <= w[1].running_max));
        let mut z = PointOrbit::new(map, OrbitPoint::rational(0, 1)).unwrap();
        let rec = record_sequence(&mut z, &y, 10).unwrap();
        assert_eq!(rec.records, vec![Record { n: 1, r: 0.0 }]);
        assert!(rec.terminal);
        assert!(record_sequence(&mut z, &y, 0).is_err());
    }

    #[test]
    fn shift_record_at_depth_five() {
        let sys = shift2();
        let y = sys.target(&SymbolPath::constant(0));
        let x = SymbolPath::periodic(Word::parse("2,1,1,1,1,1,2").unwrap(), Word::new(vec![1])).unwrap();
        let rec = record_sequence(sys.orbit_of(&x).as_mut(), &y, 50).unwrap();
        assert_eq!(rec.records[0], Record { n: 1, r: (-5f64).exp() });
    }

    #[test]
    fn record_tau_duality_and_monotonicity() {
        let sys = doubling();
        let seeds = SeedStream::new(11, "dual");
        let mut checked = 0;
        for i in 0..100u64 {
            let y = sys.target(&sys.sample_path(seeds.child("y"), i));
            let x = sys.sample_path(seeds.child("x"), i);
            let rec = record_sequence(sys.orbit_of(&x).as_mut(), &y, 4000).unwrap();
            let r = 0.5f64.powi(2 + (i % 9) as i32);
            let direct = tau_direct(sys.orbit_of(&x).as_mut(), &y, r, 4000);
            assert_eq!(rec.tau(r), direct);
            checked += direct.is_some() as usize;
            let taus: Vec<Option<u64>> = [0.2, 0.1, 0.05, 0.01].iter().map(|&r| rec.tau(r)).collect();
            for w in taus.windows(2) {
                if let (Some(a), Some(b)) = (w[0], w[1]) {
                    assert!(a <= b);
                }
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn cylinder_mode_matches_brute_force() {
        let sys = shift2();
        let seeds = SeedStream::new(4, "cyl");
        for i in 0..30u64 {
            let yp = sys.sample_path(seeds.child("y"), i);
            let y = sys.target(&yp);
            let xp = sys.sample_path(seeds.child("x"), i);
            let rec = record_sequence(sys.orbit_of(&xp).as_mut(), &y, 1 << 14).unwrap();
            let t = entry_table(&rec, &sys, &y, &cylinder_radii(1.0, 12)).unwrap();
            let xs = xp.prefix((1 << 14) + 16);
            let ys = yp.prefix(12);
            for (n, row) in (1..=12).zip(&t.rows) {
                let brute = (1..=(1u64 << 14)).find(|&j| {
                    xs.symbols()[j as usize..j as usize + n] == ys.symbols()[..n]
                });
                assert_eq!(row.tau, brute, "depth {n}");
                assert!((row.mu_ball - 0.5f64.powi(n as i32)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pattern_probability_oracle() {
        let half = [0.5, 0.5];
        // Non-overlapping pattern of length 1: 1 − (1/2)^k.
        assert!((pattern_hit_probability(&[0], &half, 3) - 0.875).abs() < 1e-15);
        assert_eq!(pattern_hit_probability(&[0, 1], &half, 0), 0.0);
        // Brute force over all binary strings for word 0,1,1,0,1 and k = 6.
        let w = [0u32, 1, 1, 0, 1];
        let k = 6usize;
        let len = k + w.len();
        let mut hits = 0u32;
        for bits in 0u32..(1 << len) {
            let s: Vec<u32> = (0..len).map(|i| (bits >> i) & 1).collect();
            if (1..=k).any(|j| s[j..j + 5] == w) {
                hits += 1;
            }
        }
        let exact = hits as f64 / (1u64 << len) as f64;
        assert!((pattern_hit_probability(&w, &half, k as u64) - exact).abs() < 1e-15);
    }

    #[test]
    fn certificate_formulas() {
        assert!((gamma_of(1.0, 1.0) - 0.9816843611112658).abs() < 1e-15);
        let omega = stage_count(0.2, 0.99).unwrap();
        assert_eq!(omega, 229);
        assert!(0.99f64.powi(omega as i32 + 1) <= 0.1 && 0.99f64.powi(omega as i32) > 0.1);
        assert!(stage_count(0.2, 1.0).is_err());
    }

    #[test]
    fn waiting_tail_small() {
        let sys = shift2();
        let y = sys.target(&SymbolPath::periodic(Word::parse("1,2,2,1,2").unwrap(), Word::new(vec![0])).unwrap());
        let r = (-4.5f64).exp();
        let wt = waiting_tail(&sys, &y, r, &[0, 1, 8, 32], 4000, SeedStream::new(2, "wt")).unwrap();
        assert!((wt.mu_ball - 1.0 / 32.0).abs() < 1e-15);
        assert_eq!((wt.rows[0].a, wt.rows[0].q), (0.0, 0.0));
        for row in &wt.rows {
            assert!(row.bound_ok() && row.ordered());
        }
        assert!(wt.rows.windows(2).all(|w| w[0].a <= w[1].a && w[0].q <= w[1].q));
        let exact = pattern_hit_probability(&[0, 1, 1, 0, 1], &[0.5, 0.5], 32);
        let row = wt.rows[3];
        assert!((row.a - exact).abs() < 4.0 * row.a_se);
    }

    #[test]
    fn waiting_tail_interval_cover() {
        let sys = doubling();
        let y = sys.point_target(0.3).unwrap();
        let wt = waiting_tail(&sys, &y, 1.0 / 64.0, &[1, 4, 16], 3000, SeedStream::new(8, "wi")).unwrap();
        assert!(wt.mu_cover >= wt.mu_ball);
        for row in &wt.rows {
            assert!(row.q >= row.a && row.bound_ok());
        }
    }
}
