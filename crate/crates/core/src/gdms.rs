//! Graph directed Markov systems on intervals.

use std::sync::Arc;

use crate::coding::{Coding, CylinderMeasure};
use crate::error::{invalid, Error, Result};
use crate::maps::Contraction;
use crate::seeds::SeedStream;
use crate::stats;
use crate::symbolic::{IncidenceMatrix, Symbol, SymbolPath, Word, ENUMERATION_BUDGET};
use crate::system::{project_symbols, projection_window};
use crate::thermo::{ConformalGibbs, GibbsState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub initial: usize,
    pub terminal: usize,
    /// φ_e: X_{t(e)} → X_{i(e)}
    pub map: Contraction,
}

#[derive(Clone, Debug)]
pub struct Gdms {
    pub name: String,
    /// Seed intervals X_v.
    pub seeds: Vec<(f64, f64)>,
    pub edges: Vec<Edge>,
    pub coding: Arc<Coding>,
    /// Set when a countable edge set has been cut at a finite N.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionResult {
    pub point: f64,
    pub radius: f64,
    pub interval: (f64, f64),
}

#[derive(Clone, Debug)]
pub enum Code {
    Infinite(SymbolPath),
    Finite(Word),
}

/// A point of the limit set carried together with its code.
#[derive(Clone, Debug)]
pub struct CodedPoint {
    pub code: Code,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoscReport {
    pub osc: bool,
    pub sosc: bool,
    /// Pairs of edges (1-based) whose first-level images overlap in their interiors.
    pub overlaps: Vec<(usize, usize)>,
    /// A periodic code whose projection lies in the interior of its seed set.
    pub witness: Option<(Word, f64)>,
}

#[derive(Clone, Debug)]
pub enum LimitMeasure {
    Markov(Arc<GibbsState>),
    /// Conformal measure of the continued-fraction system (t = 1 gives the Gauss measure).
    Conformal(Arc<ConformalGibbs>),
}

impl CylinderMeasure for LimitMeasure {
    fn mass(&self, word: &Word) -> f64 {
        match self {
            LimitMeasure::Markov(g) => g.mass(word),
            LimitMeasure::Conformal(c) => c.mass(word),
        }
    }

    fn extend(&self, word: &Word, mass: f64, e: Symbol) -> f64 {
        match self {
            LimitMeasure::Markov(g) => g.extend(word, mass, e),
            LimitMeasure::Conformal(c) => c.extend(word, mass, e),
        }
    }

    fn point_cdf(&self, x: f64) -> Option<f64> {
        match self {
            LimitMeasure::Markov(g) => g.point_cdf(x),
            LimitMeasure::Conformal(c) => c.point_cdf(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BallMethod {
    CylinderCover { max_depth: usize, max_nodes: usize },
    MonteCarlo { samples: usize, seeds: SeedStream },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallEstimate {
    pub lower: f64,
    pub upper: f64,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerLawFit {
    pub alpha_fit: f64,
    /// Smallest C with μ(B(y,r)) ≤ C r^α at every fitted radius.
    pub c: f64,
    pub rms_residual: f64,
    pub points: Vec<(f64, f64)>,
    pub alpha_theory: Option<f64>,
}

impl PowerLawFit {
    pub fn above_floor(&self, slack: f64) -> Option<bool> {
        self.alpha_theory.map(|a| self.alpha_fit >= a - slack)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovEstimate {
    pub chi: f64,
    pub stderr: f64,
    pub samples: usize,
}

const MC_BUDGET: usize = 100_000_000;

impl Gdms {
    pub fn new(name: &str, seeds: Vec<(f64, f64)>, edges: Vec<Edge>, matrix: Option<IncidenceMatrix>) -> Result<Self> {
        if seeds.is_empty() || edges.is_empty() {
            return invalid("a GDMS needs at least one vertex and one edge");
        }
        for (v, &(lo, hi)) in seeds.iter().enumerate() {
            if !(lo < hi) {
                return invalid(format!("seed interval of vertex {} is empty", v + 1));
            }
        }
        for (k, e) in edges.iter().enumerate() {
            if e.initial >= seeds.len() || e.terminal >= seeds.len() {
                return invalid(format!("edge {} refers to a missing vertex", k + 1));
            }
            let (lo, hi) = seeds[e.terminal];
            if let Contraction::Mobius { c, d, .. } = e.map {
                if (c * lo + d) * (c * hi + d) <= 0.0 {
                    return Err(Error::Unsupported(format!("edge {} map has a pole on its seed set", k + 1)));
                }
            }
            let (a, b) = e.map.image(lo, hi);
            let (vlo, vhi) = seeds[e.initial];
            let tol = 1e-12 * (vhi - vlo);
            if a < vlo - tol || b > vhi + tol {
                return invalid(format!("edge {} does not map X_t(e) into X_i(e)", k + 1));
            }
        }
        let n = edges.len();
        let matrix = match matrix {
            Some(m) => {
                if m.size() != n {
                    return invalid("incidence matrix size differs from the edge count");
                }
                for a in 0..n {
                    for b in 0..n {
                        if m.allows(a as Symbol, b as Symbol) && edges[a].terminal != edges[b].initial {
                            return invalid(format!(
                                "A[{}][{}] = 1 but the edges are not composable (t(a) ≠ i(b))",
                                a + 1,
                                b + 1
                            ));
                        }
                    }
                }
                m
            }
            None => IncidenceMatrix::new(
                (0..n)
                    .map(|a| (0..n).map(|b| (edges[a].terminal == edges[b].initial) as u8).collect())
                    .collect(),
            )?,
        };
        let maps = edges.iter().map(|e| e.map).collect();
        let domains = edges.iter().map(|e| seeds[e.terminal]).collect();
        let coding = Coding::new(maps, domains, matrix)?;
        Ok(Gdms { name: name.to_string(), seeds, edges, coding: Arc::new(coding), truncated: false })
    }

    fn ifs(name: &str, maps: Vec<Contraction>) -> Result<Self> {
        let edges = maps.into_iter().map(|map| Edge { initial: 0, terminal: 0, map }).collect();
        Self::new(name, vec![(0.0, 1.0)], edges, None)
    }

    /// φ_1 = x/3, φ_2 = x/3 + 2/3
    pub fn cantor3() -> Self {
        Self::ifs("cantor3", vec![Contraction::affine(1.0 / 3.0, 0.0), Contraction::affine(1.0 / 3.0, 2.0 / 3.0)])
            .expect("valid")
    }

    /// φ_1 = x/2, φ_2 = x/2 + 1/2: the limit set is [0,1].
    pub fn dyadic2() -> Self {
        Self::ifs("dyadic2", vec![Contraction::affine(0.5, 0.0), Contraction::affine(0.5, 0.5)]).expect("valid")
    }

    /// φ_n(x) = 1/(n + x), n = 1..N.
    pub fn gauss_cf(n: usize) -> Result<Self> {
        if n < 2 {
            return invalid("continued-fraction truncation needs N ≥ 2");
        }
        let mut g = Self::ifs("gauss-cf", (1..=n as u64).map(Contraction::continued_fraction).collect())?;
        g.truncated = true;
        Ok(g)
    }

    pub fn by_name(name: &str, truncation: usize) -> Result<Self> {
        match name {
            "cantor3" => Ok(Self::cantor3()),
            "dyadic2" => Ok(Self::dyadic2()),
            "gauss-cf" => Self::gauss_cf(truncation),
            other => invalid(format!("unknown GDMS '{other}'")),
        }
    }

    pub fn max_seed_diameter(&self) -> f64 {
        self.seeds.iter().map(|s| s.1 - s.0).fold(0.0, f64::max)
    }

    pub fn project(&self, omega: &Word) -> Result<ProjectionResult> {
        self.coding.matrix.check_admissible(omega)?;
        let interval = self.coding.cylinder_interval(omega);
        let radius =
            self.coding.prefactor * self.coding.contraction.powi(omega.len() as i32) * self.max_seed_diameter();
        Ok(ProjectionResult { point: 0.5 * (interval.0 + interval.1), radius, interval })
    }

    /// π(prefix · period^∞), solved as a fixed point.
    pub fn project_periodic(&self, prefix: &Word, period: &Word) -> Result<f64> {
        self.coding.project_periodic(prefix, period)
    }

    pub fn point_of(&self, z: &CodedPoint) -> f64 {
        match &z.code {
            Code::Finite(w) => project_symbols(&self.coding, w.symbols()),
            Code::Infinite(p) => project_symbols(&self.coding, p.prefix(projection_window(&self.coding)).symbols()),
        }
    }

    /// T_S(z) = π(σω).
    pub fn induced_map_apply(&self, z: &CodedPoint) -> Result<CodedPoint> {
        let code = match &z.code {
            Code::Infinite(p) => Code::Infinite(p.shift(1)),
            Code::Finite(w) => {
                if w.is_empty() {
                    return invalid("code exhausted");
                }
                Code::Finite(w.suffix_from(1))
            }
        };
        Ok(CodedPoint { code })
    }

    /// Open set condition from first-level images; SOSC from a periodic limit point in Int X.
    pub fn check_sosc(&self, resolution: usize) -> Result<SoscReport> {
        let mut overlaps = Vec::new();
        for v in 0..self.seeds.len() {
            let mut imgs: Vec<(f64, f64, usize)> = self
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.initial == v)
                .map(|(k, e)| {
                    let (lo, hi) = self.seeds[e.terminal];
                    let (a, b) = e.map.image(lo, hi);
                    (a, b, k)
                })
                .collect();
            imgs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for i in 0..imgs.len() {
                for j in i + 1..imgs.len() {
                    if imgs[j].0 >= imgs[i].1 - 4.0 * f64::EPSILON * imgs[i].1.abs().max(1.0) {
                        break;
                    }
                    overlaps.push((imgs[i].2.min(imgs[j].2) + 1, imgs[i].2.max(imgs[j].2) + 1));
                }
            }
        }
        overlaps.sort_unstable();
        let witness = self.interior_witness(resolution)?;
        Ok(SoscReport { osc: overlaps.is_empty(), sosc: overlaps.is_empty() && witness.is_some(), overlaps, witness })
    }

    fn interior_witness(&self, resolution: usize) -> Result<Option<(Word, f64)>> {
        for len in 1..=resolution {
            let needed = (self.edges.len() as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
            if needed > ENUMERATION_BUDGET {
                break;
            }
            for w in self.coding.matrix.enumerate(len, ENUMERATION_BUDGET)? {
                let (first, last) = (w.first().expect("len ≥ 1"), w.last().expect("len ≥ 1"));
                if !self.coding.matrix.allows(last, first) {
                    continue;
                }
                let x = self.project_periodic(&Word::empty(), &w)?;
                let (lo, hi) = self.seeds[self.edges[first as usize].initial];
                let margin = 1e-12 * (hi - lo);
                if lo + margin < x && x < hi - margin {
                    return Ok(Some((w, x)));
                }
            }
        }
        Ok(None)
    }

    pub fn ball_measure(&self, measure: &LimitMeasure, y: f64, r: f64, method: &BallMethod) -> Result<BallEstimate> {
        if !(r > 0.0) {
            return invalid("ball radius must be positive");
        }
        match *method {
            BallMethod::CylinderCover { max_depth, max_nodes } => {
                let (mut lower, mut upper) = (0.0, 0.0);
                let mut nodes = 0usize;
                let mut stack = vec![(Word::empty(), 1.0)];
                while let Some((w, mass)) = stack.pop() {
                    for (e, (a, b)) in self.coding.children(&w) {
                        nodes += 1;
                        if nodes > max_nodes {
                            return Err(Error::Budget { needed: nodes as u128, budget: max_nodes as u128 });
                        }
                        if !(a < y + r && b > y - r) {
                            continue;
                        }
                        let m = measure.extend(&w, mass, e);
                        if m == 0.0 {
                            continue;
                        }
                        if a > y - r && b < y + r {
                            lower += m;
                            upper += m;
                        } else if w.len() + 1 >= max_depth {
                            upper += m;
                        } else {
                            stack.push((w.extended(e), m));
                        }
                    }
                }
                let upper = upper.min(1.0);
                Ok(BallEstimate { lower, upper, estimate: 0.5 * (lower + upper), stderr: 0.0 })
            }
            BallMethod::MonteCarlo { samples, seeds } => {
                if samples == 0 || samples > MC_BUDGET {
                    return Err(Error::Budget { needed: samples as u128, budget: MC_BUDGET as u128 });
                }
                let w = projection_window(&self.coding);
                let mut hits = 0usize;
                match measure {
                    LimitMeasure::Markov(g) => {
                        let mut buf = vec![0 as Symbol; w];
                        for i in 0..samples {
                            let mut src = crate::symbolic::PathRule::source(&g.sample_rule(seeds, i as u64));
                            src.fill(&mut buf);
                            let x = project_symbols(&self.coding, &buf);
                            hits += ((x - y).abs() < r) as usize;
                        }
                    }
                    LimitMeasure::Conformal(c) => {
                        let mut rng = seeds.rng(0);
                        for _ in 0..samples {
                            let x = c.sample_point(&mut rng)?;
                            hits += ((x - y).abs() < r) as usize;
                        }
                    }
                }
                let p = hits as f64 / samples as f64;
                let se = stats::binomial_se(p, samples);
                Ok(BallEstimate { lower: (p - 3.0 * se).max(0.0), upper: (p + 3.0 * se).min(1.0), estimate: p, stderr: se })
            }
        }
    }

    /// Least-squares slope of log μ(B(y,r)) against log r with an upper-envelope constant.
    pub fn power_law_fit(&self, measure: &LimitMeasure, y: f64, radii: &[f64]) -> Result<PowerLawFit> {
        if radii.len() < 10 {
            return invalid("power-law fits need at least 10 radii");
        }
        let (lo, hi) = radii.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        if !(lo > 0.0) || (hi / lo).log10() < 3.0 - 1e-9 {
            return invalid("power-law radii must be positive and span at least 3 decades");
        }
        let points: Vec<(f64, f64)> = radii.iter().map(|&r| (r, self.coding.ball_measure(measure, y, r))).collect();
        if points.iter().any(|p| !(p.1 > 0.0)) {
            return Err(Error::Degenerate(format!("a ball around {y} has zero measure")));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
        if ys.iter().all(|&v| (v - ys[0]).abs() < 1e-14) {
            return Err(Error::Degenerate("ball measures do not change with r".into()));
        }
        let fit = stats::least_squares(&xs, &ys).ok_or_else(|| Error::Degenerate("singular fit".into()))?;
        let log_c = xs.iter().zip(&ys).map(|(x, y)| y - fit.slope * x).fold(f64::NEG_INFINITY, f64::max);
        Ok(PowerLawFit {
            alpha_fit: fit.slope,
            c: log_c.exp(),
            rms_residual: fit.rms_residual,
            points,
            alpha_theory: self.exact_lyapunov(measure).map(|chi| 0.5 * entropy(measure, chi) / chi),
        })
    }

    /// χ = Σ_e μ([e])·(−log|a_e|) when every map is affine.
    pub fn exact_lyapunov(&self, measure: &LimitMeasure) -> Option<f64> {
        let mut chi = 0.0;
        for (k, e) in self.edges.iter().enumerate() {
            let Contraction::Affine { scale, .. } = e.map else { return None };
            chi += measure.mass(&Word::new(vec![k as Symbol])) * -scale.abs().ln();
        }
        Some(chi)
    }

    /// Birkhoff average of −log|φ'_{ρ_1}(π(σρ))| along a typical code (Markov measures) or
    /// over independent μ-samples of the Gauss measure, where the summand is −2 log x.
    pub fn lyapunov(&self, measure: &LimitMeasure, samples: usize, seeds: SeedStream) -> Result<LyapunovEstimate> {
        if samples < 2 {
            return invalid("Lyapunov estimates need at least 2 samples");
        }
        let values: Vec<f64> = match measure {
            LimitMeasure::Markov(g) => {
                let affine = self.edges.iter().all(|e| matches!(e.map, Contraction::Affine { .. }));
                let w = if affine { 1 } else { projection_window(&self.coding) };
                let path = SymbolPath::from_rule(Arc::new(g.sample_rule(seeds, 0)));
                let code = path.prefix(samples + w);
                let s = code.symbols();
                (0..samples)
                    .map(|k| {
                        let x = if affine { 0.0 } else { project_symbols(&self.coding, &s[k + 1..k + 1 + w]) };
                        -self.coding.maps[s[k] as usize].derivative(x).abs().ln()
                    })
                    .collect()
            }
            LimitMeasure::Conformal(c) => {
                if self.name != "gauss-cf" {
                    return Err(Error::Unsupported("conformal Lyapunov sampling is implemented for gauss-cf".into()));
                }
                let mut rng = seeds.rng(0);
                let mut out = Vec::with_capacity(samples);
                for _ in 0..samples {
                    out.push(-2.0 * c.sample_point(&mut rng)?.ln());
                }
                out
            }
        };
        let chi = stats::mean(&values);
        let stderr = match measure {
            // Batch means absorb the correlation along a single orbit.
            LimitMeasure::Markov(_) => {
                let batch = (samples / 50).max(1);
                let means: Vec<f64> = values.chunks(batch).map(stats::mean).collect();
                stats::mean_se(&means).1
            }
            LimitMeasure::Conformal(_) => stats::mean_se(&values).1,
        };
        if !(chi > 0.0) {
            return Err(Error::Degenerate(format!("non-positive Lyapunov exponent {chi}")));
        }
        Ok(LyapunovEstimate { chi, stderr, samples })
    }
}

/// h_μ: from the Gibbs state, or h = P + tχ for the conformal measure of −t log|φ'|.
pub fn entropy(measure: &LimitMeasure, chi: f64) -> f64 {
    match measure {
        LimitMeasure::Markov(g) => g.entropy,
        LimitMeasure::Conformal(c) => c.pressure() + c.t * chi,
    }
}

/// α_theory = h/(2χ)
pub fn alpha_theory(measure: &LimitMeasure, chi: f64) -> f64 {
    0.5 * entropy(measure, chi) / chi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::{ConformalOperator, Potential};

    fn bern(n: usize) -> LimitMeasure {
        LimitMeasure::Markov(Arc::new(GibbsState::new(&Potential::zero(n), &IncidenceMatrix::full(n)).unwrap()))
    }

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    #[test]
    fn projection_examples() {
        let c = Gdms::cantor3();
        assert_eq!(c.project_periodic(&Word::empty(), &w("1")).unwrap(), 0.0);
        assert!((c.project_periodic(&Word::empty(), &w("2,1")).unwrap() - 0.75).abs() < 1e-15);
        let g = Gdms::gauss_cf(5).unwrap();
        assert!((g.project_periodic(&Word::empty(), &w("2")).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-14);
        let p = c.project(&w("1,2,1")).unwrap();
        let q = c.project(&w("1,2,1,1")).unwrap();
        assert!(p.interval.0 <= q.interval.0 && q.interval.1 <= p.interval.1);
        assert!((p.radius - 1.0 / 27.0).abs() < 1e-15);
        assert!(c.project(&w("3")).is_err());
    }

    #[test]
    fn sosc_examples() {
        let c = Gdms::cantor3().check_sosc(4).unwrap();
        assert!(c.osc && c.sosc);
        let (code, x) = c.witness.unwrap();
        assert_eq!(code, w("1,2"));
        assert!((x - 0.25).abs() < 1e-15);
        let bad = Gdms::ifs("overlap", vec![Contraction::affine(0.6, 0.0), Contraction::affine(0.6, 0.4)]).unwrap();
        let r = bad.check_sosc(3).unwrap();
        assert!(!r.osc && !r.sosc);
        assert_eq!(r.overlaps, vec![(1, 2)]);
        let g = Gdms::gauss_cf(50).unwrap().check_sosc(2).unwrap();
        assert!(g.osc && g.sosc);
    }

    #[test]
    fn compatibility_is_enforced() {
        let edges = vec![
            Edge { initial: 0, terminal: 1, map: Contraction::affine(0.5, 0.0) },
            Edge { initial: 1, terminal: 0, map: Contraction::affine(0.5, 0.5) },
        ];
        let seeds = vec![(0.0, 1.0), (0.0, 1.0)];
        let g = Gdms::new("two", seeds.clone(), edges.clone(), None).unwrap();
        assert!(g.coding.matrix.allows(0, 1) && !g.coding.matrix.allows(0, 0));
        assert!(Gdms::new("two", seeds, edges, Some(IncidenceMatrix::full(2))).is_err());
    }

    #[test]
    fn induced_map_shifts_codes() {
        let c = Gdms::cantor3();
        let z = CodedPoint { code: Code::Infinite(SymbolPath::periodic(Word::empty(), w("1,2")).unwrap()) };
        let tz = c.induced_map_apply(&z).unwrap();
        assert!((c.point_of(&z) - 0.25).abs() < 1e-15);
        assert!((c.point_of(&tz) - 0.75).abs() < 1e-15);
        let fin = CodedPoint { code: Code::Finite(Word::empty()) };
        assert!(c.induced_map_apply(&fin).is_err());
        let g = Gdms::gauss_cf(5).unwrap();
        let z = CodedPoint { code: Code::Infinite(SymbolPath::constant(1)) };
        let x = g.point_of(&z);
        assert!((g.point_of(&g.induced_map_apply(&z).unwrap()) - (1.0 / x - (1.0 / x).floor())).abs() < 1e-12);
    }

    #[test]
    fn ball_measures() {
        let c = Gdms::cantor3();
        let m = bern(2);
        let cover = BallMethod::CylinderCover { max_depth: 30, max_nodes: 100_000 };
        for k in 1..8 {
            let r = 3f64.powi(-k);
            let est = c.ball_measure(&m, 0.0, r, &cover).unwrap();
            assert!(est.lower <= 0.5f64.powi(k) && 0.5f64.powi(k) <= est.upper + 1e-15);
            assert!(est.upper - est.lower <= 2f64.powi(-29));
        }
        let d = Gdms::dyadic2();
        let est = d.ball_measure(&m, 0.5, 0.1, &cover).unwrap();
        assert!((est.estimate - 0.2).abs() < 1e-8);
        let all = d.ball_measure(&m, 0.3, 1.0, &cover).unwrap();
        assert_eq!((all.lower, all.upper), (1.0, 1.0));
        let mc = d
            .ball_measure(&m, 0.5, 0.1, &BallMethod::MonteCarlo { samples: 20_000, seeds: SeedStream::new(5, "mc") })
            .unwrap();
        assert!((mc.estimate - 0.2).abs() < 3.0 * mc.stderr + 1e-12);
        let tight = BallMethod::CylinderCover { max_depth: 30, max_nodes: 5 };
        assert!(matches!(c.ball_measure(&m, 0.5, 0.2, &tight), Err(Error::Budget { .. })));
    }

    #[test]
    fn power_law_examples() {
        let c = Gdms::cantor3();
        let m = bern(2);
        let radii: Vec<f64> = (1..=12).map(|k| 3f64.powi(-k)).collect();
        let fit = c.power_law_fit(&m, 0.0, &radii).unwrap();
        let d = 2f64.ln() / 3f64.ln();
        assert!((fit.alpha_fit - d).abs() < 1e-12);
        assert!((fit.alpha_theory.unwrap() - 0.5 * d).abs() < 1e-12);
        assert_eq!(fit.above_floor(0.0), Some(true));
        let leb = Gdms::dyadic2().power_law_fit(&m, 1.0 / 3.0, &stats::log_grid(1e-6, 1e-1, 12)).unwrap();
        assert!((leb.alpha_fit - 1.0).abs() < 1e-9);
        assert!(c.power_law_fit(&m, 0.0, &radii[..5]).is_err());
        assert!(c.power_law_fit(&m, 0.0, &stats::log_grid(1e-2, 1e-1, 12)).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let seeds = SeedStream::new(9, "lyap");
        let l = Gdms::cantor3().lyapunov(&bern(2), 1000, seeds).unwrap();
        assert!((l.chi - 3f64.ln()).abs() < 1e-12);
        let l = Gdms::dyadic2().lyapunov(&bern(2), 1000, seeds).unwrap();
        assert!((l.chi - 2f64.ln()).abs() < 1e-12);
        let g = Gdms::gauss_cf(2000).unwrap();
        let conf = ConformalOperator::gauss(1.0, 2000).unwrap().solve().unwrap();
        let m = LimitMeasure::Conformal(Arc::new(conf));
        let l = g.lyapunov(&m, 200_000, seeds).unwrap();
        let levy = std::f64::consts::PI.powi(2) / (6.0 * 2f64.ln());
        assert!((l.chi - levy).abs() < 4.0 * l.stderr + 0.01 * levy, "{l:?}");
        assert!((alpha_theory(&m, l.chi) - 0.5).abs() < 0.01);
    }
}
