//! Measured systems: a Gibbs state on codes plus a geometry (ultrametric shift or interval).
//! Orbits walk a lookahead buffer of code symbols; interval positions are read off the buffer.

use std::sync::Arc;

use crate::coding::{Coding, DigitStructure};
use crate::error::{invalid, Error, Result};
use crate::seeds::SeedStream;
use crate::symbolic::{Symbol, SymbolPath, SymbolSource, UltrametricSpec, Word};
use crate::thermo::GibbsState;

#[derive(Clone, Debug)]
pub enum Geometry {
    Shift(UltrametricSpec),
    Interval { coding: Arc<Coding>, circle: bool },
}

#[derive(Clone, Debug)]
pub enum Target {
    /// A point of the shift, with its prefix cached up to the depth where e^{−α n} underflows.
    Sequence { path: SymbolPath, prefix: Arc<[Symbol]>, radii: Arc<[f64]> },
    Point { y: f64, circle: bool },
}

impl Target {
    pub fn point(&self) -> Option<f64> {
        match self {
            Target::Point { y, .. } => Some(*y),
            Target::Sequence { .. } => None,
        }
    }
}

/// Base sets for inducing and cylinder targets.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseSet {
    /// Union of right-open intervals [lo, hi).
    Intervals(Vec<(f64, f64)>),
    Cylinders(Vec<Word>),
}

pub trait Orbit: Send {
    /// n, where the current point is T^n x.
    fn time(&self) -> u64;
    fn step(&mut self);
    fn distance(&mut self, target: &Target) -> f64;
    fn in_set(&mut self, set: &BaseSet) -> bool;
    /// Position of the current point on the interval, if the orbit lives on one.
    fn position(&mut self) -> Option<f64>;
}

const CHUNK: usize = 4096;
/// First refill size; short-lived orbits (return-time samples) rarely need more.
const FIRST_CHUNK: usize = 128;

/// Sliding window over a symbol stream, refilled in chunks.
pub(crate) struct Lookahead {
    source: Box<dyn SymbolSource>,
    buf: Vec<Symbol>,
    start: usize,
    chunk: usize,
}

impl Lookahead {
    pub(crate) fn new(source: Box<dyn SymbolSource>) -> Self {
        Lookahead { source, buf: Vec::new(), start: 0, chunk: FIRST_CHUNK }
    }

    #[inline]
    pub(crate) fn ensure(&mut self, n: usize) {
        if self.start + n > self.buf.len() {
            self.refill(n);
        }
    }

    #[cold]
    fn refill(&mut self, n: usize) {
        self.buf.drain(..self.start);
        self.start = 0;
        let old = self.buf.len();
        let new_len = old + self.chunk.max(n.saturating_sub(old));
        self.chunk = (2 * self.chunk).min(CHUNK);
        self.buf.resize(new_len, 0);
        self.source.fill(&mut self.buf[old..]);
    }

    #[inline]
    pub(crate) fn get(&mut self, i: usize) -> Symbol {
        self.ensure(i + 1);
        self.buf[self.start + i]
    }

    #[inline]
    pub(crate) fn window(&mut self, n: usize) -> &[Symbol] {
        self.ensure(n);
        &self.buf[self.start..self.start + n]
    }

    #[inline]
    pub(crate) fn advance(&mut self) {
        self.ensure(1);
        self.start += 1;
    }

    fn starts_with(&mut self, w: &Word) -> bool {
        let n = w.len();
        self.window(n) == w.symbols()
    }
}

pub struct ShiftOrbit {
    la: Lookahead,
    time: u64,
}

impl ShiftOrbit {
    pub fn new(source: Box<dyn SymbolSource>) -> Self {
        ShiftOrbit { la: Lookahead::new(source), time: 0 }
    }

    /// |x_n ∧ prefix|, capped at the prefix length.
    #[inline]
    pub fn wedge(&mut self, prefix: &[Symbol]) -> usize {
        let mut w = 0;
        while w < prefix.len() {
            if self.la.get(w) != prefix[w] {
                break;
            }
            w += 1;
        }
        w
    }
}

impl Orbit for ShiftOrbit {
    fn time(&self) -> u64 {
        self.time
    }

    #[inline]
    fn step(&mut self) {
        self.la.advance();
        self.time += 1;
    }

    #[inline]
    fn distance(&mut self, target: &Target) -> f64 {
        match target {
            Target::Sequence { prefix, radii, .. } => radii[self.wedge(prefix)],
            Target::Point { .. } => f64::NAN,
        }
    }

    fn in_set(&mut self, set: &BaseSet) -> bool {
        match set {
            BaseSet::Cylinders(words) => words.iter().any(|w| self.la.starts_with(w)),
            BaseSet::Intervals(_) => false,
        }
    }

    fn position(&mut self) -> Option<f64> {
        None
    }
}

/// Orbit of φ_e(x) = (x + c_e)/b systems: the position is the base-b value of a W-digit window.
pub struct DigitOrbit {
    la: Lookahead,
    values: Vec<u32>,
    base: u128,
    top: u128,
    scale: f64,
    width: usize,
    value: u128,
    time: u64,
}

impl DigitOrbit {
    pub fn new(source: Box<dyn SymbolSource>, digits: &DigitStructure) -> Self {
        let base = digits.base as u128;
        let mut width = 0usize;
        let mut top = 1u128;
        // Largest W with b^W ≤ 2^100.
        while top.checked_mul(base).is_some_and(|t| t <= 1u128 << 100) {
            top *= base;
            width += 1;
        }
        let mut la = Lookahead::new(source);
        let mut value = 0u128;
        for i in 0..width {
            value = value * base + digits.values[la.get(i) as usize] as u128;
        }
        DigitOrbit {
            la,
            values: digits.values.clone(),
            base,
            top: top / base,
            scale: 1.0 / top as f64,
            width,
            value,
            time: 0,
        }
    }

    #[inline]
    fn x(&self) -> f64 {
        self.value as f64 * self.scale
    }
}

impl Orbit for DigitOrbit {
    fn time(&self) -> u64 {
        self.time
    }

    #[inline]
    fn step(&mut self) {
        let first = self.values[self.la.get(0) as usize] as u128;
        let incoming = self.values[self.la.get(self.width) as usize] as u128;
        self.value = (self.value - first * self.top) * self.base + incoming;
        self.la.advance();
        self.time += 1;
    }

    #[inline]
    fn distance(&mut self, target: &Target) -> f64 {
        match *target {
            Target::Point { y, circle } => interval_distance(self.x(), y, circle),
            Target::Sequence { .. } => f64::NAN,
        }
    }

    fn in_set(&mut self, set: &BaseSet) -> bool {
        match set {
            BaseSet::Intervals(iv) => {
                let x = self.x();
                iv.iter().any(|&(lo, hi)| lo <= x && x < hi)
            }
            BaseSet::Cylinders(words) => words.iter().any(|w| self.la.starts_with(w)),
        }
    }

    fn position(&mut self) -> Option<f64> {
        Some(self.x())
    }
}

/// Orbit of a general coding: x_n = φ_{x_n}∘…∘φ_{x_{n+W−1}}(midpoint), with s^W below double precision.
pub struct ProjectedOrbit {
    la: Lookahead,
    coding: Arc<Coding>,
    width: usize,
    cached: Option<f64>,
    time: u64,
}

impl ProjectedOrbit {
    pub fn new(source: Box<dyn SymbolSource>, coding: Arc<Coding>) -> Self {
        let width = projection_window(&coding);
        ProjectedOrbit { la: Lookahead::new(source), coding, width, cached: None, time: 0 }
    }

    fn x(&mut self) -> f64 {
        if let Some(x) = self.cached {
            return x;
        }
        let coding = self.coding.clone();
        let x = project_symbols(&coding, self.la.window(self.width));
        self.cached = Some(x);
        x
    }
}

impl Orbit for ProjectedOrbit {
    fn time(&self) -> u64 {
        self.time
    }

    fn step(&mut self) {
        self.la.advance();
        self.cached = None;
        self.time += 1;
    }

    fn distance(&mut self, target: &Target) -> f64 {
        match *target {
            Target::Point { y, circle } => interval_distance(self.x(), y, circle),
            Target::Sequence { .. } => f64::NAN,
        }
    }

    fn in_set(&mut self, set: &BaseSet) -> bool {
        match set {
            BaseSet::Intervals(iv) => {
                let x = self.x();
                iv.iter().any(|&(lo, hi)| lo <= x && x < hi)
            }
            BaseSet::Cylinders(words) => words.iter().any(|w| self.la.starts_with(w)),
        }
    }

    fn position(&mut self) -> Option<f64> {
        Some(self.x())
    }
}

#[inline]
pub fn interval_distance(x: f64, y: f64, circle: bool) -> f64 {
    let d = (x - y).abs();
    if circle {
        d.min(1.0 - d)
    } else {
        d
    }
}

/// Number of symbols after which s^W·diam(hull) drops below 1e-17.
pub fn projection_window(coding: &Coding) -> usize {
    let diam = coding.prefactor * (coding.hull.1 - coding.hull.0);
    let w = ((1e-17 / diam).ln() / coding.contraction.ln()).ceil();
    (w as usize).clamp(1, 4000)
}

/// Fold the maps of a finite code from the inside out, starting at the last domain's midpoint.
pub fn project_symbols(coding: &Coding, symbols: &[Symbol]) -> f64 {
    let Some(&last) = symbols.last() else {
        return 0.5 * (coding.hull.0 + coding.hull.1);
    };
    let (lo, hi) = coding.domains[last as usize];
    let mut x = 0.5 * (lo + hi);
    for &s in symbols.iter().rev() {
        x = coding.maps[s as usize].apply(x);
    }
    x
}

#[derive(Clone, Debug)]
pub struct MeasuredSystem {
    pub name: String,
    pub gibbs: Arc<GibbsState>,
    pub geometry: Geometry,
}

impl MeasuredSystem {
    pub fn shift(name: &str, gibbs: Arc<GibbsState>, alpha: f64) -> Result<Self> {
        Ok(MeasuredSystem {
            name: name.to_string(),
            gibbs,
            geometry: Geometry::Shift(UltrametricSpec::new(alpha)?),
        })
    }

    pub fn interval(name: &str, gibbs: Arc<GibbsState>, coding: Arc<Coding>) -> Result<Self> {
        if coding.matrix != gibbs.matrix {
            return invalid("measure and coding use different incidence matrices");
        }
        Ok(MeasuredSystem { name: name.to_string(), gibbs, geometry: Geometry::Interval { coding, circle: false } })
    }

    /// Circle distance on [0,1); only for full-branch digit maps such as the doubling map.
    pub fn with_circle(mut self, circle: bool) -> Result<Self> {
        if let Geometry::Interval { coding, circle: c } = &mut self.geometry {
            if circle && (coding.digits.is_none() || coding.hull != (0.0, 1.0)) {
                return Err(Error::Unsupported("circle metric needs a digit map on [0,1)".into()));
            }
            *c = circle;
            Ok(self)
        } else if circle {
            Err(Error::Unsupported("circle metric on a shift".into()))
        } else {
            Ok(self)
        }
    }

    pub fn coding(&self) -> Option<&Arc<Coding>> {
        match &self.geometry {
            Geometry::Interval { coding, .. } => Some(coding),
            Geometry::Shift(_) => None,
        }
    }

    pub fn sample_path(&self, seeds: SeedStream, task: u64) -> SymbolPath {
        SymbolPath::from_rule(Arc::new(self.gibbs.sample_rule(seeds, task)))
    }

    /// Fresh unmemoized symbol stream of a μ-typical point.
    pub fn sample_source(&self, seeds: SeedStream, task: u64) -> Box<dyn SymbolSource> {
        use crate::symbolic::PathRule;
        self.gibbs.sample_rule(seeds, task).source()
    }

    pub fn orbit(&self, source: Box<dyn SymbolSource>) -> Box<dyn Orbit> {
        match &self.geometry {
            Geometry::Shift(_) => Box::new(ShiftOrbit::new(source)),
            Geometry::Interval { coding, .. } => match &coding.digits {
                Some(d) => Box::new(DigitOrbit::new(source, d)),
                None => Box::new(ProjectedOrbit::new(source, coding.clone())),
            },
        }
    }

    pub fn orbit_of(&self, path: &SymbolPath) -> Box<dyn Orbit> {
        self.orbit(path.stream())
    }

    /// The point coded by `path` as a hitting target.
    pub fn target(&self, path: &SymbolPath) -> Target {
        match &self.geometry {
            Geometry::Shift(spec) => {
                let cap = ((746.0 / spec.alpha).ceil() as usize + 1).min(1 << 16);
                let prefix: Arc<[Symbol]> = path.prefix(cap).symbols().into();
                let radii: Arc<[f64]> = (0..=cap)
                    .map(|w| if w == cap { 0.0 } else { spec.distance_from_wedge(w) })
                    .collect();
                Target::Sequence { path: path.clone(), prefix, radii }
            }
            Geometry::Interval { coding, circle } => {
                let w = projection_window(coding);
                Target::Point { y: project_symbols(coding, path.prefix(w).symbols()), circle: *circle }
            }
        }
    }

    pub fn point_target(&self, y: f64) -> Result<Target> {
        match &self.geometry {
            Geometry::Interval { coding, circle } => {
                if !(coding.hull.0 <= y && y <= coding.hull.1) {
                    return invalid(format!("target {y} outside the interval"));
                }
                Ok(Target::Point { y, circle: *circle })
            }
            Geometry::Shift(_) => Err(Error::Unsupported("point targets on a shift".into())),
        }
    }

    /// μ(B(y, r)) for the open ball.
    pub fn ball_measure(&self, target: &Target, r: f64) -> f64 {
        self.ball(target, r, false)
    }

    /// μ of the closed ball; equals the open-ball value on intervals (atomless measures).
    pub fn closed_ball_measure(&self, target: &Target, r: f64) -> f64 {
        self.ball(target, r, true)
    }

    fn ball(&self, target: &Target, r: f64, closed: bool) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match (&self.geometry, target) {
            (Geometry::Shift(spec), Target::Sequence { path, prefix, .. }) => {
                if r > 1.0 {
                    return 1.0;
                }
                let n = if closed { spec.closed_ball_depth(r) } else { spec.ball_depth(r) }.expect("r in (0,1]");
                let word = if n <= prefix.len() { Word::new(prefix[..n].to_vec()) } else { path.prefix(n) };
                self.gibbs.cylinder_measure(&word)
            }
            (Geometry::Interval { coding, circle }, Target::Point { y, .. }) => {
                if *circle {
                    if r >= 0.5 {
                        return 1.0;
                    }
                    let (a, b) = (y - r, y + r);
                    let mut m = coding.interval_measure(&*self.gibbs, a.max(0.0), b.min(1.0));
                    if a < 0.0 {
                        m += coding.interval_measure(&*self.gibbs, 1.0 + a, 1.0);
                    }
                    if b > 1.0 {
                        m += coding.interval_measure(&*self.gibbs, 0.0, b - 1.0);
                    }
                    m.min(1.0)
                } else {
                    coding.ball_measure(&*self.gibbs, *y, r)
                }
            }
            _ => f64::NAN,
        }
    }

    pub fn check_set(&self, set: &BaseSet) -> Result<()> {
        match (set, &self.geometry) {
            (BaseSet::Intervals(_), Geometry::Shift(_)) => {
                Err(Error::Unsupported("interval base sets need an interval system".into()))
            }
            (BaseSet::Intervals(iv), _) if iv.iter().any(|&(a, b)| !(a < b)) => invalid("empty interval in base set"),
            (BaseSet::Cylinders(ws), _) if ws.is_empty() || ws.iter().any(|w| w.is_empty()) => {
                invalid("cylinder base sets need non-empty words")
            }
            (BaseSet::Cylinders(ws), _) => {
                for w in ws {
                    self.gibbs.matrix.check_admissible(w)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// μ(X̂); the parts of a base set are assumed disjoint.
    pub fn set_measure(&self, set: &BaseSet) -> Result<f64> {
        self.check_set(set)?;
        Ok(match set {
            BaseSet::Intervals(iv) => {
                let coding = self.coding().expect("checked");
                iv.iter().map(|&(a, b)| coding.interval_measure(&*self.gibbs, a, b)).sum()
            }
            BaseSet::Cylinders(ws) => ws.iter().map(|w| self.gibbs.cylinder_measure(w)).sum(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::Contraction;
    use crate::symbolic::IncidenceMatrix;
    use crate::thermo::Potential;

    fn doubling() -> MeasuredSystem {
        let coding = Coding::new(
            vec![Contraction::affine(0.5, 0.0), Contraction::affine(0.5, 0.5)],
            vec![(0.0, 1.0); 2],
            IncidenceMatrix::full(2),
        )
        .unwrap();
        let g = GibbsState::new(&Potential::zero(2), &IncidenceMatrix::full(2)).unwrap();
        MeasuredSystem::interval("doubling", Arc::new(g), Arc::new(coding)).unwrap()
    }

    #[test]
    fn digit_orbit_tracks_doubling() {
        let sys = doubling();
        // 1/5 = 0.(0011) in binary.
        let path = SymbolPath::periodic(Word::empty(), Word::parse("1,1,2,2").unwrap()).unwrap();
        let mut o = sys.orbit_of(&path);
        let expect = [0.2, 0.4, 0.8, 0.6, 0.2];
        for (n, e) in expect.iter().enumerate() {
            assert_eq!(o.time(), n as u64);
            assert!((o.position().unwrap() - e).abs() < 1e-15);
            o.step();
        }
        let y = sys.point_target(0.0).unwrap();
        assert!((o.distance(&y) - 0.4).abs() < 1e-15);
        assert!(o.in_set(&BaseSet::Intervals(vec![(0.0, 0.5)])));
        assert!(o.in_set(&BaseSet::Cylinders(vec![Word::parse("1,2").unwrap()])));
    }

    #[test]
    fn projected_orbit_matches_digits() {
        let sys = doubling();
        let coding = sys.coding().unwrap().clone();
        let path = sys.sample_path(SeedStream::new(3, "t"), 0);
        let mut a = sys.orbit_of(&path);
        let mut b = ProjectedOrbit::new(path.stream(), coding);
        for _ in 0..200 {
            assert!((a.position().unwrap() - b.position().unwrap()).abs() < 1e-15);
            a.step();
            b.step();
        }
    }

    #[test]
    fn shift_distance_and_balls() {
        let g = GibbsState::new(&Potential::zero(2), &IncidenceMatrix::full(2)).unwrap();
        let sys = MeasuredSystem::shift("full-shift2", Arc::new(g), 1.0).unwrap();
        let y = SymbolPath::constant(0);
        let t = sys.target(&y);
        let x = SymbolPath::periodic(Word::parse("1,1,1,1,1,2").unwrap(), Word::new(vec![0])).unwrap();
        let mut o = sys.orbit_of(&x);
        assert!((o.distance(&t) - (-5f64).exp()).abs() < 1e-15);
        o.step();
        o.step();
        o.step();
        o.step();
        o.step();
        o.step();
        assert_eq!(o.distance(&t), 0.0);
        assert!((sys.ball_measure(&t, (-3f64).exp()) - 1.0 / 16.0).abs() < 1e-15);
        assert!((sys.closed_ball_measure(&t, (-3f64).exp()) - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn circle_balls_wrap() {
        let sys = doubling().with_circle(true).unwrap();
        let t = sys.point_target(0.0).unwrap();
        assert!((sys.ball_measure(&t, 0.1) - 0.2).abs() < 1e-15);
    }
}
