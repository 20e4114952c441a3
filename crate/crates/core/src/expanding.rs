//! Distance expanding interval maps with Markov partitions.
//!
//! Piecewise-linear Markov maps are coded by their inverse branches; the Gauss map is the
//! countable-branch example and is handled through continued-fraction digits.

use std::sync::Arc;

use num_rational::Ratio;
use rand::Rng;

use crate::coding::{Coding, CylinderMeasure, GoodRadiusProbe, MarkovCover};
use crate::error::{invalid, Error, Result};
use crate::maps::Contraction;
use crate::seeds::SeedStream;
use crate::symbolic::{IncidenceMatrix, Word, ENUMERATION_BUDGET};
use crate::system::{interval_distance, BaseSet, Orbit, Target};
use crate::thermo::potential::gauss_word_map;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapFamily {
    PiecewiseLinear,
    Gauss,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrbitPoint {
    Exact(Ratio<i64>),
    Float(f64),
}

impl OrbitPoint {
    pub fn rational(p: i64, q: i64) -> Self {
        OrbitPoint::Exact(Ratio::new(p, q))
    }

    pub fn value(&self) -> f64 {
        match *self {
            OrbitPoint::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            OrbitPoint::Float(x) => x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Iterate {
    pub point: OrbitPoint,
    /// Bound on the accumulated floating-point drift; 0 for exact arithmetic.
    pub drift_bound: f64,
}

#[derive(Clone, Debug)]
pub struct ExpandingMap {
    pub name: String,
    pub family: MapFamily,
    /// Partition endpoints 0 = p_0 < … < p_k = 1.
    pub points: Vec<f64>,
    /// Cell i = [p_i, p_{i+1}) is mapped increasingly and affinely onto [p_lo, p_hi).
    pub images: Vec<(usize, usize)>,
    pub lambda: f64,
    pub delta: f64,
    coding: Option<Arc<Coding>>,
}

impl ExpandingMap {
    pub fn piecewise_linear(name: &str, points: Vec<f64>, images: Vec<(usize, usize)>) -> Result<Self> {
        let k = points.len().saturating_sub(1);
        if k < 2 || images.len() != k {
            return invalid("a Markov map needs at least two cells and one image per cell");
        }
        if points[0] != 0.0 || points[k] != 1.0 || points.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("partition endpoints must increase from 0 to 1");
        }
        let mut maps = Vec::with_capacity(k);
        let mut domains = Vec::with_capacity(k);
        let mut rows = vec![vec![0u8; k]; k];
        let mut lambda = f64::INFINITY;
        for (i, &(lo, hi)) in images.iter().enumerate() {
            if !(lo < hi && hi <= k) {
                return invalid(format!("image of cell {} must be a non-empty run of cells", i + 1));
            }
            let slope = (points[hi] - points[lo]) / (points[i + 1] - points[i]);
            lambda = lambda.min(slope);
            maps.push(Contraction::affine(1.0 / slope, points[i] - points[lo] / slope));
            domains.push((points[lo], points[hi]));
            for j in lo..hi {
                rows[i][j] = 1;
            }
        }
        if !(lambda > 1.0) {
            return invalid(format!("map is not expanding (min slope {lambda})"));
        }
        let coding = Coding::new(maps, domains, IncidenceMatrix::new(rows)?)?;
        let delta = points.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
        Ok(ExpandingMap {
            name: name.to_string(),
            family: MapFamily::PiecewiseLinear,
            points,
            images,
            lambda,
            delta,
            coding: Some(Arc::new(coding)),
        })
    }

    pub fn doubling() -> Self {
        Self::piecewise_linear("doubling", vec![0.0, 0.5, 1.0], vec![(0, 2), (0, 2)]).expect("valid")
    }

    pub fn ternary() -> Self {
        Self::piecewise_linear("ternary", vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], vec![(0, 3); 3]).expect("valid")
    }

    /// Constant-slope golden-mean map: [0,a) → [0,1), [a,1) → [0,a), a = 1/φ.
    pub fn golden_markov() -> Self {
        let a = (5f64.sqrt() - 1.0) / 2.0;
        Self::piecewise_linear("golden-markov", vec![0.0, a, 1.0], vec![(0, 2), (0, 1)]).expect("valid")
    }

    /// x ↦ {1/x}. Not uniformly expanding (|T'| ≥ 1 only), flagged by `uniformly_expanding`.
    pub fn gauss() -> Self {
        ExpandingMap {
            name: "gauss".into(),
            family: MapFamily::Gauss,
            points: Vec::new(),
            images: Vec::new(),
            lambda: 1.0,
            delta: 1.0,
            coding: None,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "doubling" => Ok(Self::doubling()),
            "ternary" => Ok(Self::ternary()),
            "golden-markov" => Ok(Self::golden_markov()),
            "gauss" => Ok(Self::gauss()),
            other => invalid(format!("unknown expanding map '{other}'")),
        }
    }

    pub fn uniformly_expanding(&self) -> bool {
        self.family == MapFamily::PiecewiseLinear
    }

    pub fn coding(&self) -> Result<&Arc<Coding>> {
        self.coding
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("{} has no finite Markov coding", self.name)))
    }

    fn cell_index(&self, x: f64) -> usize {
        (self.points.partition_point(|&p| p <= x).max(1) - 1).min(self.images.len() - 1)
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self.family {
            MapFamily::Gauss => {
                if x <= 0.0 {
                    0.0
                } else {
                    let y = 1.0 / x;
                    y - y.floor()
                }
            }
            MapFamily::PiecewiseLinear => {
                let i = self.cell_index(x);
                let (lo, hi) = self.images[i];
                let (a, b) = (self.points[i], self.points[i + 1]);
                let slope = (self.points[hi] - self.points[lo]) / (b - a);
                self.points[lo] + slope * (x - a)
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.family {
            MapFamily::Gauss => -1.0 / (x * x),
            MapFamily::PiecewiseLinear => {
                let i = self.cell_index(x);
                let (lo, hi) = self.images[i];
                (self.points[hi] - self.points[lo]) / (self.points[i + 1] - self.points[i])
            }
        }
    }

    /// Base b when the map is x ↦ b x mod 1.
    fn digit_base(&self) -> Option<i64> {
        let d = self.coding.as_ref()?.digits.as_ref()?;
        d.values.iter().enumerate().all(|(i, &v)| v as usize == i).then_some(d.base as i64)
    }

    fn step_point(&self, p: OrbitPoint) -> (OrbitPoint, f64) {
        match p {
            OrbitPoint::Exact(r) => {
                if let Some(b) = self.digit_base() {
                    let y = r * b;
                    return (OrbitPoint::Exact(y - y.floor()), 0.0);
                }
                if self.family == MapFamily::Gauss {
                    if *r.numer() == 0 {
                        return (p, 0.0);
                    }
                    let y = r.recip();
                    return (OrbitPoint::Exact(y - y.floor()), 0.0);
                }
                let x = p.value();
                (OrbitPoint::Float(self.apply(x)), self.derivative(x).abs())
            }
            OrbitPoint::Float(x) => (OrbitPoint::Float(self.apply(x)), self.derivative(x).abs()),
        }
    }

    /// T^n(x). Exact for rational points of x ↦ bx mod 1 and of the Gauss map.
    pub fn iterate(&self, x: OrbitPoint, n: usize) -> Result<Iterate> {
        let v = x.value();
        if !(0.0..1.0).contains(&v) {
            return invalid(format!("orbit start {v} outside [0,1)"));
        }
        let mut p = x;
        let mut drift = match x {
            OrbitPoint::Float(v) => f64::EPSILON * v.abs(),
            OrbitPoint::Exact(_) => 0.0,
        };
        for _ in 0..n {
            let (q, gain) = self.step_point(p);
            if let OrbitPoint::Float(y) = q {
                let base = if matches!(p, OrbitPoint::Exact(_)) { f64::EPSILON * p.value() } else { drift };
                drift = gain * base + f64::EPSILON * y.abs().max(1.0);
            }
            p = q;
        }
        Ok(Iterate { point: p, drift_bound: drift })
    }

    /// The cell of 𝓡^n containing x (right-open convention) and its coding word.
    pub fn cell_of(&self, x: f64, n: usize) -> Result<(Word, (f64, f64))> {
        if !(0.0..1.0).contains(&x) {
            return invalid(format!("point {x} outside [0,1)"));
        }
        match self.family {
            MapFamily::PiecewiseLinear => {
                let coding = self.coding()?;
                let w = coding.locate(x, n).expect("cells tile [0,1)");
                let iv = coding.cylinder_interval(&w);
                Ok((w, iv))
            }
            MapFamily::Gauss => {
                let w = Word::new(cf_digits(x, n)?.into_iter().map(|a| (a - 1) as u32).collect());
                let iv = gauss_word_map(&w).image(0.0, 1.0);
                Ok((w, iv))
            }
        }
    }

    /// T_x^{−n}: the inverse branch of T^n sending T^n x back to x, on B(T^n x, 4δ) ∩ D.
    pub fn inverse_branch(&self, x: f64, n: usize) -> Result<InverseBranchHandle> {
        if n == 0 {
            return invalid("inverse branches need n ≥ 1");
        }
        let (word, _) = self.cell_of(x, n)?;
        let (map, domain) = match self.family {
            MapFamily::PiecewiseLinear => {
                let coding = self.coding()?;
                (coding.word_map(&word), coding.domains[word.last().expect("n ≥ 1") as usize])
            }
            MapFamily::Gauss => (gauss_word_map(&word), (0.0, 1.0)),
        };
        let c = self.iterate(OrbitPoint::Float(x), n)?.point.value();
        let r = 4.0 * self.delta;
        let dom = (domain.0.max(c - r), domain.1.min(c + r));
        Ok(InverseBranchHandle { x, n, contraction: map.lipschitz_on(dom.0, dom.1), word, map, domain: dom })
    }

    /// Max |T^n(T_x^{−n} z) − z| and max Lipschitz ratio over `samples` interior points.
    pub fn verify_inverse_branch(&self, h: &InverseBranchHandle, samples: usize) -> (f64, f64) {
        let (lo, hi) = h.domain;
        let mut err = 0.0f64;
        let mut lip = 0.0f64;
        let mut prev: Option<(f64, f64)> = None;
        for i in 1..=samples {
            let z = lo + (hi - lo) * i as f64 / (samples + 1) as f64;
            let y = h.map.apply(z);
            let back = self.iterate(OrbitPoint::Float(y), h.n).map(|it| it.point.value()).unwrap_or(f64::NAN);
            err = err.max((back - z).abs());
            if let Some((pz, py)) = prev {
                lip = lip.max((y - py).abs() / (z - pz).abs());
            }
            prev = Some((z, y));
        }
        (err, lip)
    }

    /// Distance expansion on random pairs within one partition cell at distance ≤ δ.
    pub fn check_expansion(&self, samples: usize, seeds: SeedStream) -> ExpansionCheck {
        let mut rng = seeds.rng(0);
        let mut min_ratio = f64::INFINITY;
        let mut violations = 0;
        let mut pairs = 0;
        for _ in 0..samples {
            let x: f64 = rng.random::<f64>().max(1e-9);
            let y: f64 = (x + (rng.random::<f64>() - 0.5) * self.delta).clamp(1e-9, 1.0 - 1e-12);
            let same = match self.family {
                MapFamily::PiecewiseLinear => self.cell_index(x) == self.cell_index(y),
                MapFamily::Gauss => (1.0 / x).floor() == (1.0 / y).floor(),
            };
            if !same || x == y {
                continue;
            }
            pairs += 1;
            let ratio = (self.apply(x) - self.apply(y)).abs() / (x - y).abs();
            min_ratio = min_ratio.min(ratio);
            if ratio < self.lambda * (1.0 - 1e-9) {
                violations += 1;
            }
        }
        ExpansionCheck { pairs, violations, min_ratio, exempt: !self.uniformly_expanding() }
    }

    /// Tiling, nesting and diameter of the cells of 𝓡^n.
    pub fn check_partition(&self, n: usize) -> Result<PartitionCheck> {
        let coding = self.coding()?;
        if n == 0 {
            return invalid("partition depth must be ≥ 1");
        }
        let words = coding.matrix.enumerate(n, ENUMERATION_BUDGET)?;
        let mut cells: Vec<(f64, f64, Word)> = words
            .into_iter()
            .map(|w| {
                let (a, b) = coding.cylinder_interval(&w);
                (a, b, w)
            })
            .collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut tiles =
            cells.first().is_some_and(|c| c.0.abs() <= 1e-15) && cells.last().is_some_and(|c| (c.1 - 1.0).abs() <= 1e-15);
        for pair in cells.windows(2) {
            tiles &= (pair[0].1 - pair[1].0).abs() <= 1e-15;
        }
        let nested = cells.iter().all(|(a, b, w)| {
            let (pa, pb) = coding.cylinder_interval(&w.prefix(n - 1));
            pa <= *a + 1e-15 && *b <= pb + 1e-15
        });
        let max_diam = cells.iter().map(|c| c.1 - c.0).fold(0.0f64, f64::max);
        let bound = self.delta * self.lambda.powi(-(n as i32 - 1));
        Ok(PartitionCheck { depth: n, cells: cells.len(), tiles, nested, max_diam, bound })
    }

    pub fn markov_cover<M: CylinderMeasure + ?Sized>(&self, measure: &M, y: f64, r: f64) -> Result<MarkovCover> {
        self.coding()?.markov_cover(measure, y, r)
    }

    pub fn good_radius_density<M: CylinderMeasure + ?Sized>(
        &self,
        measure: &M,
        y: f64,
        r_min: f64,
        r_max: f64,
        grid_size: usize,
    ) -> Result<GoodRadiusProbe> {
        self.coding()?.good_radius_density(measure, y, r_min, r_max, grid_size)
    }

    /// Orbit dump with columns n, x_n.
    pub fn orbit_csv(&self, x: OrbitPoint, n: usize) -> Result<String> {
        let mut out = String::from("n,x_n\n");
        let mut p = x;
        for k in 0..=n {
            out.push_str(&format!("{k},{}\n", p.value()));
            p = self.step_point(p).0;
        }
        if !(0.0..1.0).contains(&x.value()) {
            return invalid("orbit start outside [0,1)");
        }
        Ok(out)
    }
}

/// Continued-fraction digits a_1..a_n of x ∈ (0,1).
pub fn cf_digits(x: f64, n: usize) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(n);
    let mut v = x;
    for _ in 0..n {
        if v <= 0.0 {
            return invalid(format!("continued fraction of {x} terminates before {n} digits"));
        }
        let y = 1.0 / v;
        let a = y.floor();
        out.push(a as u64);
        v = y - a;
    }
    Ok(out)
}

/// Gauss measure density 1/((1+x) ln 2).
pub fn gauss_density(x: f64) -> f64 {
    1.0 / ((1.0 + x) * std::f64::consts::LN_2)
}

/// Gauss measure of [0, x]: log₂(1 + x).
pub fn gauss_cdf(x: f64) -> f64 {
    (1.0 + x).log2()
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseBranchHandle {
    pub x: f64,
    pub n: usize,
    pub word: Word,
    pub map: Contraction,
    pub domain: (f64, f64),
    pub contraction: f64,
}

impl InverseBranchHandle {
    pub fn apply(&self, z: f64) -> Result<f64> {
        if !(self.domain.0 <= z && z <= self.domain.1) {
            return invalid(format!("{z} outside the branch domain"));
        }
        Ok(self.map.apply(z))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionCheck {
    pub pairs: usize,
    pub violations: usize,
    pub min_ratio: f64,
    /// Set for maps without a uniform expansion constant (Gauss).
    pub exempt: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionCheck {
    pub depth: usize,
    pub cells: usize,
    pub tiles: bool,
    pub nested: bool,
    pub max_diam: f64,
    /// δλ^{−(n−1)}
    pub bound: f64,
}

/// Orbit of an explicit point, iterated with `iterate`'s arithmetic.
pub struct PointOrbit {
    map: Arc<ExpandingMap>,
    point: OrbitPoint,
    time: u64,
}

impl PointOrbit {
    pub fn new(map: Arc<ExpandingMap>, point: OrbitPoint) -> Result<Self> {
        if !(0.0..1.0).contains(&point.value()) {
            return invalid("orbit start outside [0,1)");
        }
        Ok(PointOrbit { map, point, time: 0 })
    }

    pub fn point(&self) -> OrbitPoint {
        self.point
    }
}

impl Orbit for PointOrbit {
    fn time(&self) -> u64 {
        self.time
    }

    fn step(&mut self) {
        self.point = self.map.step_point(self.point).0;
        self.time += 1;
    }

    fn distance(&mut self, target: &Target) -> f64 {
        match *target {
            Target::Point { y, circle } => interval_distance(self.point.value(), y, circle),
            Target::Sequence { .. } => f64::NAN,
        }
    }

    fn in_set(&mut self, set: &BaseSet) -> bool {
        let x = self.point.value();
        match set {
            BaseSet::Intervals(iv) => iv.iter().any(|&(lo, hi)| lo <= x && x < hi),
            BaseSet::Cylinders(ws) => ws.iter().any(|w| {
                self.map.cell_of(x, w.len()).map(|(c, _)| c == *w).unwrap_or(false)
            }),
        }
    }

    fn position(&mut self) -> Option<f64> {
        Some(self.point.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::{GibbsState, Potential};

    #[test]
    fn iterate_examples() {
        let t = ExpandingMap::doubling();
        let it = t.iterate(OrbitPoint::rational(1, 5), 4).unwrap();
        assert_eq!(it.point, OrbitPoint::rational(1, 5));
        assert_eq!(it.drift_bound, 0.0);
        assert_eq!(t.iterate(OrbitPoint::rational(0, 1), 17).unwrap().point, OrbitPoint::rational(0, 1));
        let g = ExpandingMap::gauss();
        let x = 2f64.sqrt() - 1.0;
        let it = g.iterate(OrbitPoint::Float(x), 3).unwrap();
        assert!((it.point.value() - x).abs() <= it.drift_bound);
        assert!(it.drift_bound < 1e-12);
        assert_eq!(g.iterate(OrbitPoint::rational(3, 7), 1).unwrap().point, OrbitPoint::rational(1, 3));
    }

    #[test]
    fn cell_examples() {
        let t = ExpandingMap::doubling();
        let (w, iv) = t.cell_of(1.0 / 3.0, 2).unwrap();
        assert_eq!(w, Word::new(vec![0, 1]));
        assert_eq!(iv, (0.25, 0.5));
        let (w, iv) = t.cell_of(0.0, 5).unwrap();
        assert_eq!(w, Word::new(vec![0; 5]));
        assert_eq!(iv, (0.0, 1.0 / 32.0));
        let (w, iv) = ExpandingMap::ternary().cell_of(0.5, 1).unwrap();
        assert_eq!(w, Word::new(vec![1]));
        assert!((iv.0 - 1.0 / 3.0).abs() < 1e-16 && (iv.1 - 2.0 / 3.0).abs() < 1e-16);
        let (w, _) = ExpandingMap::gauss().cell_of(2f64.sqrt() - 1.0, 4).unwrap();
        assert_eq!(w, Word::new(vec![1; 4]));
    }

    #[test]
    fn partitions_refine() {
        for m in [ExpandingMap::doubling(), ExpandingMap::ternary(), ExpandingMap::golden_markov()] {
            for n in 1..8 {
                let c = m.check_partition(n).unwrap();
                assert!(c.tiles && c.nested, "{} depth {n}", m.name);
                assert!(c.max_diam <= c.bound * (1.0 + 1e-12), "{} depth {n}", m.name);
            }
        }
    }

    #[test]
    fn expansion_and_branches() {
        let m = ExpandingMap::golden_markov();
        let e = m.check_expansion(2000, SeedStream::new(1, "exp"));
        assert_eq!(e.violations, 0);
        assert!(e.pairs > 100 && !e.exempt);
        assert!(ExpandingMap::gauss().check_expansion(10, SeedStream::new(1, "e")).exempt);
        let t = ExpandingMap::doubling();
        let h = t.inverse_branch(0.3, 6).unwrap();
        assert!(h.contraction <= 2f64.powi(-6) * (1.0 + 1e-12));
        let (err, lip) = t.verify_inverse_branch(&h, 50);
        assert!(err < 1e-12 && lip <= 2f64.powi(-6) * (1.0 + 1e-9));
        assert!((h.apply(t.iterate(OrbitPoint::Float(0.3), 6).unwrap().point.value()).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn golden_map_measure_is_parry() {
        let m = ExpandingMap::golden_markov();
        let g = GibbsState::new(&Potential::zero(2), &IncidenceMatrix::golden_mean()).unwrap();
        let c = m.coding().unwrap();
        // The pushed Parry measure gives the first cell its symbolic mass.
        let a = (5f64.sqrt() - 1.0) / 2.0;
        assert!((c.cdf(&g, a) - g.cylinder_measure(&Word::new(vec![0]))).abs() < 1e-12);
    }

    #[test]
    fn orbit_dump() {
        let csv = ExpandingMap::doubling().orbit_csv(OrbitPoint::rational(1, 5), 2).unwrap();
        assert_eq!(csv, "n,x_n\n0,0.2\n1,0.4\n2,0.8\n");
    }
}
