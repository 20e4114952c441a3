//! Interval geometry of symbolic codes.
//!
//! A [`Coding`] is a family of one-dimensional contractions φ_e with domains D_e and an
//! incidence matrix; the cylinder of ω is I_ω = φ_{ω_1}∘…∘φ_{ω_n}(D_{ω_n}). Inverse branches
//! of an expanding Markov map and the maps of a GDMS are both codings.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::maps::Contraction;
use crate::symbolic::{IncidenceMatrix, Symbol, Word};
use crate::thermo::{ConformalGibbs, GibbsState};

/// Cylinder masses of a measure on codes.
pub trait CylinderMeasure: Send + Sync {
    fn mass(&self, word: &Word) -> f64;

    /// μ([ωe]) given μ([ω]); overridden where a Markov step is cheaper.
    fn extend(&self, word: &Word, _mass: f64, e: Symbol) -> f64 {
        self.mass(&word.extended(e))
    }

    /// μ([lo, x)) directly, when the measure has a tabulated distribution function.
    fn point_cdf(&self, _x: f64) -> Option<f64> {
        None
    }
}

impl CylinderMeasure for GibbsState {
    fn mass(&self, word: &Word) -> f64 {
        self.cylinder_measure(word)
    }

    fn extend(&self, word: &Word, mass: f64, e: Symbol) -> f64 {
        if word.is_empty() {
            return self.cylinder_measure(&Word::new(vec![e]));
        }
        if !self.matrix.allows(word.last().expect("non-empty"), e) {
            return 0.0;
        }
        self.chain.extend_mass(word, mass, e)
    }
}

impl CylinderMeasure for ConformalGibbs {
    fn mass(&self, word: &Word) -> f64 {
        self.cylinder_mass(word).unwrap_or(0.0)
    }

    fn point_cdf(&self, x: f64) -> Option<f64> {
        self.cdf(x).ok()
    }
}

impl<T: CylinderMeasure + ?Sized> CylinderMeasure for Arc<T> {
    fn mass(&self, word: &Word) -> f64 {
        (**self).mass(word)
    }

    fn extend(&self, word: &Word, mass: f64, e: Symbol) -> f64 {
        (**self).extend(word, mass, e)
    }

    fn point_cdf(&self, x: f64) -> Option<f64> {
        (**self).point_cdf(x)
    }
}

/// φ_e(x) = (x + c_e)/b on [0,1]: codes are base-b digit expansions with digit values c_e.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitStructure {
    pub base: u32,
    pub values: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct Coding {
    pub maps: Vec<Contraction>,
    pub domains: Vec<(f64, f64)>,
    pub matrix: IncidenceMatrix,
    pub hull: (f64, f64),
    /// Uniform contraction s: Lip φ_ω ≤ K s^{|ω|} with K = `prefactor`.
    pub contraction: f64,
    /// 1 when every φ_e is a contraction; Lip φ_e / s otherwise.
    pub prefactor: f64,
    /// δ = largest first-level cylinder diameter.
    pub mesh: f64,
    pub digits: Option<DigitStructure>,
}

/// Smallest radius whose squared value is still resolved in double precision.
pub const MIN_RESOLVABLE_RADIUS: f64 = 1.2e-7;
const MAX_DESCENT: usize = 2000;

impl Coding {
    pub fn new(maps: Vec<Contraction>, domains: Vec<(f64, f64)>, matrix: IncidenceMatrix) -> Result<Self> {
        let n = maps.len();
        if n == 0 || domains.len() != n || matrix.size() != n {
            return invalid("coding needs one domain and one matrix row per map");
        }
        for (e, (phi, &(lo, hi))) in maps.iter().zip(&domains).enumerate() {
            if !(lo < hi) {
                return invalid(format!("domain of map {} is empty", e + 1));
            }
            if let Contraction::Mobius { c, d, .. } = *phi {
                let (p, q) = (c * lo + d, c * hi + d);
                if p == 0.0 || q == 0.0 || (p < 0.0) != (q < 0.0) {
                    return Err(Error::Unsupported(format!("map {} has a pole on its domain", e + 1)));
                }
            }
        }
        let hull_lo = domains.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
        let hull_hi = domains.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
        let lips: Vec<f64> =
            maps.iter().zip(&domains).map(|(phi, &(lo, hi))| phi.lipschitz_on(lo, hi)).collect();
        let s1 = lips.iter().copied().fold(0.0f64, f64::max);
        let (contraction, prefactor) = if s1 < 1.0 {
            (s1, 1.0)
        } else {
            // Neutral branches (e.g. 1/(1+x) at 0): contraction of two-step compositions.
            let mut s2 = 0.0f64;
            for (a, &la) in lips.iter().enumerate() {
                if la < 1.0 {
                    s2 = s2.max(la * s1);
                    continue;
                }
                for b in matrix.successors(a as Symbol) {
                    let (lo, hi) = domains[b as usize];
                    s2 = s2.max(maps[a].compose(&maps[b as usize]).lipschitz_on(lo, hi));
                }
            }
            if !(s2 < 1.0) {
                return invalid(format!("maps are not eventually contracting (max Lip = {s1}, two-step {s2})"));
            }
            (s2.sqrt(), s1 / s2.sqrt())
        };
        let mesh = maps
            .iter()
            .zip(&domains)
            .map(|(phi, &(lo, hi))| {
                let (a, b) = phi.image(lo, hi);
                b - a
            })
            .fold(0.0f64, f64::max);
        let digits = detect_digits(&maps, &domains);
        Ok(Coding { maps, domains, matrix, hull: (hull_lo, hull_hi), contraction, prefactor, mesh, digits })
    }

    pub fn size(&self) -> usize {
        self.maps.len()
    }

    pub fn word_map(&self, word: &Word) -> Contraction {
        word.symbols()
            .iter()
            .fold(Contraction::affine(1.0, 0.0), |acc, &s| acc.compose(&self.maps[s as usize]))
    }

    pub fn cylinder_interval(&self, word: &Word) -> (f64, f64) {
        match word.last() {
            None => self.hull,
            Some(last) => {
                let (lo, hi) = self.domains[last as usize];
                self.word_map(word).image(lo, hi)
            }
        }
    }

    /// Admissible one-symbol extensions of `word`, sorted by position, with their intervals.
    pub fn children(&self, word: &Word) -> Vec<(Symbol, (f64, f64))> {
        let map = self.word_map(word);
        let mut out: Vec<(Symbol, (f64, f64))> = (0..self.size() as Symbol)
            .filter(|&e| word.last().is_none_or(|l| self.matrix.allows(l, e)))
            .map(|e| {
                let (lo, hi) = self.domains[e as usize];
                let child = map.compose(&self.maps[e as usize]);
                (e, child.image(lo, hi))
            })
            .collect();
        out.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0));
        out
    }

    /// Midpoint of the cylinder interval and the error radius s^n·diam(hull).
    pub fn project(&self, word: &Word) -> Result<(f64, f64)> {
        self.matrix.check_admissible(word)?;
        let (lo, hi) = self.cylinder_interval(word);
        let radius = self.prefactor * self.contraction.powi(word.len() as i32) * (self.hull.1 - self.hull.0);
        Ok((0.5 * (lo + hi), radius.max(0.5 * (hi - lo))))
    }

    /// Point coded by prefix·period^∞ (fixed point of the period map, then the prefix map).
    pub fn project_periodic(&self, prefix: &Word, period: &Word) -> Result<f64> {
        if period.is_empty() {
            return invalid("period must be non-empty");
        }
        let cycle = period.concat(&period.prefix(1));
        self.matrix.check_admissible(&cycle)?;
        self.matrix.check_admissible(&prefix.concat(period))?;
        let (lo, hi) = self.domains[period.last().expect("non-empty") as usize];
        let fixed = self.word_map(period).fixed_point(lo, hi);
        Ok(self.word_map(prefix).apply(fixed))
    }

    /// The code of length `depth` of the cell containing x (cells right-open), if x lies in one.
    pub fn locate(&self, x: f64, depth: usize) -> Option<Word> {
        let mut word = Word::empty();
        for _ in 0..depth {
            let kids = self.children(&word);
            let last = kids.len() - 1;
            let pick = kids
                .iter()
                .enumerate()
                .find(|(i, (_, (lo, hi)))| *lo <= x && (x < *hi || (*i == last && x <= *hi)))
                .map(|(_, (e, _))| *e)?;
            word.push(pick);
        }
        Some(word)
    }

    /// μ of the part of the hull strictly left of x.
    pub fn cdf<M: CylinderMeasure + ?Sized>(&self, measure: &M, x: f64) -> f64 {
        if x <= self.hull.0 {
            return 0.0;
        }
        if x >= self.hull.1 {
            return 1.0;
        }
        if let Some(c) = measure.point_cdf(x) {
            return c;
        }
        let mut word = Word::empty();
        let mut mass = 1.0;
        let mut acc = 0.0;
        for _ in 0..MAX_DESCENT {
            let mut next = None;
            for (e, (lo, hi)) in self.children(&word) {
                let m = measure.extend(&word, mass, e);
                if hi <= x {
                    acc += m;
                } else if lo < x {
                    next = Some((e, m));
                    break;
                } else {
                    break;
                }
            }
            match next {
                Some((e, m)) => {
                    if m <= 1e-18 {
                        // Remaining mass below resolution: split it linearly.
                        let (lo, hi) = self.cylinder_interval(&word.extended(e));
                        if hi > lo {
                            acc += m * ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
                        }
                        break;
                    }
                    word.push(e);
                    mass = m;
                }
                None => break,
            }
        }
        acc.clamp(0.0, 1.0)
    }

    /// μ of the open interval (a, b) for atomless measures.
    pub fn interval_measure<M: CylinderMeasure + ?Sized>(&self, measure: &M, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.cdf(measure, b) - self.cdf(measure, a)).max(0.0)
    }

    pub fn ball_measure<M: CylinderMeasure + ?Sized>(&self, measure: &M, y: f64, r: f64) -> f64 {
        self.interval_measure(measure, y - r, y + r)
    }

    /// Bound on the diameter of cylinders of length n ≥ 1.
    pub fn diameter_bound(&self, n: usize) -> f64 {
        if self.prefactor == 1.0 {
            self.mesh * self.contraction.powi(n as i32 - 1)
        } else {
            self.prefactor * (self.hull.1 - self.hull.0) * self.contraction.powi(n as i32)
        }
    }

    /// Least n with δ s^{n−1} ≤ r².
    pub fn cover_depth(&self, r: f64) -> usize {
        let target = r * r;
        let mut n = 1usize;
        while self.diameter_bound(n) > target {
            n += 1;
        }
        n
    }

    fn boundary_word(&self, depth: usize, left: bool, cut: f64) -> Option<(Word, usize)> {
        // Leftmost cell with hi > cut (left side), or rightmost cell with lo < cut (right side).
        // Also counts the trailing run of extreme children, which fixes the order of the union.
        let mut word = Word::empty();
        let mut run = 0usize;
        for _ in 0..depth {
            let kids = self.children(&word);
            let choice = if left {
                kids.iter().position(|(_, (_, hi))| *hi > cut)
            } else {
                kids.iter().rposition(|(_, (lo, _))| *lo < cut)
            }?;
            let extreme = if left { choice == 0 } else { choice == kids.len() - 1 };
            run = if extreme { run + 1 } else { 0 };
            word.push(kids[choice].0);
        }
        Some((word, run))
    }

    pub fn markov_cover<M: CylinderMeasure + ?Sized>(&self, measure: &M, y: f64, r: f64) -> Result<MarkovCover> {
        if !(r > 0.0 && r < 1.0) {
            return invalid(format!("cover radius must lie in (0,1), got {r}"));
        }
        if r < MIN_RESOLVABLE_RADIUS {
            return Err(Error::Unresolvable { r, min: MIN_RESOLVABLE_RADIUS });
        }
        let n = self.cover_depth(r);
        let (lw, lrun) = self
            .boundary_word(n, true, y - r)
            .ok_or_else(|| Error::Degenerate(format!("ball around {y} misses every cell")))?;
        let (rw, rrun) = self
            .boundary_word(n, false, y + r)
            .ok_or_else(|| Error::Degenerate(format!("ball around {y} misses every cell")))?;
        let left = self.cylinder_interval(&lw).0;
        let right = self.cylinder_interval(&rw).1;
        if right <= left {
            return Err(Error::Degenerate(format!("ball around {y} lies in a gap of the limit set")));
        }
        let order = (n - lrun).max(n - rrun).max(1);
        let mu_cover = self.interval_measure(measure, left, right);
        let mu_ball = self.ball_measure(measure, y, r);
        let (hl, hh) = self.hull;
        let ball_inside = (left <= y - r || left <= hl) && (right >= y + r || right >= hh);
        let cover_inside = left > y - r - r * r && right <= y + r + r * r;
        Ok(MarkovCover {
            y,
            r,
            depth: n,
            left,
            right,
            left_word: lw,
            right_word: rw,
            order,
            mu_cover,
            mu_ball,
            ratio: if mu_ball > 0.0 { mu_cover / mu_ball } else { f64::INFINITY },
            ball_inside,
            cover_inside,
        })
    }

    pub fn good_radius_density<M: CylinderMeasure + ?Sized>(
        &self,
        measure: &M,
        y: f64,
        r_min: f64,
        r_max: f64,
        grid_size: usize,
    ) -> Result<GoodRadiusProbe> {
        if grid_size < 100 {
            return invalid("good-radius grid needs at least 100 radii");
        }
        if !(r_min > 0.0 && r_min < r_max) {
            return invalid("need 0 < r_min < r_max");
        }
        let radii = crate::stats::log_grid(r_min, r_max, grid_size);
        let mut ratios = Vec::with_capacity(grid_size);
        let mut flags = Vec::with_capacity(grid_size);
        for &r in &radii {
            let small = self.ball_measure(measure, y, r);
            let big = self.ball_measure(measure, y, r + r * r);
            let ratio = if small > 0.0 { big / small } else { f64::INFINITY };
            ratios.push(ratio);
            flags.push(ratio <= 2.0);
        }
        let mut decades = Vec::new();
        let lo_dec = r_min.log10().floor() as i32;
        let hi_dec = r_max.log10().ceil() as i32;
        for d in lo_dec..hi_dec {
            let (a, b) = (10f64.powi(d), 10f64.powi(d + 1));
            let idx: Vec<usize> = (0..grid_size).filter(|&i| radii[i] >= a && radii[i] < b).collect();
            if !idx.is_empty() {
                let good = idx.iter().filter(|&&i| flags[i]).count();
                decades.push((d, good as f64 / idx.len() as f64));
            }
        }
        let density = flags.iter().filter(|&&f| f).count() as f64 / grid_size as f64;
        Ok(GoodRadiusProbe { y, radii, ratios, flags, density, per_decade: decades })
    }
}

fn detect_digits(maps: &[Contraction], domains: &[(f64, f64)]) -> Option<DigitStructure> {
    let mut base = None;
    let mut values = Vec::with_capacity(maps.len());
    for (phi, &d) in maps.iter().zip(domains) {
        if d != (0.0, 1.0) {
            return None;
        }
        let Contraction::Affine { scale, shift } = *phi else { return None };
        let b = (1.0 / scale).round();
        if !(b >= 2.0) || (1.0 / scale - b).abs() > 1e-12 || b > 1024.0 {
            return None;
        }
        if *base.get_or_insert(b as u32) != b as u32 {
            return None;
        }
        let c = (shift * b).round();
        if (shift * b - c).abs() > 1e-9 || c < 0.0 || c >= b {
            return None;
        }
        values.push(c as u32);
    }
    Some(DigitStructure { base: base?, values })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovCover {
    pub y: f64,
    pub r: f64,
    /// n(r): least n with δ s^{n−1} ≤ r².
    pub depth: usize,
    pub left: f64,
    pub right: f64,
    pub left_word: Word,
    pub right_word: Word,
    /// ord(R_r): least m such that R_r is a union of cells of order m.
    pub order: usize,
    pub mu_cover: f64,
    pub mu_ball: f64,
    pub ratio: f64,
    /// B(y, r) ⊂ R_r
    pub ball_inside: bool,
    /// R_r ⊂ B(y, r + r²)
    pub cover_inside: bool,
}

impl MarkovCover {
    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x < self.right
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoodRadiusProbe {
    pub y: f64,
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    pub flags: Vec<bool>,
    pub density: f64,
    /// (decade exponent d, fraction flagged among radii in [10^d, 10^{d+1})).
    pub per_decade: Vec<(i32, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::Potential;

    fn dyadic() -> Coding {
        Coding::new(
            vec![Contraction::affine(0.5, 0.0), Contraction::affine(0.5, 0.5)],
            vec![(0.0, 1.0); 2],
            IncidenceMatrix::full(2),
        )
        .unwrap()
    }

    fn lebesgue() -> GibbsState {
        GibbsState::new(&Potential::zero(2), &IncidenceMatrix::full(2)).unwrap()
    }

    #[test]
    fn dyadic_cells_and_cdf() {
        let c = dyadic();
        assert_eq!(c.digits, Some(DigitStructure { base: 2, values: vec![0, 1] }));
        assert_eq!(c.cylinder_interval(&Word::parse("1,2").unwrap()), (0.25, 0.5));
        assert_eq!(c.locate(1.0 / 3.0, 2), Some(Word::parse("1,2").unwrap()));
        let m = lebesgue();
        for &x in &[0.0, 0.1, 0.3333, 0.5, 0.77, 1.0] {
            assert!((c.cdf(&m, x) - x).abs() < 1e-15);
        }
        assert!((c.ball_measure(&m, 0.0, 0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cover_example_half() {
        let c = dyadic();
        let m = lebesgue();
        let r = 1.0 / 16.0;
        let cov = c.markov_cover(&m, 0.5, r).unwrap();
        // δ = 1/2, s = 1/2: 2^{-n} ≤ 2^{-8} at n = 8.
        assert_eq!(cov.depth, 8);
        assert_eq!((cov.left, cov.right), (0.4375, 0.5625));
        assert!(cov.ball_inside && cov.cover_inside);
        assert!(cov.order <= cov.depth);
        assert_eq!(cov.order, 4);
        assert!((cov.mu_cover - 0.125).abs() < 1e-15);
    }

    #[test]
    fn cover_order_boundary_cases() {
        let c = dyadic();
        let m = lebesgue();
        let cov = c.markov_cover(&m, 0.0, 0.25).unwrap();
        assert_eq!(cov.left, 0.0);
        assert_eq!(cov.right, 0.25);
        assert_eq!(cov.order, 2);
        assert!(c.markov_cover(&m, 0.3, 1e-9).is_err());
    }

    #[test]
    fn cantor_periodic_and_ball() {
        let c = Coding::new(
            vec![Contraction::affine(1.0 / 3.0, 0.0), Contraction::affine(1.0 / 3.0, 2.0 / 3.0)],
            vec![(0.0, 1.0); 2],
            IncidenceMatrix::full(2),
        )
        .unwrap();
        assert_eq!(c.digits, Some(DigitStructure { base: 3, values: vec![0, 2] }));
        let p = c.project_periodic(&Word::empty(), &Word::parse("2,1").unwrap()).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
        let m = lebesgue();
        for k in 1..10 {
            let mu = c.ball_measure(&m, 0.0, 3f64.powi(-k));
            assert!((mu - 0.5f64.powi(k)).abs() < 1e-15, "k = {k}: {mu}");
        }
        assert_eq!(c.locate(0.5, 1), None);
    }

    #[test]
    fn good_radius_lebesgue() {
        let c = dyadic();
        let g = c.good_radius_density(&lebesgue(), 0.3, 1e-5, 1e-1, 120).unwrap();
        assert_eq!(g.density, 1.0);
        assert!(g.per_decade.iter().all(|d| d.1 == 1.0));
        assert!(c.good_radius_density(&lebesgue(), 0.3, 1e-5, 1e-1, 50).is_err());
    }
}
