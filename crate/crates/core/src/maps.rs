//! One-dimensional contractions: affine maps and Möbius maps.

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Contraction {
    /// x ↦ scale·x + shift
    Affine { scale: f64, shift: f64 },
    /// x ↦ (a x + b) / (c x + d)
    Mobius { a: f64, b: f64, c: f64, d: f64 },
}

impl Contraction {
    pub fn affine(scale: f64, shift: f64) -> Self {
        Contraction::Affine { scale, shift }
    }

    /// x ↦ 1/(n + x)
    pub fn continued_fraction(n: u64) -> Self {
        Contraction::Mobius { a: 0.0, b: 1.0, c: 1.0, d: n as f64 }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Contraction::Affine { scale, shift } => scale * x + shift,
            Contraction::Mobius { a, b, c, d } => (a * x + b) / (c * x + d),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Contraction::Affine { scale, .. } => scale,
            Contraction::Mobius { a, b, c, d } => {
                let den = c * x + d;
                (a * d - b * c) / (den * den)
            }
        }
    }

    fn matrix(&self) -> [f64; 4] {
        match *self {
            Contraction::Affine { scale, shift } => [scale, shift, 0.0, 1.0],
            Contraction::Mobius { a, b, c, d } => [a, b, c, d],
        }
    }

    /// self ∘ inner
    pub fn compose(&self, inner: &Contraction) -> Contraction {
        match (*self, *inner) {
            (Contraction::Affine { scale: s1, shift: t1 }, Contraction::Affine { scale: s2, shift: t2 }) => {
                Contraction::Affine { scale: s1 * s2, shift: s1 * t2 + t1 }
            }
            _ => {
                let [a1, b1, c1, d1] = self.matrix();
                let [a2, b2, c2, d2] = inner.matrix();
                let m = [a1 * a2 + b1 * c2, a1 * b2 + b1 * d2, c1 * a2 + d1 * c2, c1 * b2 + d1 * d2];
                let norm = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                let k = if norm > 0.0 { 1.0 / norm } else { 1.0 };
                Contraction::Mobius { a: m[0] * k, b: m[1] * k, c: m[2] * k, d: m[3] * k }
            }
        }
    }

    /// Image of [lo, hi] as an ordered interval (maps are monotone on pole-free intervals).
    pub fn image(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (u, v) = (self.apply(lo), self.apply(hi));
        if u <= v {
            (u, v)
        } else {
            (v, u)
        }
    }

    pub fn is_increasing(&self) -> bool {
        match *self {
            Contraction::Affine { scale, .. } => scale > 0.0,
            Contraction::Mobius { a, b, c, d } => a * d - b * c > 0.0,
        }
    }

    /// Lipschitz constant on [lo, hi]. |φ'| is monotone for Möbius maps off the pole.
    pub fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            Contraction::Affine { scale, .. } => scale.abs(),
            Contraction::Mobius { .. } => self.derivative(lo).abs().max(self.derivative(hi).abs()),
        }
    }

    /// Fixed point in [lo, hi] (closed form for affine maps, iteration otherwise).
    pub fn fixed_point(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            Contraction::Affine { scale, shift } => shift / (1.0 - scale),
            Contraction::Mobius { .. } => {
                let mut x = 0.5 * (lo + hi);
                for _ in 0..10_000 {
                    let nx = self.apply(x);
                    if (nx - x).abs() <= 1e-16 {
                        return nx;
                    }
                    x = nx;
                }
                x
            }
        }
    }
}
