//! Thermodynamic formalism on subshifts of finite type.

pub mod conformal;
pub mod eigen;
pub mod gibbs;
pub mod potential;
pub mod pressure;

pub use conformal::{ConformalGibbs, ConformalOperator};
pub use gibbs::{BlockChain, ChainRule, GibbsAudit, GibbsState, MixingFit, MixingProbe};
pub use potential::{HolderData, LocalPotential, Potential, Summability};
pub use pressure::{pressure, PressureEstimate, PressureMethod};

use crate::error::{Error, Result};
use crate::symbolic::{IncidenceMatrix, Word};

/// Bounds on S_n f over [ω] from per-shift cylinder bounds.
pub fn birkhoff_sum_bounds(f: &Potential, omega: &Word, a: &IncidenceMatrix) -> Result<(f64, f64)> {
    if omega.is_empty() {
        return Err(Error::Invalid("Birkhoff sums need |ω| ≥ 1".into()));
    }
    a.check_admissible(omega)?;
    let mut lo = 0.0;
    let mut hi = 0.0;
    for j in 0..omega.len() {
        let (l, h) = f.cylinder_bounds(&omega.suffix_from(j), a)?;
        lo += l;
        hi += h;
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn birkhoff_examples() {
        let full = IncidenceMatrix::full(2);
        let w = Word::parse("1,2").unwrap();
        assert_eq!(birkhoff_sum_bounds(&Potential::zero(2), &w, &full).unwrap(), (0.0, 0.0));
        let b = Potential::bernoulli(&[0.3, 0.7]).unwrap();
        let (lo, hi) = birkhoff_sum_bounds(&b, &w, &full).unwrap();
        assert!((lo - 0.21f64.ln()).abs() < 1e-15 && (hi - 0.21f64.ln()).abs() < 1e-15);
        let ind = Potential::first_symbol(&[1.0, 0.0]).unwrap();
        assert_eq!(birkhoff_sum_bounds(&ind, &Word::parse("1,1,2").unwrap(), &full).unwrap(), (2.0, 2.0));
        let g = IncidenceMatrix::golden_mean();
        assert!(birkhoff_sum_bounds(&Potential::zero(2), &Word::parse("2,2").unwrap(), &g).is_err());
    }

    #[test]
    fn spread_bounded_by_variation() {
        let f = Potential::gauss_t(1.0).unwrap();
        let a = IncidenceMatrix::truncated_full(4);
        let hd = f.holder_data(&a).unwrap();
        let w = Word::parse("1,3,2,4").unwrap();
        let (lo, hi) = birkhoff_sum_bounds(&f, &w, &a).unwrap();
        let n = w.len();
        let bound: f64 = (0..n).map(|j| hd.variation * (-hd.alpha * (n - j - 1) as f64).exp()).sum();
        assert!(hi - lo <= bound);
    }
}
