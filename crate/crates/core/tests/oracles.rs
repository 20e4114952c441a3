use std::sync::Arc;

use hitstat::expanding::{ExpandingMap, OrbitPoint, PointOrbit};
use hitstat::hitting::{cylinder_radii, divergence_scan, entry_table, rate_estimates, record_sequence, waiting_tail};
use hitstat::induction::{kac_check, return_time_spectrum, InducedSystem};
use hitstat::seeds::SeedStream;
use hitstat::symbolic::{IncidenceMatrix, Word};
use hitstat::system::{BaseSet, MeasuredSystem};
use hitstat::thermo::{GibbsState, Potential};

fn gibbs(p: &[f64]) -> Arc<GibbsState> {
    Arc::new(GibbsState::new(&Potential::bernoulli(p).unwrap(), &IncidenceMatrix::full(p.len())).unwrap())
}

fn doubling() -> MeasuredSystem {
    let map = ExpandingMap::doubling();
    MeasuredSystem::interval("doubling", gibbs(&[0.5, 0.5]), map.coding().unwrap().clone()).unwrap()
}

fn rates_for(sys: &MeasuredSystem, radii: &[f64], seed: u64) -> f64 {
    let seeds = SeedStream::new(seed, "rates");
    let y = sys.target(&sys.sample_path(seeds.child("y"), 0));
    let rec = record_sequence(sys.orbit(sys.sample_source(seeds.child("x"), 0)).as_mut(), &y, 1_000_000).unwrap();
    let est = rate_estimates(&entry_table(&rec, sys, &y, radii).unwrap()).unwrap();
    assert!(est.hitting_lower <= est.hitting_upper && est.dim_lower <= est.dim_upper);
    est.dim_fit
}

#[test]
fn pointwise_dimension_slopes() {
    let shift = MeasuredSystem::shift("full-shift2", gibbs(&[0.5, 0.5]), 1.0).unwrap();
    let d = rates_for(&shift, &cylinder_radii(1.0, 30), 1);
    assert!((d / 2f64.ln() - 1.0).abs() < 0.10, "shift dimension {d}");
    let dyadic: Vec<f64> = (1..30).map(|j| 0.5f64.powi(j)).collect();
    let d = rates_for(&doubling(), &dyadic, 2);
    assert!((d - 1.0).abs() < 0.05, "doubling dimension {d}");
    let skew = MeasuredSystem::shift("bernoulli", gibbs(&[0.3, 0.7]), 1.0).unwrap();
    let h = -(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
    let d = rates_for(&skew, &cylinder_radii(1.0, 30), 3);
    assert!((d / h - 1.0).abs() < 0.10, "skew dimension {d} vs {h}");
}

#[test]
fn kac_on_golden_mean_parry_measure() {
    let g = Arc::new(GibbsState::new(&Potential::zero(2), &IncidenceMatrix::golden_mean()).unwrap());
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mu0 = phi * phi / (1.0 + phi * phi);
    assert!((g.cylinder_measure(&Word::new(vec![0])) - mu0).abs() < 1e-12);
    let sys = MeasuredSystem::shift("golden-mean", g, 1.0).unwrap();
    let ind = InducedSystem::new(sys, BaseSet::Cylinders(vec![Word::new(vec![0])])).unwrap();
    let k = kac_check(&ind, 100_000, 10_000, SeedStream::new(7, "kac")).unwrap();
    assert!((k.mean - 1.0 / mu0).abs() <= 4.0 * k.stderr, "{k:?}");
    let s = return_time_spectrum(&ind, 60, None).unwrap();
    assert!(s.exact && s.tail < 1e-10);
    assert!((s.partial_mean - 1.0 / mu0).abs() < 1e-8);
}

#[test]
fn diagonal_mode_and_atomless_guard() {
    let sys = doubling();
    let map = Arc::new(ExpandingMap::doubling());
    let y = sys.point_target(0.0).unwrap();
    let fixed = record_sequence(&mut PointOrbit::new(map, OrbitPoint::rational(0, 1)).unwrap(), &y, 100).unwrap();
    assert!(fixed.terminal);
    let scan = divergence_scan(&sys, 8, &[1000, 100_000], SeedStream::new(4, "diag"), true).unwrap();
    assert_eq!(scan.excluded, 0);
    assert!(scan.pairs.iter().all(|p| p.monotone()));
}

#[test]
fn waiting_tail_at_zero_is_zero() {
    let sys = doubling();
    let y = sys.point_target(0.4).unwrap();
    let wt = waiting_tail(&sys, &y, 0.01, &[0, 5], 1000, SeedStream::new(1, "w0")).unwrap();
    assert_eq!((wt.rows[0].a, wt.rows[0].q), (0.0, 0.0));
    assert!(waiting_tail(&sys, &y, 0.01, &[1], 200_000_000, SeedStream::new(1, "w0")).is_err());
}

#[test]
fn quarter_spectrum_is_exact() {
    let ind = InducedSystem::new(doubling(), BaseSet::Intervals(vec![(0.0, 0.25)])).unwrap();
    let s = return_time_spectrum(&ind, 3, None).unwrap();
    // From [00]: x_2 = 0 returns at 1; otherwise x_2 = 1 rules out t = 2 and 00100 returns at 3.
    assert!((s.masses[0] - 0.5).abs() < 1e-15);
    assert_eq!(s.masses[1], 0.0);
    assert!((s.masses[2] - 0.125).abs() < 1e-15);
}
