use std::sync::Arc;

use hitstat::expanding::ExpandingMap;
use hitstat::hitting::{entry_table, pattern_hit_probability, record_sequence, stage_count, tau_direct};
use hitstat::induction::InducedSystem;
use hitstat::seeds::SeedStream;
use hitstat::symbolic::{d_alpha, IncidenceMatrix, SymbolPath, UltrametricSpec, Word};
use hitstat::system::{BaseSet, MeasuredSystem};
use hitstat::thermo::{GibbsState, Potential};
use proptest::prelude::*;

fn bernoulli(p: f64) -> Arc<GibbsState> {
    Arc::new(GibbsState::new(&Potential::bernoulli(&[p, 1.0 - p]).unwrap(), &IncidenceMatrix::full(2)).unwrap())
}

fn doubling() -> MeasuredSystem {
    let map = ExpandingMap::doubling();
    MeasuredSystem::interval("doubling", bernoulli(0.5), map.coding().unwrap().clone()).unwrap()
}

fn word() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..2, 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ultrametric_inequality(a in word(), b in word(), c in word(), alpha in 0.1f64..3.0) {
        let spec = UltrametricSpec::new(alpha).unwrap();
        let p = |w: &Vec<u32>| SymbolPath::periodic(Word::empty(), Word::new(w.clone())).unwrap();
        let (x, y, z) = (p(&a), p(&b), p(&c));
        let dxy = d_alpha(&x, &y, &spec, 64, true).unwrap();
        let dyz = d_alpha(&y, &z, &spec, 64, true).unwrap();
        let dxz = d_alpha(&x, &z, &spec, 64, true).unwrap();
        prop_assert!(dxz <= dxy.max(dyz) + 1e-15);
        prop_assert_eq!(dxy, d_alpha(&y, &x, &spec, 64, true).unwrap());
    }

    #[test]
    fn cylinder_measures_are_additive(p in 0.05f64..0.95, w in word()) {
        let g = bernoulli(p);
        let parent = g.cylinder_measure(&Word::new(w.clone()));
        let kids: f64 = (0..2).map(|e| g.cylinder_measure(&Word::new(w.clone()).extended(e))).sum();
        prop_assert!((parent - kids).abs() <= 1e-12);
        let ones = w.iter().filter(|&&s| s == 1).count() as i32;
        let exact = (1.0 - p).powi(ones) * p.powi(w.len() as i32 - ones);
        prop_assert!((parent - exact).abs() <= 1e-12);
    }

    #[test]
    fn coding_cdf_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, p in 0.1f64..0.9) {
        let map = ExpandingMap::doubling();
        let coding = map.coding().unwrap();
        let g = bernoulli(p);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (fl, fh) = (coding.cdf(&*g, lo), coding.cdf(&*g, hi));
        prop_assert!(fl <= fh + 1e-15);
        prop_assert!((0.0..=1.0).contains(&fl) && (0.0..=1.0).contains(&fh));
    }

    #[test]
    fn records_determine_entry_times(seed in 0u64..1000, j in 2i32..10) {
        let sys = doubling();
        let seeds = SeedStream::new(seed, "prop-records");
        let y = sys.target(&sys.sample_path(seeds.child("y"), 0));
        let x = sys.sample_path(seeds.child("x"), 0);
        let rec = record_sequence(sys.orbit_of(&x).as_mut(), &y, 5000).unwrap();
        prop_assert_eq!(rec.records[0].n, 1);
        for w in rec.records.windows(2) {
            prop_assert!(w[0].n < w[1].n && w[0].r > w[1].r);
        }
        let r = 0.5f64.powi(j);
        prop_assert_eq!(rec.tau(r), tau_direct(sys.orbit_of(&x).as_mut(), &y, r, 5000));
        let radii: Vec<f64> = (1..12).map(|i| 0.5f64.powi(i)).collect();
        let table = entry_table(&rec, &sys, &y, &radii).unwrap();
        for w in table.rows.windows(2) {
            prop_assert!(w[0].r > w[1].r);
            prop_assert!(w[0].running_max <= w[1].running_max);
            if let (Some(a), Some(b)) = (w[0].tau, w[1].tau) {
                prop_assert!(a <= b);
            }
        }
    }

    #[test]
    fn pattern_probability_matches_enumeration(w in prop::collection::vec(0u32..2, 1..5), k in 0u64..6) {
        let len = k as usize + w.len();
        let mut hits = 0u32;
        for bits in 0u32..(1 << len) {
            let s: Vec<u32> = (0..len).map(|i| (bits >> i) & 1).collect();
            if (1..=k as usize).any(|j| s[j..j + w.len()] == w[..]) {
                hits += 1;
            }
        }
        let exact = hits as f64 / (1u64 << len) as f64;
        prop_assert!((pattern_hit_probability(&w, &[0.5, 0.5], k) - exact).abs() < 1e-14);
    }

    #[test]
    fn stage_count_is_minimal(delta in 0.01f64..1.5, wg in 0.05f64..0.999) {
        let omega = stage_count(delta, wg).unwrap();
        prop_assert!(wg.powi(omega as i32 + 1) <= delta / 2.0);
        if omega > 0 {
            prop_assert!(wg.powi(omega as i32) > delta / 2.0);
        }
    }

    #[test]
    fn return_sums_increase(seed in 0u64..500, hi in 0.1f64..0.9) {
        let sys = doubling();
        let ind = InducedSystem::new(sys.clone(), BaseSet::Intervals(vec![(0.0, hi)])).unwrap();
        let x = ind.sample_point(SeedStream::new(seed, "prop-sums"), 0).unwrap();
        let sums = ind.return_sums(sys.orbit_of(&x).as_mut(), 25, 100_000).unwrap();
        for (l, w) in sums.sums.windows(2).enumerate() {
            prop_assert!(w[0] < w[1]);
            prop_assert!(w[0] >= l as u64 + 1);
        }
    }
}
