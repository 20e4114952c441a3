//! The ten experiment kinds. Each fills an `Outcome` as it goes, so a failure midway still
//! leaves whatever tables were finished.

use rayon::prelude::*;

use hitstat::coding::CylinderMeasure;
use hitstat::gdms::{alpha_theory, LimitMeasure};
use hitstat::hitting::{
    build_certificate, cylinder_radii, divergence_scan, entry_table, independent_hit_probability,
    pattern_hit_probability, rate_estimates, record_sequence, tau_direct, waiting_tail,
};
use hitstat::induction::{build_local_ifs, compare_hitting_statistics, kac_check, return_time_spectrum, InducedSystem};
use hitstat::seeds::SeedStream;
use hitstat::stats::{log_grid, median};
use hitstat::symbolic::{SymbolPath, Word};
use hitstat::system::{BaseSet, Geometry, MeasuredSystem, Target};
use hitstat::thermo::{pressure, Potential, PressureMethod};
use hitstat::Error;

use crate::config::{ConfigError, ExperimentBlock, LoadedConfig};
use crate::registry::Built;
use crate::report::{num, opt, Outcome, Table};

pub const KINDS: &[&str] = &[
    "pressure",
    "gibbs-audit",
    "records",
    "entry",
    "rates",
    "waiting-tail",
    "certificate",
    "kac",
    "induce-compare",
    "gdms-powerlaw",
];

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Lib(Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Lib(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

type Res<T> = std::result::Result<T, RunError>;

pub struct Ctx<'a> {
    pub cfg: &'a LoadedConfig,
    pub built: &'a Built,
    pub seeds: SeedStream,
}

impl Ctx<'_> {
    fn exp(&self) -> &ExperimentBlock {
        &self.cfg.config.experiment
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> RunError {
        RunError::Config(self.cfg.error_at(key, msg))
    }

    fn system(&self) -> Res<&MeasuredSystem> {
        self.built
            .system
            .as_ref()
            .ok_or_else(|| self.err("potential", "this experiment needs a symbolic Gibbs state (not gauss_t)"))
    }

    fn potential_name(&self) -> &str {
        &self.cfg.config.measure.potential
    }

    fn pairs(&self, default: usize) -> Res<usize> {
        let n = self.cfg.config.sampling.pairs.unwrap_or(default);
        if n == 0 {
            return Err(self.err("pairs", "pairs must be positive"));
        }
        Ok(n)
    }

    fn samples(&self, default: usize) -> Res<usize> {
        let n = self.cfg.config.sampling.samples.unwrap_or(default);
        if n == 0 {
            return Err(self.err("samples", "samples must be positive"));
        }
        Ok(n)
    }

    fn horizons(&self, default: &[u64]) -> Vec<u64> {
        self.cfg.config.sampling.horizons.clone().unwrap_or_else(|| default.to_vec())
    }
}

pub fn run(kind: &str, ctx: &Ctx, out: &mut Outcome) -> Res<()> {
    match kind {
        "pressure" => run_pressure(ctx, out),
        "gibbs-audit" => run_gibbs_audit(ctx, out),
        "records" => run_records(ctx, out),
        "entry" => run_entry(ctx, out, false),
        "rates" => run_entry(ctx, out, true),
        "waiting-tail" => run_waiting_tail(ctx, out),
        "certificate" => run_certificate(ctx, out),
        "kac" => run_kac(ctx, out),
        "induce-compare" => run_induce_compare(ctx, out),
        "gdms-powerlaw" => run_powerlaw(ctx, out),
        other => Err(ctx.err("kind", format!("unknown experiment '{other}' (see --list)"))),
    }
}

fn alpha_of(sys: &MeasuredSystem) -> Option<f64> {
    match &sys.geometry {
        Geometry::Shift(spec) => Some(spec.alpha),
        Geometry::Interval { .. } => None,
    }
}

/// Target word extended by a self-looping symbol so the point is admissible.
fn word_path(ctx: &Ctx, word: &Word) -> Res<SymbolPath> {
    let m = &ctx.built.matrix;
    if !m.is_admissible(word) {
        return Err(ctx.err("target_word", format!("word {word} is not admissible")));
    }
    let last = word.last().ok_or_else(|| ctx.err("target_word", "target word is empty"))?;
    let tail = (0..m.size() as u32)
        .find(|&s| m.allows(last, s) && m.allows(s, s))
        .ok_or_else(|| ctx.err("target_word", "no self-looping continuation for the target word"))?;
    Ok(SymbolPath::periodic(word.clone(), Word::new(vec![tail]))?)
}

fn parse_word(ctx: &Ctx, text: &str) -> Res<Word> {
    Word::parse(text).map_err(|e| ctx.err("target_word", e.to_string()))
}

/// The configured target: a word (shifts), a point y (intervals), or a μ-typical sample.
fn target_of(ctx: &Ctx, sys: &MeasuredSystem, task: u64) -> Res<(Target, String)> {
    let e = ctx.exp();
    match &sys.geometry {
        Geometry::Shift(_) => {
            if e.y.is_some() {
                return Err(ctx.err("y", "y applies to interval systems; use target_word on shifts"));
            }
            if let Some(t) = &e.target_word {
                let w = parse_word(ctx, t)?;
                return Ok((sys.target(&word_path(ctx, &w)?), w.to_string()));
            }
        }
        Geometry::Interval { .. } => {
            if e.target_word.is_some() {
                return Err(ctx.err("target_word", "target_word applies to shifts; use y on interval systems"));
            }
            if let Some(y) = e.y {
                return Ok((sys.point_target(y).map_err(|er| ctx.err("y", er.to_string()))?, num(y)));
            }
        }
    }
    let path = sys.sample_path(ctx.seeds.child("y"), task);
    let t = sys.target(&path);
    let label = match t.point() {
        Some(y) => num(y),
        None => format!("sampled({})", path.prefix(12)),
    };
    Ok((t, label))
}

fn radius_schedule(ctx: &Ctx, sys: &MeasuredSystem) -> Res<Vec<f64>> {
    let e = ctx.exp();
    if let Some(r) = &e.radii {
        if r.is_empty() || r.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(ctx.err("radii", "radii must be positive and finite"));
        }
        return Ok(r.clone());
    }
    Ok(match alpha_of(sys) {
        Some(alpha) => cylinder_radii(alpha, e.cylinder_depth.unwrap_or(24)),
        None => (1..=e.dyadic_depth.unwrap_or(24) as i32).map(|j| 0.5f64.powi(j)).collect(),
    })
}

fn base_set(ctx: &Ctx, sys: &MeasuredSystem) -> Res<BaseSet> {
    let e = ctx.exp();
    let set = match (&e.cells, &e.intervals) {
        (Some(_), Some(_)) => return Err(ctx.err("cells", "give either cells or intervals, not both")),
        (Some(cells), None) => {
            let words = cells.iter().map(|c| Word::parse(c).map_err(|er| ctx.err("cells", er.to_string())));
            BaseSet::Cylinders(words.collect::<Res<Vec<_>>>()?)
        }
        (None, Some(iv)) => BaseSet::Intervals(iv.iter().map(|p| (p[0], p[1])).collect()),
        (None, None) => match sys.geometry {
            Geometry::Shift(_) => BaseSet::Cylinders(vec![Word::new(vec![0])]),
            Geometry::Interval { .. } => BaseSet::Intervals(vec![(0.0, 0.5)]),
        },
    };
    let key = if e.cells.is_some() { "cells" } else { "intervals" };
    sys.check_set(&set).map_err(|er| ctx.err(key, er.to_string()))?;
    Ok(set)
}

/// Known pressures for the built-in pairs.
fn closed_form_pressure(ctx: &Ctx) -> Option<(f64, &'static str)> {
    let name = ctx.built.name.as_str();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    match ctx.potential_name() {
        "zero" => match name {
            "full-shift2" | "doubling" | "cantor3" | "dyadic2" => Some((2f64.ln(), "ln 2")),
            "ternary" => Some((3f64.ln(), "ln 3")),
            "full-shift" => Some(((ctx.built.matrix.size() as f64).ln(), "ln n")),
            "golden-mean" | "golden-markov" => Some((phi.ln(), "ln golden ratio")),
            _ => None,
        },
        "bernoulli" if ctx.built.matrix.is_full() => Some((0.0, "log sum p = 0")),
        "gauss_t" if ctx.cfg.config.measure.t.unwrap_or(1.0) == 1.0 => Some((0.0, "Gauss measure, P(1) = 0")),
        _ => None,
    }
}

fn run_pressure(ctx: &Ctx, out: &mut Outcome) -> Res<()> {
    let b = ctx.built;
    let depth = ctx.exp().depth.unwrap_or(12);
    let tol = ctx.exp().tolerance.unwrap_or(0.05);
    let spectral = pressure(&b.potential, &b.matrix, depth, PressureMethod::Spectral)?;
    out.result("pressure", "spectral", num(spectral.value));
    out.result("pressure", "method", spectral.method.tag());
    out.result("pressure", "truncation_tail", num(spectral.truncation_tail));
    if let Some(w) = &spectral.warning {
        out.note(w.clone());
    }
    let words = b.matrix.count_admissible(depth);
    if matches!(b.potential, Potential::Local(_)) && words <= 1 << 26 {
        let tr = pressure(&b.potential, &b.matrix, depth, PressureMethod::TruncatedLimit)?;
        let mut t = Table::new(
            "pressure.csv",
            &[
                ("n", "word length"),
                ("partial", "(1/n) log Z_n with cylinder-sup weights"),
                ("spectral", "log of the Perron root"),
            ],
        );
        for (i, p) in tr.partials.iter().enumerate() {
            t.push(vec![(i + 1).to_string(), num(*p), num(spectral.value)]);
        }
        out.tables.push(t);
        let gap = (tr.value - spectral.value).abs();
        out.result("pressure", "truncated", num(tr.value));
        out.result("pressure", "truncated_gap", num(gap));
        out.check("truncated_matches_spectral", gap <= tol, format!("|gap| = {gap:.3e} at depth {depth}, tolerance {tol:e}"));
    } else {
        out.note(format!("truncated partition sums skipped: {words} words at depth {depth}"));
    }
    if let Some((v, label)) = closed_form_pressure(ctx) {
        let slack = if matches!(b.potential, Potential::GaussT { .. }) { 1e-6 + spectral.truncation_tail } else { 1e-10 };
        let err = (spectral.value - v).abs();
        out.result("pressure", "closed_form", num(v));
        out.check("closed_form", err <= slack, format!("{label}: |error| = {err:.3e}, allowed {slack:.1e}"));
    }
    if let Some(x) = ctx.exp().expected {
        let err = (spectral.value - x).abs();
        out.check("expected_value", err <= tol, format!("|P - {x}| = {err:.3e}"));
    }
    Ok(())
}

fn run_gibbs_audit(ctx: &Ctx, out: &mut Outcome) -> Res<()> {
    let sys = ctx.system()?;
    let g = &sys.gibbs;
    let e = ctx.exp();
    let depth = e.depth.unwrap_or(12);
    let a = g.verify_gibbs_property(depth)?;
    let mut t = Table::new(
        "audit.csv",
        &[
            ("depth", "largest audited word length"),
            ("q", "Gibbs constant from the eigen-data"),
            ("min_ratio", "least mu[w] / exp(S_n f - nP) over audited words"),
            ("max_ratio", "largest such ratio"),
            ("argmin", "word attaining min_ratio"),
            ("argmax", "word attaining max_ratio"),
            ("cylinders", "number of audited cylinders"),
            ("additivity_error", "max |mu[w] - sum_e mu[we]|"),
            ("normalization_error", "max |sum over length-n words - 1|"),
        ],
    );
    t.push(vec![
        a.depth.to_string(),
        num(a.q),
        num(a.min_ratio),
        num(a.max_ratio),
        a.argmin.to_string(),
        a.argmax.to_string(),
        a.cylinders.to_string(),
        num(a.max_additivity_error),
        num(a.normalization_error),
    ]);
    out.tables.push(t);
    out.result("audit", "q", num(a.q));
    out.result("audit", "worst_low", format!("{} at {}", num(a.min_ratio), a.argmin));
    out.result("audit", "worst_high", format!("{} at {}", num(a.max_ratio), a.argmax));
    let within = a.min_ratio * a.q >= 1.0 - 1e-12 && a.max_ratio <= a.q * (1.0 + 1e-12);
    out.check("gibbs_ratio_within_q", within, format!("ratios in [{:.6}, {:.6}], Q = {:.6}", a.min_ratio, a.max_ratio, a.q));
    out.check("additivity", a.max_additivity_error <= 1e-12, format!("{:.3e}", a.max_additivity_error));
    out.check("normalization", a.normalization_error <= 1e-12, format!("{:.3e}", a.normalization_error));

    if ctx.potential_name() == "bernoulli" && ctx.built.matrix.is_full() {
        let p = ctx.cfg.config.measure.p.clone().unwrap_or_default();
        let mut worst = 0.0f64;
        let mut checked = 0usize;
        for n in 1..=depth.min(12) {
            let Ok(words) = ctx.built.matrix.enumerate(n, 1 << 20) else {
                out.note(format!("bernoulli product check stopped at length {n}: too many words"));
                break;
            };
            for w in &words {
                let exact: f64 = w.symbols().iter().map(|&s| p[s as usize]).product();
                worst = worst.max((g.cylinder_measure(w) - exact).abs());
            }
            checked += words.len();
        }
        out.result("audit", "bernoulli_words_checked", checked);
        out.check("bernoulli_products", worst <= 1e-12, format!("max |mu[w] - prod p| = {worst:.3e} over {checked} words"));
    }

    let fit = g.fit_mixing_constants(e.probe_depth.unwrap_or(3), e.max_gap.unwrap_or(8))?;
    let mut m = Table::new(
        "mixing.csv",
        &[
            ("extra_gap", "gap beyond the length of B"),
            ("max_deviation", "max |mu(T^-n A & B) / (mu(A) mu(B)) - 1| over probes"),
            ("envelope", "fitted D gamma^j"),
        ],
    );
    let mut dominated = true;
    for (j, dev) in fit.per_gap_deviation.iter().enumerate() {
        let env = fit.d * fit.gamma.powi(j as i32);
        dominated &= *dev <= env * (1.0 + 1e-9) + 1e-12;
        m.push(vec![j.to_string(), num(*dev), num(env)]);
    }
    out.tables.push(m);
    out.result("mixing", "C", num(fit.c));
    out.result("mixing", "D", num(fit.d));
    out.result("mixing", "gamma", num(fit.gamma));
    out.result("mixing", "probes", fit.probes.len());
    out.check("mixing_envelope", dominated, "D gamma^j dominates every probed deviation");
    Ok(())
}

fn run_records(ctx: &Ctx, out: &mut Outcome) -> Res<()> {
    let sys = ctx.system()?;
    let e = ctx.exp();
    let pairs = ctx.pairs(100)?;
    let horizons = ctx.horizons(&[10_000, 1_000_000]);
    let diagonal = e.diagonal.unwrap_or(false);
    let threshold = e.liminf_threshold.unwrap_or(0.5);
    let scan = divergence_scan(sys, pairs, &horizons, ctx.seeds.child("pairs"), diagonal)
        .map_err(|er| match er {
            Error::Invalid(m) => ctx.err("horizons", m),
            other => RunError::Lib(other),
        })?;
    let mut rec = Table::new(
        "records.csv",
        &[
            ("pair_id", "pair index"),
            ("k", "record index, from 1"),
            ("n_k", "record time"),
            ("r_k", "record distance"),
            ("E_k", "n_k mu(B(y, r_(k-1))), empty for k = 1"),
            ("running_max", "running max of E over records 2..k"),
        ],
    );
    let mut div = Table::new(
        "divergence.csv",
        &[
            ("pair_id", "pair index"),
            ("horizon", "time horizon"),
            ("running_max", "sup of E over record windows closed by the horizon"),
            ("deep_min", "min over k >= 3 of n_k mu(closed B(y, r_k))"),
            ("degenerate", "orbit hit y exactly (excluded from medians)"),
        ],
    );
    for p in &scan.pairs {
        let target = target_for_pair(ctx, sys, p.pair, diagonal);
        for (k, r) in p.records.records.iter().enumerate() {
            let (ek, rm) = if k == 0 {
                (String::new(), String::new())
            } else {
                let e = r.n as f64 * sys.ball_measure(&target, p.records.records[k - 1].r);
                (num(e), num(p.running_max[k - 1]))
            };
            rec.push(vec![p.pair.to_string(), (k + 1).to_string(), r.n.to_string(), num(r.r), ek, rm]);
        }
        for (h, &horizon) in horizons.iter().enumerate() {
            div.push(vec![
                p.pair.to_string(),
                horizon.to_string(),
                num(p.sup_by_horizon[h]),
                opt(p.deep_min_by_horizon[h].map(num)),
                p.degenerate.to_string(),
            ]);
        }
    }
    out.tables.push(rec);
    out.tables.push(div);
    for (h, &horizon) in horizons.iter().enumerate() {
        out.result("medians", &format!("running_max_h{horizon}"), num(scan.median_sup[h]));
        out.result("medians", &format!("deep_min_h{horizon}"), num(scan.median_deep_min[h]));
    }
    out.result("scan", "pairs", pairs);
    out.result("scan", "excluded", scan.excluded);
    out.result("scan", "mode", if diagonal { "diagonal" } else { "independent" });
    out.note("limsup and liminf are not estimated; running extrema at explicit horizons stand in for them");
    let monotone = scan.pairs.iter().filter(|p| p.monotone()).count();
    out.check("running_max_nondecreasing", monotone == pairs, format!("{monotone}/{pairs} pairs"));
    if horizons.len() >= 2 {
        let m = &scan.median_sup;
        out.check(
            "median_running_max_increases",
            scan.trend_increasing(),
            format!("medians {}", m.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" < ")),
        );
    }
    let last = *scan.median_deep_min.last().expect("at least one horizon");
    out.check(
        "deep_min_small",
        last <= threshold,
        format!("median min_(k>=3) E = {last:.4}, threshold {threshold}"),
    );
    Ok(())
}

/// Re-derives the target a divergence scan used for `pair` (same seed streams).
fn target_for_pair(ctx: &Ctx, sys: &MeasuredSystem, pair: usize, diagonal: bool) -> Target {
    let seeds = ctx.seeds.child("pairs");
    let s = if diagonal { seeds.child("x") } else { seeds.child("y") };
    sys.target(&sys.sample_path(s, pair as u64))
}

struct EntryPair {
    table: hitstat::hitting::EntryTable,
    records: hitstat::hitting::RecordSequence,
    duality: Vec<(f64, Option<u64>, Option<u64>)>,
    rates: std::result::Result<hitstat::hitting::RateEstimates, Error>,
}

fn run_entry(ctx: &Ctx, out: &mut Outcome, rates: bool) -> Res<()> {
    let sys = ctx.system()?;
    let pairs = ctx.pairs(10)?;
    let horizon = *ctx.horizons(&[1_000_000]).last().ok_or_else(|| ctx.err("horizons", "horizons is empty"))?;
    if horizon < 1 {
        return Err(ctx.err("horizons", "horizon must be positive"));
    }
    let radii = radius_schedule(ctx, sys)?;
    let x_seeds = ctx.seeds.child("x");
    let results: Vec<EntryPair> = (0..pairs)
        .into_par_iter()
        .map(|i| -> Res<EntryPair> {
            let (target, _) = target_of(ctx, sys, i as u64)?;
            let src = sys.sample_source(x_seeds, i as u64);
            let records = record_sequence(sys.orbit(src).as_mut(), &target, horizon)?;
            let table = entry_table(&records, sys, &target, &radii)?;
            let mut duality = Vec::new();
            for row in [table.rows.len() / 3, 2 * table.rows.len() / 3] {
                let r = table.rows[row].r;
                let direct = tau_direct(sys.orbit(sys.sample_source(x_seeds, i as u64)).as_mut(), &target, r, horizon);
                duality.push((r, records.tau(r), direct));
            }
            let rates = rate_estimates(&table);
            Ok(EntryPair { table, records, duality, rates })
        })
        .collect::<Res<Vec<_>>>()?;

    let mut t = Table::new(
        "entry.csv",
        &[
            ("pair_id", "pair index"),
            ("r", "radius"),
            ("tau", "entry time into B(y, r), empty if censored"),
            ("mu_ball", "mu(B(y, r))"),
            ("E_r", "tau mu(B(y, r))"),
            ("running_max", "running max of E_r as r decreases"),
        ],
    );
    let mut rec = Table::new(
        "records.csv",
        &[("pair_id", "pair index"), ("k", "record index, from 1"), ("n_k", "record time"), ("r_k", "record distance")],
    );
    let mut monotone = 0;
    let mut duality_ok = true;
    for (i, p) in results.iter().enumerate() {
        for row in &p.table.rows {
            t.push(vec![i.to_string(), num(row.r), opt(row.tau), num(row.mu_ball), opt(row.e_r.map(num)), num(row.running_max)]);
        }
        for (k, r) in p.records.records.iter().enumerate() {
            rec.push(vec![i.to_string(), (k + 1).to_string(), r.n.to_string(), num(r.r)]);
        }
        if p.table.rows.windows(2).all(|w| w[0].running_max <= w[1].running_max) {
            monotone += 1;
        }
        duality_ok &= p.duality.iter().all(|(_, a, b)| a == b);
    }
    out.tables.push(t);
    out.tables.push(rec);
    out.result("entry", "pairs", pairs);
    out.result("entry", "horizon", horizon);
    out.result("entry", "radii", radii.len());
    let censored: usize = results.iter().map(|p| p.table.rows.iter().filter(|r| r.tau.is_none()).count()).sum();
    out.result("entry", "censored_rows", censored);
    out.check("running_max_nondecreasing", monotone == pairs, format!("{monotone}/{pairs} pairs"));
    out.check("records_match_direct_scan", duality_ok, "tau from records equals a direct scan at two radii per pair");

    if rates {
        let mut rt = Table::new(
            "rates.csv",
            &[
                ("pair_id", "pair index"),
                ("points", "uncensored rows used"),
                ("hitting_lower", "least window slope of log tau against -log r"),
                ("hitting_fit", "full least-squares slope"),
                ("hitting_upper", "largest window slope"),
                ("dim_lower", "least window slope of log mu(B) against log r"),
                ("dim_fit", "full least-squares slope"),
                ("dim_upper", "largest window slope"),
            ],
        );
        let mut fits = Vec::new();
        let mut ordered = true;
        for (i, p) in results.iter().enumerate() {
            match &p.rates {
                Ok(r) => {
                    ordered &= r.hitting_lower <= r.hitting_fit
                        && r.hitting_fit <= r.hitting_upper
                        && r.dim_lower <= r.dim_fit
                        && r.dim_fit <= r.dim_upper;
                    fits.push(r.dim_fit);
                    rt.push(vec![
                        i.to_string(),
                        r.points.to_string(),
                        num(r.hitting_lower),
                        num(r.hitting_fit),
                        num(r.hitting_upper),
                        num(r.dim_lower),
                        num(r.dim_fit),
                        num(r.dim_upper),
                    ]);
                }
                Err(er) => out.note(format!("pair {i}: {er}")),
            }
        }
        out.tables.push(rt);
        out.check("rate_envelopes_ordered", ordered, "lower <= fit <= upper for both slopes");
        if fits.is_empty() {
            out.check("rates_estimated", false, "no pair had enough uncensored rows");
        } else {
            let med = median(&fits);
            out.result("rates", "median_dim_fit", num(med));
            if let Some(x) = ctx.exp().expected {
                let tol = ctx.exp().tolerance.unwrap_or(0.1);
                let rel = (med / x - 1.0).abs();
                out.check("expected_dimension", rel <= tol, format!("median {med:.5} vs {x}, relative error {rel:.4}"));
            }
        }
    }
    Ok(())
}

fn run_waiting_tail(ctx: &Ctx, out: &mut Outcome) -> Res<()> {
    let sys = ctx.system()?;
    let e = ctx.exp();
    let samples = ctx.samples(100_000)?;
    let (target, label) = target_of(ctx, sys, 0)?;
    let (r, word) = match (&sys.geometry, &target) {
        (Geometry::Shift(spec), Target::Sequence { path, .. }) => {
            let n = match &e.target_word {
                Some(t) => parse_word(ctx, t)?.len(),
                None => e.depth.unwrap_or(5),
            };
            if n == 0 {
                return Err(ctx.err("depth", "depth must be positive"));
            }
            let r = e.r.unwrap_or_else(|| spec.distance_from_wedge(n - 1));
            (r, Some(path.prefix(spec.ball_depth(r).map_err(|er| ctx.err("r", er.to_string()))?)))
        }
        _ => (e.r.unwrap_or(1.0 / 32.0), None),
    };
    let k_grid = e.k_grid.clone().unwrap_or_else(|| vec![0, 1, 2, 4, 8, 16, 32, 64]);
    let wt = waiting_tail(sys, &target, r, &k_grid, samples, ctx.seeds.child("tail"))?;
    let g = &sys.gibbs;
    let exact_ok = ctx.built.matrix.is_full()
        && matches!(ctx.potential_name(), "zero" | "bernoulli")
        && word.as_ref().is_some_and(|w| w.len() <= 64);
    let probs: Vec<f64> = (0..ctx.built.matrix.size() as u32).map(|s| g.cylinder_measure(&Word::new(vec![s]))).collect();
    let closed = e.closed_form.unwrap_or(false);

    let mut t = Table::new(
        "waiting_tail.csv",
        &[
            ("k", "number of steps"),
            ("a_hat", "estimated mu(tau_R <= k)"),
            ("a_se", "binomial standard error of a_hat"),
            ("q_hat", "estimated mu(R & T^-1..k R), return within k steps from R"),
            ("q_se", "standard error of q_hat"),
            ("bound", "k mu(R)"),
            ("closed_form", "1 - (1 - mu(R))^k, independence"),
            ("exact", "exact a(k) by pattern automaton, empty when unavailable"),
        ],
    );
    let (mut bound_ok, mut order_ok, mut cf_ok, mut exact_all) = (true, true, true, true);
    let mut worst_cf = 0.0f64;
    for row in &wt.rows {
        let cf = independent_hit_probability(wt.mu_cover, row.k);
        let exact = if exact_ok {
            Some(pattern_hit_probability(word.as_ref().expect("checked").symbols(), &probs, row.k))
        } else {
            None
        };
        bound_ok &= row.bound_ok();
        order_ok &= row.ordered();
        let sigma = |p: f64| row.a_se.max((p * (1.0 - p) / samples as f64).sqrt());
        let z_cf = if row.a == cf { 0.0 } else { (row.a - cf).abs() / sigma(cf) };
        worst_cf = worst_cf.max(z_cf);
        cf_ok &= z_cf <= 3.0;
        if let Some(x) = exact {
            exact_all &= row.a == x || (row.a - x).abs() <= 3.0 * sigma(x);
        }
        t.push(vec![
            row.k.to_string(),
            num(row.a),
            num(row.a_se),
            num(row.q),
            num(row.q_se),
            num(row.bound),
            num(cf),
            opt(exact.map(num)),
        ]);
    }
    out.tables.push(t);
    out.result("tail", "target", label);
    out.result("tail", "r", num(r));
    out.result("tail", "mu_ball", num(wt.mu_ball));
    out.result("tail", "mu_cover", num(wt.mu_cover));
    out.result("tail", "samples", wt.samples);
    out.check("q_within_bound", bound_ok, "q_hat <= k mu(R) + 3 se at every k");
    out.check("q_at_most_a", order_ok, "q_hat <= a_hat + 3 se and a_hat nondecreasing");
    let window = wt.window_check.iter().all(|&(_, p, se)| (p - wt.mu_ball).abs() <= 3.0 * se.max(1e-300) || p == wt.mu_ball);
    out.check("window_identity", window, "mu(T^-j R) matches mu(R) within 3 se (invariance)");
    if exact_ok {
        out.check("exact_automaton", exact_all, "a_hat matches the pattern-automaton value within 3 sigma");
    }
    if closed {
        out.check("closed_form", cf_ok, format!("worst |a_hat - closed form| = {worst_cf:.2} sigma"));
    }
    Ok(())
}

fn run_certificate(ctx: &Ctx, out: &mut Outcome) -> Res<()> {
    let sys = ctx.system()?;
    if !matches!(sys.geometry, Geometry::Shift(_)) {
        return Err(ctx.err("name", "certificate runs on shifts"));
    }
    let e = ctx.exp();
    let m = e.m.unwrap_or(0.05);
    let delta = e.delta.unwrap_or(0.2);
    if !(m > 0.0) {
        return Err(ctx.err("m", "m must be positive"));
    }
    if !(delta > 0.0 && delta < 2.0) {
        return Err(ctx.err("delta", "delta must lie in (0, 2)"));
    }
    let samples = ctx.samples(100_000)?;
    let (target, label) = target_of(ctx, sys, 0)?;
    let fit = sys.gibbs.fit_mixing_constants(e.probe_depth.unwrap_or(3), e.max_gap.unwrap_or(8))?;
    out.result("constants", "C", num(fit.c));
    out.result("constants", "D", num(fit.d));
    out.result("constants", "gamma", num(fit.gamma));
    out.note("the verdict is conditional on the fitted mixing constants C, D, gamma, which stand in for the abstract ones");
    let cert = match build_certificate(sys, &target, m, delta, &fit, samples, ctx.seeds.child("certificate")) {
        Ok(c) => c,
        Err(Error::Infeasible(msg)) => {
            out.check("ladder_feasible", false, msg);
            return Ok(());
        }
        Err(er) => return Err(er.into()),
    };
    let mut t = Table::new(
        "certificate.csv",
        &[
            ("i", "stage index"),
            ("r_i", "ladder radius"),
            ("k_i", "2M / mu(R_i)"),
            ("mu_R_i", "mu(R_(r_i)), cover of the ball"),
            ("mu_ball", "mu(B(y, r_i))"),
            ("slack_gap", "k_i - 2(s + k_(i-1)), empty for i = 0"),
            ("slack_mass", "(delta / 2 Omega) / (k_(i-1) + s) - mu(R_i), empty for i = 0"),
        ],
    );
    let mut slacks_ok = true;
    for s in &cert.stages {
        slacks_ok &= s.slack_gap.is_none_or(|v| v >= 0.0) && s.slack_mass.is_none_or(|v| v >= 0.0);
        t.push(vec![
            s.i.to_string(),
            num(s.r),
            num(s.k),
            num(s.mu_cover),
            num(s.mu_ball),
            opt(s.slack_gap.map(num)),
            opt(s.slack_mass.map(num)),
        ]);
    }
    out.tables.push(t);
    let decreasing = cert.stages.windows(2).all(|w| w[0].r > w[1].r);
    let schedule = (cert.w * cert.big_gamma).powi(cert.omega as i32 + 1) <= delta / 2.0;
    out.result("certificate", "target", label);
    out.result("certificate", "M", num(cert.m));
    out.result("certificate", "Gamma", num(cert.big_gamma));
    out.result("certificate", "s", cert.s);
    out.result("certificate", "W", num(cert.w));
    out.result("certificate", "Omega", cert.omega);
    out.result("certificate", "delta", num(cert.delta));
    out.result("certificate", "samples", cert.samples);
    out.result("certificate", "bad_fraction", num(cert.bad_fraction));
    out.result("certificate", "stderr", num(cert.stderr));
    out.check("ladder_feasible", slacks_ok && decreasing, format!("{} stages, all slacks nonnegative", cert.stages.len()));
    out.check("stage_count_schedule", schedule, "(W Gamma)^(Omega + 1) <= delta / 2");
    out.check("omega_at_most_1000", cert.omega <= 1000, format!("Omega = {}", cert.omega));
    out.check(
        "bad_set_within_delta",
        cert.verdict(),
        format!("{:.5} - 3 x {:.5} <= {delta}", cert.bad_fraction, cert.stderr),
    );
    Ok(())
}

fn run_kac(ctx: &Ctx, out: &mut Outcome) -> Res<()> {
    let sys = ctx.system()?;
    let e = ctx.exp();
    let set = base_set(ctx, sys)?;
    let induced = InducedSystem::new(sys.clone(), set)?;
    let samples = ctx.samples(100_000)?;
    let horizon = e.horizon.unwrap_or(100_000);
    let k = kac_check(&induced, samples, horizon, ctx.seeds.child("kac"))?;
    let mut t = Table::new(
        "kac.csv",
        &[
            ("samples", "return times drawn from the conditional measure"),
            ("censored", "orbits with no return by the horizon"),
            ("mean", "sample mean of the first return time"),
            ("stderr", "standard error of the mean"),
            ("target", "1 / mu(X)"),
            ("z", "(mean - target) / stderr"),
        ],
    );
    t.push(vec![k.samples.to_string(), k.censored.to_string(), num(k.mean), num(k.stderr), num(k.target), num(k.z)]);
    out.tables.push(t);
    out.result("kac", "mu_set", num(induced.mu_set));
    out.result("kac", "mean", num(k.mean));
    out.result("kac", "stderr", num(k.stderr));
    out.result("kac", "target", num(k.target));
    if let Some(w) = &k.warning {
        out.note(w.clone());
    }
    out.check("kac_within_4se", k.z.abs() <= 4.0, format!("z = {:.3}", k.z));
    if let Some(tol) = e.tolerance {
        let err = (k.mean - k.target).abs();
        out.check("kac_tolerance", err <= tol, format!("|mean - target| = {err:.5}, tolerance {tol}"));
    }
    match return_time_spectrum(&induced, e.max_return.unwrap_or(40), None) {
        Ok(s) => {
            let mut st = Table::new(
                "spectrum.csv",
                &[("n", "return time"), ("mass", "conditional mass of {t = n}, exact")],
            );
            for (n, m) in s.masses.iter().enumerate() {
                st.push(vec![(n + 1).to_string(), num(*m)]);
            }
            out.tables.push(st);
            out.result("spectrum", "tail", num(s.tail));
            out.result("spectrum", "partial_mean", num(s.partial_mean));
            let total: f64 = s.masses.iter().sum();
            out.check("spectrum_total", total <= 1.0 + 1e-12 && s.tail >= -1e-12, format!("sum = {total:.12}"));
        }
        Err(Error::Unsupported(m)) => out.note(format!("exact return spectrum skipped: {m}")),
        Err(er) => return Err(er.into()),
    }
    Ok(())
}

struct PairCompare {
    cmp: hitstat::induction::HittingComparison,
    evaluated: usize,
    pass: bool,
}

fn run_induce_compare(ctx: &Ctx, out: &mut Outcome) -> Res<()> {
    let sys = ctx.system()?;
    let e = ctx.exp();
    let set = base_set(ctx, sys)?;
    let induced = InducedSystem::new(sys.clone(), set.clone())?;
    let pairs = ctx.pairs(50)?;
    let horizon = e.horizon.unwrap_or(1_000_000);
    let max_radius = e.max_radius.unwrap_or(1.0 / 256.0);
    let tol = e.tolerance.unwrap_or(0.05);
    let pass_fraction = e.pass_fraction.unwrap_or(0.95);
    let (target, label) = target_of(ctx, sys, 0)?;
    let x_seeds = ctx.seeds.child("x");
    let results: Vec<PairCompare> = (0..pairs)
        .into_par_iter()
        .map(|i| -> Res<PairCompare> {
            let x = induced.sample_point(x_seeds, i as u64)?;
            let cmp = compare_hitting_statistics(&induced, &target, &x, None, horizon)?;
            let scoped: Vec<_> = cmp.rows.iter().filter(|r| r.ball_inside && r.r <= max_radius && !r.censored()).collect();
            let pass = scoped.iter().all(|r| r.relative_gap().is_some_and(|g| g <= tol));
            Ok(PairCompare { evaluated: scoped.len(), pass, cmp })
        })
        .collect::<Res<Vec<_>>>()?;

    let mut t = Table::new(
        "compare.csv",
        &[
            ("pair_id", "pair index"),
            ("r", "radius (left end of a base record window)"),
            ("tau", "base entry time"),
            ("tau_hat", "induced entry time"),
            ("mu_ball", "mu(B(y, r))"),
            ("mu_hat_ball", "conditional measure of B(y, r)"),
            ("E", "tau mu(B)"),
            ("E_hat", "tau_hat mu_hat(B)"),
            ("rel_gap", "|E - E_hat| / E_hat"),
            ("ball_inside", "B(y, r) lies inside the inducing set"),
            ("identity", "tau equals the sum of the first tau_hat return times"),
            ("sandwich", "entry-time sandwich between induced and base records holds"),
        ],
    );
    let (mut identity, mut sandwich, mut equivalent) = (true, true, 0usize);
    for (i, p) in results.iter().enumerate() {
        for r in &p.cmp.rows {
            identity &= r.identity != Some(false);
            sandwich &= r.sandwich != Some(false);
            t.push(vec![
                i.to_string(),
                num(r.r),
                opt(r.tau),
                opt(r.tau_hat),
                num(r.mu_ball),
                num(r.mu_hat_ball),
                opt(r.e_base().map(num)),
                opt(r.e_induced().map(num)),
                opt(r.relative_gap().map(num)),
                r.ball_inside.to_string(),
                opt(r.identity),
                opt(r.sandwich),
            ]);
        }
        if p.cmp.record_equivalent {
            equivalent += 1;
        }
    }
    out.tables.push(t);
    let evaluated = results.iter().filter(|p| p.evaluated > 0).count();
    let passing = results.iter().filter(|p| p.evaluated > 0 && p.pass).count();
    let share = if evaluated == 0 { 0.0 } else { passing as f64 / pairs as f64 };
    out.result("compare", "target", label);
    out.result("compare", "mu_set", num(induced.mu_set));
    out.result("compare", "pairs", pairs);
    out.result("compare", "pairs_with_rows_in_scope", evaluated);
    out.result("compare", "pairs_passing", passing);
    out.result("compare", "max_radius", num(max_radius));
    out.check("return_sum_identity", identity, "tau = sum of the first tau_hat return times at every radius inside the inducing set");
    out.check("entry_sandwich", sandwich, "every radius inside the inducing set");
    out.check("record_equivalence", equivalent == pairs, format!("{equivalent}/{pairs} pairs"));
    out.check(
        "equality_at_scale",
        share >= pass_fraction,
        format!("{passing}/{pairs} pairs have rel_gap <= {tol} at every in-scope radius; need {pass_fraction}"),
    );

    if let (BaseSet::Intervals(iv), Some(_)) = (&set, sys.coding()) {
        if iv.len() == 1 {
            match build_local_ifs(sys, &set, target.point(), e.max_return.unwrap_or(10), 1 << 20) {
                Ok(ifs) => {
                    let mut it = Table::new(
                        "ifs.csv",
                        &[
                            ("n", "return time of the branch"),
                            ("word", "coding word of the branch domain"),
                            ("lo", "domain left end"),
                            ("hi", "domain right end"),
                            ("mass", "mu of the domain"),
                            ("conditional_mass", "conditional mass in the inducing set"),
                            ("lipschitz", "Lipschitz constant of the inverse branch"),
                            ("endpoint_error", "|branch image endpoints - inducing set endpoints|"),
                        ],
                    );
                    let mut endpoints = 0.0f64;
                    for b in &ifs.branches {
                        endpoints = endpoints.max(b.endpoint_error);
                        it.push(vec![
                            b.n.to_string(),
                            b.word.to_string(),
                            num(b.domain.0),
                            num(b.domain.1),
                            num(b.mass),
                            num(b.conditional_mass),
                            num(b.lipschitz),
                            num(b.endpoint_error),
                        ]);
                    }
                    out.tables.push(it);
                    out.result("local_ifs", "branches", ifs.branches.len());
                    out.result("local_ifs", "contraction", num(ifs.contraction));
                    out.result("local_ifs", "uncovered_conditional", num(ifs.uncovered_conditional));
                    out.check("ifs_disjoint", ifs.disjoint, "branch domains have disjoint interiors");
                    out.check("ifs_contracting", ifs.contraction < 1.0, format!("contraction {:.4}", ifs.contraction));
                    out.check("ifs_onto", endpoints <= 1e-12, format!("max endpoint error {endpoints:.3e}"));
                }
                Err(er @ (Error::Unsupported(_) | Error::Invalid(_))) => out.note(format!("local IFS skipped: {er}")),
                Err(er) => return Err(er.into()),
            }
        }
    }
    Ok(())
}

fn run_powerlaw(ctx: &Ctx, out: &mut Outcome) -> Res<()> {
    let b = ctx.built;
    let (Some(gdms), Some(limit)) = (&b.gdms, &b.limit) else {
        return Err(ctx.err("name", "gdms-powerlaw runs on cantor3, dyadic2 or gauss-cf"));
    };
    let e = ctx.exp();
    let r_min = e.r_min.unwrap_or(1e-6);
    let r_max = e.r_max.unwrap_or(1e-1);
    if !(r_min > 0.0 && r_min < r_max) {
        return Err(ctx.err("r_min", "need 0 < r_min < r_max"));
    }
    let radii = match &e.radii {
        Some(r) => r.clone(),
        None => log_grid(r_min, r_max, e.radii_count.unwrap_or(16)),
    };
    let ys: Vec<f64> = match &e.y_points {
        Some(v) => v.clone(),
        None => {
            let n = ctx.pairs(5)?;
            let s = ctx.seeds.child("y");
            (0..n as u64)
                .map(|i| -> Res<f64> {
                    match limit {
                        LimitMeasure::Conformal(c) => Ok(c.sample_point(&mut s.rng(i))?),
                        LimitMeasure::Markov(_) => {
                            let sys = ctx.system()?;
                            Ok(sys.target(&sys.sample_path(s, i)).point().expect("interval target"))
                        }
                    }
                })
                .collect::<Res<Vec<_>>>()?
        }
    };
    let lyap_samples = e.lyapunov_samples.unwrap_or(100_000);
    let lyap = gdms.lyapunov(limit, lyap_samples, ctx.seeds.child("lyapunov"))?;
    let exact_chi = gdms.exact_lyapunov(limit);
    let chi = exact_chi.unwrap_or(lyap.chi);
    let theory = alpha_theory(limit, chi);
    out.result("measure", "mu_first_cylinder", num(limit.mass(&Word::new(vec![0]))));
    out.result("lyapunov", "chi_hat", num(lyap.chi));
    out.result("lyapunov", "stderr", num(lyap.stderr));
    out.result("lyapunov", "samples", lyap.samples);
    out.result("lyapunov", "chi_exact", opt(exact_chi.map(num)));
    out.result("powerlaw", "alpha_theory", num(theory));

    let fits = ys
        .par_iter()
        .map(|&y| gdms.power_law_fit(limit, y, &radii))
        .collect::<Result<Vec<_>, Error>>()
        .map_err(|er| match er {
            Error::Invalid(m) => ctx.err("radii_count", m),
            other => RunError::Lib(other),
        })?;
    let mut pt = Table::new(
        "powerlaw.csv",
        &[
            ("y_id", "point index"),
            ("y", "centre"),
            ("alpha_fit", "least-squares slope of log mu(B(y, r)) against log r"),
            ("c", "fitted prefactor"),
            ("rms_residual", "rms residual of the log-log fit"),
            ("alpha_theory", "half the entropy over the Lyapunov exponent"),
        ],
    );
    let mut bt = Table::new("balls.csv", &[("y_id", "point index"), ("r", "radius"), ("mu_ball", "mu(B(y, r))")]);
    let mut floor_ok = true;
    for (i, (y, f)) in ys.iter().zip(&fits).enumerate() {
        floor_ok &= f.alpha_fit >= theory - 1e-9;
        pt.push(vec![i.to_string(), num(*y), num(f.alpha_fit), num(f.c), num(f.rms_residual), num(theory)]);
        for &(r, m) in &f.points {
            bt.push(vec![i.to_string(), num(r), num(m)]);
        }
    }
    out.tables.push(pt);
    out.tables.push(bt);
    let alphas: Vec<f64> = fits.iter().map(|f| f.alpha_fit).collect();
    let med = median(&alphas);
    out.result("powerlaw", "median_alpha_fit", num(med));
    out.check("above_floor", floor_ok, format!("every alpha_fit >= {theory:.5}"));
    if let Some(x) = e.expected {
        let tol = e.tolerance.unwrap_or(0.05);
        let rel = (med / x - 1.0).abs();
        out.check("expected_alpha", rel <= tol, format!("median {med:.5} vs {x}, relative error {rel:.4}, tolerance {tol}"));
    }
    Ok(())
}
