//! Built-in systems and measures.

use std::sync::Arc;

use hitstat::expanding::ExpandingMap;
use hitstat::gdms::{Gdms, LimitMeasure};
use hitstat::symbolic::IncidenceMatrix;
use hitstat::system::MeasuredSystem;
use hitstat::thermo::{ConformalOperator, GibbsState, Potential};

use crate::config::{ConfigError, LoadedConfig};

pub const SYSTEMS: &[(&str, &str)] = &[
    ("full-shift2", "full shift on 2 symbols with d_alpha; params: alpha (default 1)"),
    ("full-shift", "full shift; params: alphabet, alpha"),
    ("golden-mean", "golden-mean shift (no 2 after 2); params: alpha"),
    ("shift", "subshift of finite type; params: matrix_file, alpha"),
    ("doubling", "x -> 2x mod 1 on [0,1); params: circle"),
    ("ternary", "x -> 3x mod 1 on [0,1)"),
    ("golden-markov", "piecewise-linear Markov map with golden-mean coding"),
    ("cantor3", "GDMS x/3, x/3 + 2/3 on [0,1]; limit set is the middle-thirds Cantor set"),
    ("dyadic2", "GDMS x/2, x/2 + 1/2 on [0,1]; limit set [0,1]"),
    ("gauss-cf", "continued-fraction GDMS 1/(n+x), truncated; params: truncation (default 10000)"),
];

pub const MEASURES: &[(&str, &str)] = &[
    ("zero", "f = 0 (measure of maximal entropy)"),
    ("bernoulli", "f = log p_i on the first symbol; params: p = [p_1, ..., p_n]"),
    ("markov_depth1", "f = log P_ab on the first two symbols; params: table = [[...], ...]"),
    ("gauss_t", "f = -2t log(n + x) on gauss-cf; params: t (> 1/2); sampling needs t = 1"),
];

pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("pressure", "pressure by Perron root and truncated partition sums; params: depth, tolerance"),
    ("gibbs-audit", "Gibbs-ratio audit, exact cylinder masses and mixing fit; params: depth, probe_depth, max_gap"),
    ("records", "closest-approach records and divergence trend over pairs; sampling: pairs, horizons; params: diagonal, liminf_threshold"),
    ("entry", "entry statistic tables; sampling: pairs, horizons (last); params: radii | cylinder_depth | dyadic_depth"),
    ("rates", "hitting-rate and pointwise-dimension slopes; as entry plus expected, tolerance"),
    ("waiting-tail", "a_r(k), q_r(k) against k mu(R_r); params: target_word | y, r, k_grid, closed_form; sampling: samples"),
    ("certificate", "staged divergence certificate on a shift; params: m, delta, probe_depth, max_gap, target_word; sampling: samples"),
    ("kac", "mean first return against 1/mu(X); params: cells | intervals, horizon, tolerance, max_return; sampling: samples"),
    ("induce-compare", "base vs induced entry statistics; params: cells | intervals, y | target_word, horizon, max_radius, tolerance, pass_fraction, max_return; sampling: pairs"),
    ("gdms-powerlaw", "ball-measure power law and Lyapunov exponent on a GDMS; params: y_points, r_min, r_max, radii_count, expected, tolerance, lyapunov_samples; sampling: pairs"),
];

pub fn list_builtins() -> String {
    let mut out = String::new();
    for (title, items) in [("systems", SYSTEMS), ("measures", MEASURES), ("experiments", EXPERIMENTS)] {
        out.push_str(title);
        out.push_str(":\n");
        for (name, doc) in items {
            out.push_str(&format!("  {name:<15} {doc}\n"));
        }
    }
    out
}

/// Everything an experiment may need about the configured system.
pub struct Built {
    pub name: String,
    pub matrix: IncidenceMatrix,
    pub potential: Potential,
    /// Orbit-level system (symbolic Gibbs state on a shift or interval coding).
    pub system: Option<MeasuredSystem>,
    pub gdms: Option<Gdms>,
    pub limit: Option<LimitMeasure>,
    pub map: Option<ExpandingMap>,
}

enum Kind {
    Shift,
    Map,
    Gdms,
}

pub fn build(cfg: &LoadedConfig) -> Result<Built, ConfigError> {
    let sys = &cfg.config.system;
    let name = sys.name.as_str();
    let at = |key: &str, e: &dyn std::fmt::Display| cfg.error_at(key, e.to_string());
    let (kind, matrix, map, gdms) = match name {
        "full-shift2" => (Kind::Shift, IncidenceMatrix::full(2), None, None),
        "full-shift" => {
            let n = sys.alphabet.ok_or_else(|| cfg.error_at("name", "full-shift needs `alphabet`"))?;
            if !(1..=64).contains(&n) {
                return Err(cfg.error_at("alphabet", "alphabet must be in 1..=64"));
            }
            (Kind::Shift, IncidenceMatrix::full(n), None, None)
        }
        "golden-mean" => (Kind::Shift, IncidenceMatrix::golden_mean(), None, None),
        "shift" => {
            let file = sys.matrix_file.as_ref().ok_or_else(|| cfg.error_at("name", "shift needs `matrix_file`"))?;
            let path = cfg.resolve(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| cfg.error_at("matrix_file", format!("cannot read {}: {e}", path.display())))?;
            let m = IncidenceMatrix::from_text(&text).map_err(|e| at("matrix_file", &e))?;
            (Kind::Shift, m, None, None)
        }
        "doubling" | "ternary" | "golden-markov" => {
            let map = ExpandingMap::by_name(name).map_err(|e| at("name", &e))?;
            let m = map.coding().map_err(|e| at("name", &e))?.matrix.clone();
            (Kind::Map, m, Some(map), None)
        }
        "cantor3" | "dyadic2" | "gauss-cf" => {
            let g = Gdms::by_name(name, sys.truncation.unwrap_or(10_000)).map_err(|e| at("truncation", &e))?;
            let m = g.coding.matrix.clone();
            (Kind::Gdms, m, None, Some(g))
        }
        other => return Err(cfg.error_at("name", format!("unknown system '{other}' (see --list)"))),
    };
    if sys.alpha.is_some() && !matches!(kind, Kind::Shift) {
        return Err(cfg.error_at("alpha", "alpha applies to shifts only"));
    }
    if name == "gauss-cf" && cfg.config.measure.potential != "gauss_t" {
        return Err(cfg.error_at("potential", "gauss-cf takes the gauss_t potential only"));
    }
    let potential = potential(cfg, &matrix)?;
    let gibbs = match &potential {
        Potential::Local(_) => Some(Arc::new(GibbsState::new(&potential, &matrix).map_err(|e| at("potential", &e))?)),
        Potential::GaussT { .. } => None,
    };
    let system = match (&kind, &gibbs) {
        (Kind::Shift, Some(g)) => {
            Some(MeasuredSystem::shift(name, g.clone(), sys.alpha.unwrap_or(1.0)).map_err(|e| at("alpha", &e))?)
        }
        (Kind::Map, Some(g)) => {
            let coding = map.as_ref().expect("map kind").coding().map_err(|e| at("name", &e))?.clone();
            let s = MeasuredSystem::interval(name, g.clone(), coding).map_err(|e| at("name", &e))?;
            Some(s.with_circle(sys.circle.unwrap_or(false)).map_err(|e| at("circle", &e))?)
        }
        (Kind::Gdms, Some(g)) => {
            let coding = gdms.as_ref().expect("gdms kind").coding.clone();
            Some(MeasuredSystem::interval(name, g.clone(), coding).map_err(|e| at("name", &e))?)
        }
        _ => None,
    };
    if sys.circle.is_some() && !matches!(kind, Kind::Map) {
        return Err(cfg.error_at("circle", "circle applies to interval maps only"));
    }
    let limit = match (&gdms, &potential, &gibbs) {
        (Some(_), Potential::GaussT { t }, _) => {
            let op = ConformalOperator::gauss(*t, matrix.size()).map_err(|e| at("t", &e))?;
            Some(LimitMeasure::Conformal(Arc::new(op.solve().map_err(|e| at("t", &e))?)))
        }
        (Some(_), _, Some(g)) => Some(LimitMeasure::Markov(g.clone())),
        _ => None,
    };
    Ok(Built { name: name.to_string(), matrix, potential, system, gdms, limit, map })
}

fn potential(cfg: &LoadedConfig, matrix: &IncidenceMatrix) -> Result<Potential, ConfigError> {
    let m = &cfg.config.measure;
    let n = matrix.size();
    let at = |key: &str, e: hitstat::Error| cfg.error_at(key, e.to_string());
    match m.potential.as_str() {
        "zero" => Ok(Potential::zero(n)),
        "bernoulli" => {
            let p = m.p.as_ref().ok_or_else(|| cfg.error_at("potential", "bernoulli needs `p`"))?;
            if p.len() != n {
                return Err(cfg.error_at("p", format!("expected {n} weights, got {}", p.len())));
            }
            if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(cfg.error_at("p", "bernoulli weights must sum to 1"));
            }
            Potential::bernoulli(p).map_err(|e| at("p", e))
        }
        "markov_depth1" => {
            let t = m.table.as_ref().ok_or_else(|| cfg.error_at("potential", "markov_depth1 needs `table`"))?;
            if t.len() != n {
                return Err(cfg.error_at("table", format!("expected a {n}x{n} table")));
            }
            Potential::markov_depth1(t).map_err(|e| at("table", e))
        }
        "gauss_t" => {
            if cfg.config.system.name != "gauss-cf" {
                return Err(cfg.error_at("potential", "gauss_t applies to gauss-cf only"));
            }
            Potential::gauss_t(m.t.unwrap_or(1.0)).map_err(|e| at("t", e))
        }
        other => Err(cfg.error_at("potential", format!("unknown potential '{other}' (see --list)"))),
    }
}
