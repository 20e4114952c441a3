//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use hitstat::expanding::ExpandingMap;
use hitstat::thermo::{GibbsState, Potential};
use hitstat_cli::config::LoadedConfig;
use hitstat_cli::report::Outcome;
use hitstat_cli::{run, RunOptions};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Run {
    outcome: Outcome,
    dir: PathBuf,
}

fn run_config(cfg: &LoadedConfig, kind: &str, out: &Path, workers: usize) -> Run {
    let opts = RunOptions { seed: None, out: Some(out.to_path_buf()), workers };
    let s = run(kind, cfg, &opts).unwrap_or_else(|e| panic!("{kind}: {e}"));
    Run { outcome: s.outcome, dir: s.dir }
}

fn run_file(file: &str, tmp: &Path) -> Run {
    let cfg = LoadedConfig::load(&configs().join(file)).expect("shipped config");
    let kind = cfg.config.experiment.kind.clone().expect("config names its experiment");
    run_config(&cfg, &kind, &tmp.join(file), 1)
}

fn value(o: &Outcome, key: &str) -> f64 {
    let v = o.results.iter().find(|(_, k, _)| k == key).unwrap_or_else(|| panic!("no result {key}"));
    v.2.parse().unwrap_or_else(|_| panic!("{key} = {} is not a number", v.2))
}

fn check(o: &Outcome, name: &str) -> (bool, String) {
    let c = o.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("no check {name}"));
    (c.pass, c.detail.clone())
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn crit_pressure(tmp: &Path) -> Verdict {
    let full = run_file("pressure-full-shift.toml", tmp);
    let golden = run_file("pressure-golden-mean.toml", tmp);
    let p2 = value(&full.outcome, "spectral");
    let tr = value(&full.outcome, "truncated");
    let pg = value(&golden.outcome, "spectral");
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let e = [(p2 - 2f64.ln()).abs(), (tr - 2f64.ln()).abs(), (pg - phi.ln()).abs()];
    Verdict {
        pass: e[0] <= 1e-12 && e[1] <= 1e-9 && e[2] <= 1e-10 && (pg - 0.4812118251).abs() <= 1e-10,
        detail: format!("ln2 spectral err {:.1e}, truncated err {:.1e}, golden P = {pg:.10}", e[0], e[1]),
    }
}

fn crit_gibbs(tmp: &Path) -> Verdict {
    let r = run_file("gibbs-bernoulli.toml", tmp);
    let names = ["bernoulli_products", "gibbs_ratio_within_q", "additivity", "normalization"];
    let failed: Vec<&str> = names.iter().copied().filter(|n| !check(&r.outcome, n).0).collect();
    Verdict {
        pass: failed.is_empty(),
        detail: format!("{}; Q = {}", check(&r.outcome, "bernoulli_products").1, value(&r.outcome, "q")),
    }
}

fn crit_gauss(tmp: &Path) -> Verdict {
    let r = run_file("powerlaw-gauss.toml", tmp);
    let mu1 = value(&r.outcome, "mu_first_cylinder");
    let chi = value(&r.outcome, "chi_hat");
    let samples = value(&r.outcome, "samples");
    let chi_true = std::f64::consts::PI.powi(2) / (6.0 * 2f64.ln());
    let mu_true = (4.0f64 / 3.0).log2();
    let rel = (chi / chi_true - 1.0).abs();
    Verdict {
        pass: (mu1 - mu_true).abs() <= 1e-3 && rel <= 0.01 && samples >= 1e6,
        detail: format!("mu[1] = {mu1:.6} (target {mu_true:.6}), chi = {chi:.5} ({:.3}% off)", 100.0 * rel),
    }
}

fn crit_kac(tmp: &Path) -> Verdict {
    let half = run_file("kac-half.toml", tmp);
    let quarter = run_file("kac-quarter.toml", tmp);
    let (m2, m4) = (value(&half.outcome, "mean"), value(&quarter.outcome, "mean"));
    Verdict {
        pass: (m2 - 2.0).abs() <= 0.01 && (m4 - 4.0).abs() <= 0.02,
        detail: format!("mean return {m2:.5} on [0,1/2), {m4:.5} on [0,1/4), 1e6 samples each"),
    }
}

fn crit_equality_at_scale(tmp: &Path) -> Verdict {
    let r = run_file("induce-compare.toml", tmp);
    let (pass, detail) = check(&r.outcome, "equality_at_scale");
    let (id, _) = check(&r.outcome, "return_sum_identity");
    Verdict { pass: pass && id, detail }
}

fn crit_markov_cover(_: &Path) -> Verdict {
    let mut ball_in = 0;
    let mut cover_in = 0;
    let mut total = 0;
    let mut monotone = 0;
    let mut grids = 0;
    for (name, potential) in [("doubling", Potential::zero(2)), ("golden-markov", Potential::zero(2))] {
        let map = ExpandingMap::by_name(name).expect("built-in map");
        let coding = map.coding().expect("coding");
        let g = GibbsState::new(&potential, &coding.matrix).expect("gibbs state");
        for i in 0..100 {
            let y = (i as f64 + 0.5) / 100.0;
            let mut prev = f64::INFINITY;
            let mut dec = true;
            for k in 3..=20 {
                let r = 0.5f64.powi(k);
                let c = coding.markov_cover(&g, y, r).expect("cover");
                total += 1;
                ball_in += c.ball_inside as usize;
                cover_in += c.cover_inside as usize;
                let v = c.order as f64 * c.mu_ball;
                if k >= 8 {
                    dec &= v < prev;
                    prev = v;
                }
            }
            grids += 1;
            monotone += dec as usize;
        }
    }
    Verdict {
        pass: ball_in == total && cover_in == total && monotone == grids,
        detail: format!(
            "B in R {ball_in}/{total}, R in B(y, r + r^2) {cover_in}/{total}, ord mu(B) decreasing for {monotone}/{grids} points (doubling, golden-markov)"
        ),
    }
}

fn crit_waiting_tail(tmp: &Path) -> Verdict {
    let r = run_file("waiting-tail.toml", tmp);
    let (b, _) = check(&r.outcome, "q_within_bound");
    let (c, detail) = check(&r.outcome, "closed_form");
    let mu = value(&r.outcome, "mu_cover");
    Verdict { pass: b && c && mu == 1.0 / 32.0, detail: format!("q bound {b}; {detail}; mu(R) = {mu}") }
}

fn crit_power_law(tmp: &Path) -> Verdict {
    let cantor = run_file("powerlaw-cantor.toml", tmp);
    let dyadic = run_file("powerlaw-dyadic.toml", tmp);
    let ok = |o: &Outcome| check(o, "expected_alpha").0 && check(o, "above_floor").0;
    Verdict {
        pass: ok(&cantor.outcome) && ok(&dyadic.outcome),
        detail: format!(
            "cantor median alpha {:.5} (floor {:.5}), dyadic {:.5}",
            value(&cantor.outcome, "median_alpha_fit"),
            value(&cantor.outcome, "alpha_theory"),
            value(&dyadic.outcome, "median_alpha_fit")
        ),
    }
}

fn crit_divergence(tmp: &Path) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for file in ["records-shift.toml", "records-doubling.toml"] {
        let r = run_file(file, tmp);
        for name in ["running_max_nondecreasing", "median_running_max_increases", "deep_min_small"] {
            pass &= check(&r.outcome, name).0;
        }
        parts.push(format!(
            "{}: medians {:.3} -> {:.3}, deep min {:.3}",
            file.trim_end_matches(".toml"),
            value(&r.outcome, "running_max_h10000"),
            value(&r.outcome, "running_max_h10000000"),
            value(&r.outcome, "deep_min_h10000000")
        ));
    }
    Verdict { pass, detail: parts.join("; ") }
}

fn crit_certificate(tmp: &Path) -> Verdict {
    let r = run_file("certificate.toml", tmp);
    let o = &r.outcome;
    let omega = value(o, "Omega");
    Verdict {
        pass: o.passed() && omega <= 1000.0 && value(o, "samples") >= 1e5 && value(o, "delta") == 0.2,
        detail: format!("Omega = {omega}, {}", check(o, "bad_set_within_delta").1),
    }
}

const SMALL: &[(&str, &str)] = &[
    ("entry", "[system]\nname = \"doubling\"\n[experiment]\ndyadic_depth = 16\n[sampling]\nseed = 11\npairs = 6\nhorizons = [200000]\n"),
    ("records", "[system]\nname = \"full-shift2\"\n[sampling]\nseed = 12\npairs = 12\nhorizons = [1000, 100000]\n"),
    ("kac", "[system]\nname = \"golden-mean\"\n[experiment]\ncells = [\"1\"]\n[sampling]\nseed = 13\nsamples = 20000\n"),
    ("waiting-tail", "[system]\nname = \"doubling\"\n[experiment]\ny = 0.3\nr = 0.01\n[sampling]\nseed = 14\nsamples = 20000\n"),
    ("induce-compare", "[system]\nname = \"doubling\"\n[experiment]\ny = 0.25\nhorizon = 100000\n[sampling]\nseed = 15\npairs = 10\n"),
    ("certificate", "[system]\nname = \"golden-mean\"\n[sampling]\nseed = 16\nsamples = 20000\n"),
    ("gdms-powerlaw", "[system]\nname = \"cantor3\"\n[experiment]\nlyapunov_samples = 20000\n[sampling]\nseed = 17\npairs = 4\n"),
];

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("artifact dir")
        .map(|e| {
            let p = e.expect("entry").path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).expect("artifact"))
        })
        .collect();
    v.sort();
    v
}

fn crit_determinism(tmp: &Path) -> Verdict {
    let mut same = 0;
    let mut compared = 0;
    let mut diffs = Vec::new();
    for (kind, text) in SMALL {
        let cfg = LoadedConfig::parse(text, None).expect("inline config");
        let a = run_config(&cfg, kind, &tmp.join(format!("det-{kind}-1")), 1);
        let b = run_config(&cfg, kind, &tmp.join(format!("det-{kind}-4")), 4);
        let c = run_config(&cfg, kind, &tmp.join(format!("det-{kind}-4b")), 4);
        let (fa, fb, fc) = (files(&a.dir), files(&b.dir), files(&c.dir));
        compared += fa.iter().filter(|f| f.0.ends_with(".csv")).count();
        if fa == fb && fb == fc && fa.iter().any(|f| f.0.ends_with(".csv")) {
            same += fa.iter().filter(|f| f.0.ends_with(".csv")).count();
        } else {
            diffs.push(*kind);
        }
    }
    Verdict {
        pass: diffs.is_empty(),
        detail: format!("{same}/{compared} CSVs byte-identical over 1, 4, 4 workers across {} experiments{}", SMALL.len(),
            if diffs.is_empty() { String::new() } else { format!("; differing: {}", diffs.join(", ")) }),
    }
}

type Criterion = (u32, &'static str, f64, fn(&Path) -> Verdict);

const CRITERIA: &[Criterion] = &[
    (1, "pressure exactness", 1.0, crit_pressure),
    (2, "Gibbs exactness and audit", 10.0, crit_gibbs),
    (3, "Gauss system measure and Lyapunov exponent", 120.0, crit_gauss),
    (4, "Kac identity", 60.0, crit_kac),
    (5, "base vs induced entry statistic at desk scale", 120.0, crit_equality_at_scale),
    (6, "Markov cover", 30.0, crit_markov_cover),
    (7, "waiting-tail bound", 60.0, crit_waiting_tail),
    (8, "power law", 60.0, crit_power_law),
    (9, "divergence trend", 600.0, crit_divergence),
    (10, "certificate", 600.0, crit_certificate),
    (11, "determinism across worker counts", f64::INFINITY, crit_determinism),
];

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = Vec::new();
    for &(id, title, limit, f) in CRITERIA {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let v = f(tmp.path());
        let secs = start.elapsed().as_secs_f64();
        let pass = v.pass && secs < limit;
        let budget = if limit.is_finite() { format!(", limit {limit} s") } else { String::new() };
        println!("criterion {id:>2} {title}: {} ({}; {secs:.2} s{budget})", if pass { "PASS" } else { "FAIL" }, v.detail);
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria PASS");
    } else {
        println!("acceptance: FAIL for criteria {failed:?}");
        std::process::exit(1);
    }
}
