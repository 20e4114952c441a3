use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hitstat(args: &[&str], env: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hitstat"));
    c.args(args).env_remove("HITSTAT_WORKERS");
    if let Some(v) = env {
        c.env("HITSTAT_WORKERS", v);
    }
    c.output().expect("run hitstat")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const KAC: &str = "[system]\nname = \"doubling\"\n\n[experiment]\nintervals = [[0.0, 0.5]]\n\n[sampling]\nseed = 3\nsamples = 20000\n";

#[test]
fn list_names_builtins() {
    let o = hitstat(&["--list"], None);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    for name in ["doubling", "cantor3", "gauss-cf", "golden-mean", "bernoulli", "waiting-tail", "gdms-powerlaw"] {
        assert!(s.contains(name), "missing {name}");
    }
}

#[test]
fn golden_mean_pressure_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", "[system]\nname = \"golden-mean\"\n[sampling]\nseed = 1\n");
    let out = dir.path().join("out");
    let o = hitstat(&["pressure", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("spectral: 0.48121182505960"), "{report}");
    assert!(report.contains("verdict: PASS"));
    assert!(out.join("pressure.csv").exists());
}

#[test]
fn kac_mean_near_two_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.toml", KAC);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = hitstat(&["kac", "--config", &cfg, "--out", a.to_str().unwrap(), "--workers", "1"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    hitstat(&["kac", "--config", &cfg, "--out", b.to_str().unwrap(), "--workers", "3"], None);
    let mean: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("mean: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((mean - 2.0).abs() < 0.05, "{mean}");
    for f in ["kac.csv", "spectrum.csv", "report.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.toml", KAC);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    hitstat(&["kac", "--config", &cfg, "--out", a.to_str().unwrap()], None);
    hitstat(&["kac", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "99"], None);
    assert_ne!(fs::read(a.join("kac.csv")).unwrap(), fs::read(b.join("kac.csv")).unwrap());
    assert!(fs::read_to_string(b.join("report.txt")).unwrap().contains("seed: 99"));
}

#[test]
fn config_errors_exit_3_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cases = [
        ("unknown.toml", "[system]\nname = \"doubling\"\ncolour = 1\n[sampling]\nseed = 1\n", ":3:"),
        ("noseed.toml", "[system]\nname = \"doubling\"\n[sampling]\npairs = 2\n", "seed"),
        ("badp.toml", "[system]\nname = \"full-shift2\"\n[measure]\npotential = \"bernoulli\"\np = [0.2, 0.3, 0.5]\n[sampling]\nseed = 1\n", ":5:"),
        ("badsys.toml", "[system]\nname = \"tent\"\n[sampling]\nseed = 1\n", ":2:"),
        ("kind.toml", "[system]\nname = \"doubling\"\n[experiment]\nkind = \"records\"\n[sampling]\nseed = 1\n", ":4:"),
    ];
    for (file, text, needle) in cases {
        let cfg = write_config(dir.path(), file, text);
        let o = hitstat(&["kac", "--config", &cfg, "--out", out], None);
        assert_eq!(o.status.code(), Some(3), "{file}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{file}: {}", stderr(&o));
        assert!(stderr(&o).contains(file), "{file}: {}", stderr(&o));
    }
    let o = hitstat(&["nonsense", "--config", "x.toml"], None);
    assert_eq!(o.status.code(), Some(3));
    let o = hitstat(&["kac", "--bogus"], None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn failed_invariant_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.toml",
        "[system]\nname = \"full-shift2\"\n[experiment]\nexpected = 1.0\ntolerance = 1e-6\n[sampling]\nseed = 1\n",
    );
    let o = hitstat(&["pressure", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("expected_value: FAIL"));
}

#[test]
fn budget_exhaustion_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "w.toml",
        "[system]\nname = \"doubling\"\n[experiment]\ny = 0.3\nr = 0.01\n[sampling]\nseed = 1\nsamples = 200000000\n",
    );
    let out = dir.path().join("o");
    let o = hitstat(&["waiting-tail", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("status: partial"), "{report}");
    assert!(report.contains("within_budget: FAIL"));
}

#[test]
fn worker_env_is_read_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.toml", KAC);
    let out = dir.path().join("o");
    let o = hitstat(&["kac", "--config", &cfg, "--out", out.to_str().unwrap()], Some("lots"));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("HITSTAT_WORKERS"));
    let o = hitstat(&["kac", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"], Some("lots"));
    assert_eq!(o.status.code(), Some(0));
    let o = hitstat(&["kac", "--config", &cfg, "--out", out.to_str().unwrap()], Some("2"));
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn every_csv_column_is_documented() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.toml",
        "[system]\nname = \"doubling\"\n[experiment]\ndyadic_depth = 16\n[sampling]\nseed = 2\npairs = 3\nhorizons = [100000]\n",
    );
    let out = dir.path().join("o");
    let o = hitstat(&["rates", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(2));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    let mut csvs = 0;
    for entry in fs::read_dir(&out).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "csv") {
            csvs += 1;
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            assert!(report.contains(&format!("#   {name}")), "{name}");
            let header = fs::read_to_string(&p).unwrap().lines().next().unwrap().to_string();
            for col in header.split(',') {
                assert!(report.contains(&format!("#     {col}: ")), "{name}: {col}");
            }
        }
    }
    assert_eq!(csvs, 3);
}

#[test]
fn entry_csv_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.toml",
        "[system]\nname = \"full-shift2\"\n[experiment]\ncylinder_depth = 12\n[sampling]\nseed = 5\npairs = 2\nhorizons = [50000]\n",
    );
    let out = dir.path().join("o");
    hitstat(&["entry", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    let entry = fs::read_to_string(out.join("entry.csv")).unwrap();
    assert!(entry.starts_with("pair_id,r,tau,mu_ball,E_r,running_max\n"));
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert!(records.starts_with("pair_id,k,n_k,r_k\n"));
    // First record is the trivial n_1 = 1.
    assert_eq!(records.lines().nth(1).unwrap().split(',').nth(2), Some("1"));
}
