use std::f64::consts::SQRT_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use modesim::metrology::dominant_frequency;

fn modesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modesim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(cfg: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = modesim(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    fs::read_to_string(out.join("results.csv")).unwrap()
}

fn rows(csv: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = csv.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let body = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, body)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"))
}

#[test]
fn analytic_chsh_reaches_tsirelson_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.conf", "experiment = chsh\n[chsh]\ngrid_step = pi/46\n");
    let csv = run_ok(&cfg, &dir.path().join("out"), &["--analytic"]);
    let (h, body) = rows(&csv);
    assert_eq!(body.len(), 1);
    let b: f64 = body[0][column(&h, "b_abs")].parse().unwrap();
    assert!((b - 2.0 * SQRT_2).abs() < 1e-9, "{b}");
    assert_eq!(body[0][column(&h, "violates")], "true");
}

#[test]
fn nfield_fringe_frequency_equals_n() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "n.conf",
        "experiment = nfield\ntrials = 20000\nseed = 3\n[nfield]\nn_min = 1\nn_max = 6\npoints = 48\n",
    );
    let csv = run_ok(&cfg, &dir.path().join("out"), &[]);
    let (h, body) = rows(&csv);
    let (cn, cs) = (column(&h, "n"), column(&h, "s"));
    for n in 1..=6usize {
        let s: Vec<f64> = body
            .iter()
            .filter(|r| r[cn] == n.to_string())
            .map(|r| r[cs].parse().unwrap())
            .collect();
        assert_eq!(s.len(), 48);
        assert_eq!(dominant_frequency(&s).unwrap().frequency, n);
    }
}

#[test]
fn metrology_reports_both_limits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "m.conf",
        "experiment = metrology\ntrials = 5000\n[metrology]\nn_min = 1\nn_max = 5\n",
    );
    let csv = run_ok(&cfg, &dir.path().join("out"), &[]);
    let (h, body) = rows(&csv);
    assert_eq!(body.len(), 5);
    for r in &body {
        let n: f64 = r[column(&h, "n")].parse().unwrap();
        let get = |c: &str| r[column(&h, c)].parse::<f64>().unwrap();
        assert_eq!(get("delta_theta_sql"), 1.0 / n.sqrt());
        assert!((get("delta_theta_heisenberg") - 1.0 / n).abs() < 1e-12);
        assert!((get("delta_theta_quoted") - 1.0 / n).abs() < 1e-6);
        assert!(get("delta_theta_derived").is_finite());
    }
}

#[test]
fn overrides_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "g.conf", "experiment = ghz\ntrials = 100\nseed = 1\n[ghz]\npoints = 4\n");
    let out = dir.path().join("out");
    run_ok(&cfg, &out, &["--seed", "77", "--trials", "3000"]);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 77);
    assert_eq!(meta["trials"], 3000);
    assert_eq!(meta["config"]["seed"], "77");
    assert_eq!(meta["config"]["ghz"]["points"], "4");
    assert_eq!(meta["experiment"], "ghz");
    assert!(meta["version"].is_string());
    assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "d.conf", "experiment = density\ntrials = 30000\nseed = 8\n");
    let a = run_ok(&cfg, &dir.path().join("a"), &["--workers", "1"]);
    let b = run_ok(&cfg, &dir.path().join("b"), &["--workers", "3"]);
    assert_eq!(a, b);
}

#[test]
fn bpm_runs_write_field_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "b.conf", "experiment = bpm-fig1\n[bpm]\nnx = 256\nsnapshots = 4\n");
    let out = dir.path().join("out");
    let csv = run_ok(&cfg, &out, &[]);
    let (h, body) = rows(&csv);
    let last = body.last().unwrap();
    assert!(last[column(&h, "arm_a_purity")].parse::<f64>().unwrap() > 0.98);
    let field = fs::read_to_string(out.join("field.csv")).unwrap();
    let header = field.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 257);
    assert_eq!(field.lines().count(), body.len() + 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let bad = config(dir.path(), "bad.conf", "experiment = chsh\ncolour = blue\n");
    let o = modesim(&["run", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let narrow = config(
        dir.path(),
        "narrow.conf",
        "experiment = bpm-fig1\n[bpm]\ngap_min = 2e-6\ngap_max = 3e-6\nnx = 256\n",
    );
    let o = modesim(&["run", narrow.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));

    let ok = config(dir.path(), "ok.conf", "experiment = density\n");
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let under_file = blocker.join("sub");
    let o = modesim(&["run", ok.to_str().unwrap(), "--analytic", "--out", under_file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    let o = modesim(&["run", dir.path().join("missing.conf").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    let o = modesim(&["run", ok.to_str().unwrap(), "--analytic", "--mc"]);
    assert_eq!(o.status.code(), Some(2));
}
