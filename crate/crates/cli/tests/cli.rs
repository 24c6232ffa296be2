use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bifcurrents");

fn quadratic_slice(res: usize) -> String {
    format!(
        r#"
[family]
degree = 2

[run]
seed = 11

[slice]
coordinates = [0]
axes = [{{ re = [-3.0, 3.0], im = [-3.0, 3.0], resolution = {res} }}]
"#
    )
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("BIFCURRENTS_THREADS").output().unwrap()
}

fn run_in(cmd: &str, cfg: &Path, out: &Path) -> Output {
    let o = run(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn low_resolution_exits_two_and_cites_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &quadratic_slice(4));
    let o = run(&["green", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("slice.axes[0].resolution") && err.contains(">= 8"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn syntax_errors_and_unknown_fields_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[family\ndegree = 2\n");
    assert_eq!(run(&["green", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    let unknown = write(dir.path(), "u.toml", &(quadratic_slice(16) + "\n[pern]\nn = 2\nperiod = 3\n"));
    let o = run(&["pern", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pern"));
    let missing = run(&["green", "--config", dir.path().join("none.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(run(&["frobnicate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn dry_run_validates_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &(quadratic_slice(16) + "\n[pern]\nn = 3\n"));
    let out = dir.path().join("o");
    let o = run(&["pern", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--dry-run"]);
    assert!(o.status.success());
    assert!(!out.exists());
    // Missing section is a validation error even in a dry run.
    let bare = write(dir.path(), "b.toml", &quadratic_slice(16));
    assert_eq!(run(&["pern", "--config", bare.to_str().unwrap(), "--dry-run"]).status.code(), Some(2));
}

#[test]
fn thread_flag_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &quadratic_slice(16));
    let c = cfg.to_str().unwrap();
    let bad_env = Command::new(BIN).args(["green", "--config", c, "--dry-run"]).env("BIFCURRENTS_THREADS", "zero").output().unwrap();
    assert_eq!(bad_env.status.code(), Some(2));
    let ok_env = Command::new(BIN).args(["green", "--config", c, "--dry-run"]).env("BIFCURRENTS_THREADS", "1").output().unwrap();
    assert!(ok_env.status.success());
    assert_eq!(run(&["green", "--config", c, "--threads", "0", "--dry-run"]).status.code(), Some(2));
    let out = dir.path().join("o");
    let o = run(&["green", "--config", c, "--threads", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(read(&out.join("manifest.txt")).contains("threads = 1"));
}

#[test]
fn green_outputs_and_manifest_reproduce_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &(quadratic_slice(24) + "\n[green]\nquantity = \"lyapunov\"\n"));
    let first = dir.path().join("first");
    run_in("green", &cfg, &first);
    for f in ["manifest.txt", "green.bifg", "green.csv", "green.png"] {
        assert!(first.join(f).exists(), "{f}");
    }
    let manifest = read(&first.join("manifest.txt"));
    assert!(manifest.contains("[manifest]") && manifest.contains("subcommand = \"green\""));
    let second = dir.path().join("second");
    run_in("green", &first.join("manifest.txt"), &second);
    assert_eq!(read(&first.join("green.csv")), read(&second.join("green.csv")));
    assert_eq!(std::fs::read(first.join("green.bifg")).unwrap(), std::fs::read(second.join("green.bifg")).unwrap());
    // A manifest written for one subcommand is refused by another.
    let o = run(&["mass", "--config", first.join("manifest.txt").to_str().unwrap(), "--dry-run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mass_table_reports_unit_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &quadratic_slice(128));
    let out = dir.path().join("o");
    run_in("mass", &cfg, &out);
    let table = read(&out.join("mass.csv"));
    let row: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    let mass: f64 = row[1].parse().unwrap();
    assert!((mass - 1.0).abs() < 0.1, "{mass}");
}

#[test]
fn pern_writes_field_and_locus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &(quadratic_slice(32) + "\n[pern]\nn = 2\n"));
    let out = dir.path().join("o");
    run_in("pern", &cfg, &out);
    let locus = read(&out.join("pern_locus.csv"));
    assert_eq!(locus.lines().count(), 3, "{locus}");
    for line in locus.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[0].abs() < 1e-8 && (v[1].abs() - 2f64.sqrt()).abs() < 1e-8);
    }
    assert!(out.join("pern.bifg").exists());
}

#[test]
fn equidist_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &(quadratic_slice(32) + "\n[equidist]\nperiods = [3, 4, 5]\nws = [[0.0, 0.0], [0.0, 4.0]]\n"));
    let out = dir.path().join("o");
    let o = run_in("equidist", &cfg, &out);
    let csv = read(&out.join("equidist.csv"));
    assert_eq!(csv.lines().count(), 1 + 6);
    for line in csv.lines().skip(1) {
        let e: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(e > 0.0);
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("e_(n+2) < e_n"));
}

#[test]
fn connectivity_of_the_escape_region() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &quadratic_slice(64));
    let out = dir.path().join("o");
    run_in("connectivity", &cfg, &out);
    let csv = read(&out.join("connectivity.csv"));
    assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(2), Some("1"));
}

#[test]
fn decompose_cantor_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[family]\ndegree = 2\n[run]\nseed = 5\n[decompose]\nparameter = [[2.0, 0.0]]\ndyn_resolution = 256\nword_length = 5\nnum_words = 64\n";
    let cfg = write(dir.path(), "c.toml", body);
    let out = dir.path().join("o");
    let o = run_in("decompose", &cfg, &out);
    assert!(String::from_utf8_lossy(&o.stdout).contains("ell = 2, q = 0, degrees [1, 1]"));
    for f in ["decompose.csv", "decompose.png", "cloud.csv", "decompose_check.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let inside = write(dir.path(), "k.toml", &body.replace("[[2.0, 0.0]]", "[[0.0, 0.0]]"));
    assert_eq!(run(&["decompose", "--config", inside.to_str().unwrap(), "--dry-run"]).status.code(), Some(2));
}

#[test]
fn monge_ampere_on_a_cubic_slice() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
[family]
degree = 3

[slice]
coordinates = [0, 1]
axes = [{ re = [-2.0, 2.0], im = [-2.0, 2.0], resolution = 10 }, { re = [-2.0, 2.0], im = [-2.0, 2.0], resolution = 10 }]

[ma]
mollify_cells = 1.0
"#;
    let cfg = write(dir.path(), "c.toml", body);
    let out = dir.path().join("o");
    run_in("ma", &cfg, &out);
    let table = read(&out.join("ma.csv"));
    assert!(table.contains("ma_G,") && table.contains("wedge_0_1,") && table.contains("boundary_fraction,"));
    // A one-dimensional slice is refused.
    let flat = write(dir.path(), "f.toml", &quadratic_slice(16).replace("degree = 2", "degree = 3"));
    assert_eq!(run(&["ma", "--config", flat.to_str().unwrap(), "--dry-run"]).status.code(), Some(2));
}
