use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use snls::cli_io::{read_checkpoint, write_checkpoint};
use snls::spectral::{ComplexField, Grid};
use snls::Complex64;

fn snls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snls"))
        .args(args)
        .env_remove("SNLS_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

fn run_ok(experiment: &str, cfg: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![experiment, "--config", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = snls(&args);
    assert!(o.status.success(), "{experiment} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const EVOLVE: &str = "
[grid]
n_points = 256
length = 40.0

[solver]
t_final = 0.5
dt = 0.005
record_stride = 0.1
save_snapshots = true
";

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EVOLVE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("evolve", &cfg, &a, &["--threads", "1"]);
    run_ok("evolve", &cfg, &b, &["--threads", "3"]);
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(ta.iter().any(|(n, _)| n == "series.csv"));
    assert!(ta.iter().any(|(n, _)| n == "snapshot_00005.snls"));
    assert_eq!(ta, tb);
}

#[test]
fn profiles_noise_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let body = "seed = 11\n[grid]\nn_points = 256\nlength = 40.0\n[potential]\nfamily = \"flat\"\n[profiles]\nfixture = \"noise\"\ncount = 5\ntime_window = 1.0\n";
    let cfg = write_config(dir.path(), body);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("profiles", &cfg, &a, &["--threads", "2"]);
    run_ok("profiles", &cfg, &b, &["--threads", "4"]);
    assert_eq!(tree(&a), tree(&b));
    assert_eq!(summary(&a)["n_profiles"], 0);
}

#[test]
fn float_text_has_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EVOLVE);
    let out = dir.path().join("o");
    run_ok("evolve", &cfg, &out, &[]);
    let csv = fs::read_to_string(out.join("series.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    for cell in row.split(',') {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
    }
}

#[test]
fn zero_datum_gives_zero_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{EVOLVE}\n[initial]\nshape = \"zero\"\n"));
    let out = dir.path().join("o");
    run_ok("evolve", &cfg, &out, &[]);
    let csv = fs::read_to_string(out.join("series.csv")).unwrap();
    for line in csv.lines().skip(1) {
        for cell in line.split(',').skip(1) {
            assert_eq!(cell.parse::<f64>().unwrap(), 0.0, "{line}");
        }
    }
}

#[test]
fn check_potential_reports_all_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn_points = 1024\nlength = 80.0\n[potential]\nh = 2.0\nw = 1.0\n");
    let out = dir.path().join("o");
    run_ok("check_potential", &cfg, &out, &[]);
    let s = summary(&out);
    assert_eq!(s["all_ok"], true);
    for flag in ["nonnegative", "bounded", "left_limit_ok", "right_limit_ok", "decay_rate_ok", "repulsive", "gradient_vanishes"] {
        assert_eq!(s["report"][flag], true, "{flag}");
    }
}

#[test]
fn linear_channels_with_unit_potential() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[grid]\nn_points = 256\nlength = 40.0\n[potential]\nfamily = \"flat\"\na_minus = 1.0\na_plus = 1.0\n[channels]\nn = 2\n";
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("o");
    run_ok("linear-channels", &cfg, &out, &[]);
    let s = summary(&out);
    assert!(s["eta_norm"].as_f64().unwrap() < 1e-12);
    let (g, p) = (s["gamma_norm"].as_f64().unwrap(), s["psi_norm"].as_f64().unwrap());
    assert!((g - p).abs() < 1e-12);
    assert!(out.join("gamma.snls").is_file());
}

#[test]
fn checkpoint_feeds_back_as_initial_datum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EVOLVE);
    let first = dir.path().join("first");
    run_ok("evolve", &cfg, &first, &[]);
    let ck = read_checkpoint(&first.join("final.snls")).unwrap();
    assert_eq!(ck.time, 0.5);

    // write -> read -> write is byte-stable
    let copy = dir.path().join("copy.snls");
    write_checkpoint(&copy, &ck.field, ck.time).unwrap();
    assert_eq!(fs::read(&copy).unwrap(), fs::read(first.join("final.snls")).unwrap());

    let body = format!("{EVOLVE}\n[initial]\nshape = \"checkpoint\"\npath = \"copy.snls\"\n");
    let cfg2 = write_config(dir.path(), &body);
    let second = dir.path().join("second");
    run_ok("evolve", &cfg2, &second, &[]);
    let m0 = summary(&first)["mass_final"].as_f64().unwrap();
    let m1 = summary(&second)["mass_initial"].as_f64().unwrap();
    assert_eq!(m0, m1);
}

#[test]
fn checkpoint_on_other_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new(128, 40.0).unwrap();
    let f = ComplexField::from_fn(&g, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
    write_checkpoint(&dir.path().join("u0.snls"), &f, 0.0).unwrap();
    let body = format!("{EVOLVE}\n[initial]\nshape = \"checkpoint\"\npath = \"u0.snls\"\n");
    let cfg = write_config(dir.path(), &body);
    let o = snls(&["evolve", "--config", cfg.to_str().unwrap(), "--output-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "[grid]\nn_points = 64\n",
        "[grid]\nn_points = 64\nlength = 10.0\n[solver]\nbogus = 1\n",
        "[grid]\nn_points = 64\nlength = 10.0\n",
        "[grid]\nn_points = 64\nlength = 10.0\n[potential]\nfamily = \"custom_samples\"\ncsv = \"missing.csv\"\n[solver]\nt_final = 1.0\n",
        "experiment = \"decay\"\n[grid]\nn_points = 64\nlength = 10.0\n[solver]\nt_final = 1.0\n",
    ];
    for body in cases {
        let cfg = write_config(dir.path(), body);
        let o = snls(&["evolve", "--config", cfg.to_str().unwrap(), "--output-dir", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
        assert_eq!(err["exit_code"], 2);
        assert!(err["message"].as_str().unwrap().len() > 5);
    }
    let o = snls(&["evolve", "--config", "/definitely/not/here.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn instability_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[grid]\nn_points = 64\nlength = 20.0\n[initial]\namplitude = 1e200\n[solver]\nt_final = 0.1\ndt = 0.01\n";
    let cfg = write_config(dir.path(), body);
    let o = snls(&["evolve", "--config", cfg.to_str().unwrap(), "--output-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "instability");
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn_points = 64\nlength = 20.0\n");
    let o = snls(&["check-potential", "--config", cfg.to_str().unwrap(), "--output-dir", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn threads_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn_points = 64\nlength = 20.0\n");
    let o = Command::new(env!("CARGO_BIN_EXE_snls"))
        .args(["check-potential", "--config", cfg.to_str().unwrap(), "--output-dir", dir.path().join("o").to_str().unwrap()])
        .env("SNLS_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_snls"))
        .args(["check-potential", "--config", cfg.to_str().unwrap(), "--output-dir", dir.path().join("o").to_str().unwrap()])
        .env("SNLS_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{EVOLVE}\n[sweep]\nexperiment = \"evolve\"\nparameter = \"solver.dt\"\nvalues = [0.01, 0.005, 0.0025]\n"
    );
    let cfg = write_config(dir.path(), &body);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("sweep", &cfg, &a, &["--threads", "3"]);
    run_ok("sweep", &cfg, &b, &["--threads", "1"]);
    assert_eq!(tree(&a), tree(&b));
    let s = summary(&a);
    assert_eq!(s["n_failed"], 0);
    let drifts: Vec<f64> = (0..3)
        .map(|k| summary(&a.join(format!("run_{k:03}")))["max_relative_energy_drift"].as_f64().unwrap())
        .collect();
    assert!(drifts[1] < drifts[0] && drifts[2] < drifts[1], "{drifts:?}");
    assert_eq!(summary(&a.join("run_001"))["config"]["solver"]["dt"], 0.005);
}

#[test]
fn sweep_failure_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{EVOLVE}\n[sweep]\nexperiment = \"evolve\"\nparameter = \"solver.dt\"\nvalues = [0.01, -1.0]\n");
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("o");
    let o = snls(&["sweep", "--config", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary(&out)["n_failed"], 1);
    assert!(out.join("run_001/error.json").is_file());
    assert!(out.join("run_000/summary.json").is_file());
}

#[test]
fn plot_data_extraction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EVOLVE);
    let out = dir.path().join("o");
    run_ok("evolve", &cfg, &out, &[]);
    let dat = dir.path().join("mass.dat");
    let series = out.join("series.csv");
    let o = snls(&["plot-data", "--series", series.to_str().unwrap(), "--columns", "t,mass", "-o", dat.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&dat).unwrap();
    assert_eq!(text.lines().next(), Some("# t mass"));
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().skip(1).all(|l| l.split_whitespace().count() == 2));

    let o = snls(&["plot-data", "--series", series.to_str().unwrap(), "--columns", "t,nope", "-o", dat.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("sup_norm"), "{msg}");
}
