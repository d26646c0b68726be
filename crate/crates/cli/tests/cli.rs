use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
cache_dir = "cache"

[grid]
n_points = 4096
half_length = 800.0
dt = 0.01
t_start = 50.0
t_end = 200.0
checkpoints = 20

[hj]
xi_spacing = 0.05
nodes_per_unit = 96
s_max = 1e8
t_keep = 2000.0
"#;

fn modscat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modscat"))
        .current_dir(dir)
        .env_remove("MODSCAT_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn invalid_configs_name_the_violated_inequality() {
    let dir = setup();
    let cases = [
        ("datum.windows=[[0.5, 3.0]]", "supp û_+ ⊂ {|ξ| ≥ c0}"),
        ("solver.delta=0.4", "δ > 1/2"),
        ("solver.delta=0.75", "δ < min{ρ_L, ρ_S−1}"),
        ("solver.b=2.0", "b > 2"),
        ("potential.rho_l=0.5", "ρ_L > 1/2"),
    ];
    for (i, (set, label)) in cases.iter().enumerate() {
        let out = format!("bad{i}");
        let o = modscat(dir.path(), &["scatter", "-c", "small.toml", "-o", &out, "--set", set]);
        assert_eq!(code(&o), 1, "{set}");
        let failed = fs::read_to_string(dir.path().join(&out).join("FAILED")).unwrap();
        assert!(failed.contains(label), "{set}: {failed}");
        let report: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(&out).join("failure.json")).unwrap()).unwrap();
        assert!(report["error"].as_str().unwrap().contains(label));
        assert!(dir.path().join(&out).join("config.toml").exists());
    }
}

#[test]
fn malformed_cli_input_exits_with_usage_code() {
    let dir = setup();
    assert_eq!(code(&modscat(dir.path(), &["scatter", "--set", "grid.bogus=1"])), 2);
    assert_eq!(code(&modscat(dir.path(), &["scatter", "--set", "noequals"])), 2);
    assert_eq!(code(&modscat(dir.path(), &["scatter", "-c", "missing.toml"])), 2);
    assert_eq!(code(&modscat(dir.path(), &["not-a-command"])), 2);
}

#[test]
fn thread_variable_is_validated() {
    let dir = setup();
    for bad in ["0", "many"] {
        let o = Command::new(env!("CARGO_BIN_EXE_modscat"))
            .current_dir(dir.path())
            .env("MODSCAT_THREADS", bad)
            .args(["hj-solve", "-c", "small.toml", "--set", "potential.z=0"])
            .output()
            .unwrap();
        assert_eq!(code(&o), 2);
        assert!(String::from_utf8_lossy(&o.stderr).contains("MODSCAT_THREADS"));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_modscat"))
        .current_dir(dir.path())
        .env("MODSCAT_THREADS", "1")
        .args(["hj-solve", "-c", "small.toml", "-o", "one", "--set", "potential.z=0"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn free_hj_solve_and_snapshot_round_trip() {
    let dir = setup();
    let o = modscat(dir.path(), &["hj-solve", "-c", "small.toml", "-o", "free", "--set", "potential.z=0", "--export-table"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("free");
    let s = summary(&run);
    assert_eq!(s["passed"], true);
    assert_eq!(s["free_phase_deviation"], 0.0);
    assert_eq!(s["solve"]["max_iterations"], 1);
    for f in ["phase.csv", "residual.csv", "table.csv", "config.toml"] {
        assert!(run.join(f).exists(), "{f}");
    }
    // the snapshot is a complete config: rerunning from it reproduces the run
    let o = modscat(dir.path(), &["hj-solve", "-c", "free/config.toml", "-o", "again"]);
    assert_eq!(code(&o), 0);
    let again = dir.path().join("again");
    assert_eq!(fs::read(run.join("phase.csv")).unwrap(), fs::read(again.join("phase.csv")).unwrap());
    assert_eq!(summary(&again)["cache"]["hit"], true);
    let header = fs::read_to_string(run.join("residual.csv")).unwrap();
    assert!(header.lines().next().unwrap().contains(','));
}

#[test]
fn scatter_is_deterministic_and_cached() {
    let dir = setup();
    for out in ["a", "b"] {
        let o = modscat(dir.path(), &["scatter", "-c", "small.toml", "-o", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for f in ["series.csv", "log.csv", "normalized.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (sa, sb) = (summary(&a), summary(&b));
    assert_eq!(sa["cache"]["hit"], false);
    assert_eq!(sb["cache"]["hit"], true);
    assert_eq!(sa["kind"], "scatter");
    assert_eq!(sa["seed"], 7);
    let delta_hat = sa["delta_hat"].as_f64().unwrap();
    assert!(delta_hat.is_finite() && delta_hat > 0.5);
    assert_eq!(sa["delta_hat"], sb["delta_hat"]);
    let key = sa["cache"]["key"].as_str().unwrap();
    assert_eq!(key.len(), 64);
    assert!(dir.path().join("cache").join(format!("{key}.phase")).exists());

    // full-precision CSV with a header row
    let series = fs::read_to_string(a.join("series.csv")).unwrap();
    let mut lines = series.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    assert_eq!(lines.count(), 20);
    let mut rdr = csv::Reader::from_path(a.join("series.csv")).unwrap();
    for rec in rdr.records() {
        for field in rec.unwrap().iter() {
            let v: f64 = field.parse().unwrap();
            assert_eq!(v.to_string().parse::<f64>().unwrap(), v);
        }
    }
}

#[test]
fn seed_is_recorded_in_snapshot_and_summary() {
    let dir = setup();
    assert_eq!(code(&modscat(dir.path(), &["scatter", "-c", "small.toml", "-o", "s9", "--set", "seed=9"])), 0);
    let cfg = fs::read_to_string(dir.path().join("s9/config.toml")).unwrap();
    assert!(cfg.contains("seed = 9"));
    assert_eq!(summary(&dir.path().join("s9"))["seed"], 9);
}

fn sweep_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn sweep_over_amplitude_and_sign() {
    let dir = setup();
    let o = modscat(
        dir.path(),
        &["sweep", "-c", "small.toml", "-o", "sw", "--axis", "datum.epsilon=0.05,0.1,0.2", "--axis", "potential.z=1,-1"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("sw/sweep.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[1], "datum.epsilon");
    assert_eq!(&header[2], "potential.z");
    let rows = sweep_rows(&dir.path().join("sw/sweep.csv"));
    assert_eq!(rows.len(), 6);
    let status = header.iter().position(|h| h == "status").unwrap();
    let dh = header.iter().position(|h| h == "delta_hat").unwrap();
    for r in &rows {
        assert_eq!(&r[status], "ok");
        assert!(r[dh].parse::<f64>().unwrap().is_finite());
    }
    assert_eq!(&rows[0][1], "0.05");
    assert_eq!(&rows[1][2], "-1");
    for i in 0..6 {
        assert!(dir.path().join(format!("sw/cell-{i:03}/series.csv")).exists());
    }
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sw/sweep.json")).unwrap()).unwrap();
    assert_eq!(json["failed"], 0);
}

#[test]
fn empty_sweep_reproduces_single_run() {
    let dir = setup();
    assert_eq!(code(&modscat(dir.path(), &["scatter", "-c", "small.toml", "-o", "single"])), 0);
    assert_eq!(code(&modscat(dir.path(), &["sweep", "-c", "small.toml", "-o", "sw0"])), 0);
    assert_eq!(sweep_rows(&dir.path().join("sw0/sweep.csv")).len(), 1);
    assert_eq!(
        fs::read(dir.path().join("single/series.csv")).unwrap(),
        fs::read(dir.path().join("sw0/cell-000/series.csv")).unwrap()
    );
}

#[test]
fn failing_cell_is_recorded_and_sweep_continues() {
    let dir = setup();
    let o = modscat(dir.path(), &["sweep", "-c", "small.toml", "-o", "swf", "--axis", "solver.b=2.0,2.5"]);
    assert_eq!(code(&o), 1);
    let rows = sweep_rows(&dir.path().join("swf/sweep.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][2], "failed");
    assert!(rows[0][rows[0].len() - 1].contains("b > 2"));
    assert_eq!(&rows[1][2], "ok");
    assert!(dir.path().join("swf/cell-000/FAILED").exists());
    assert!(!dir.path().join("swf/cell-001/FAILED").exists());
}

#[test]
fn sweep_axes_from_config() {
    let dir = setup();
    let cfg = format!("{SMALL}\n[sweep]\nkind = \"hj-solve\"\naxes = [{{ field = \"potential.z\", values = [0.0, 1.0] }}]\n");
    fs::write(dir.path().join("sweep.toml"), cfg).unwrap();
    let o = modscat(dir.path(), &["sweep", "-c", "sweep.toml", "-o", "swc"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = sweep_rows(&dir.path().join("swc/sweep.csv"));
    assert_eq!(rows.len(), 2);
    assert!(dir.path().join("swc/cell-001/phase.csv").exists());
}

#[test]
fn fit_recovers_synthetic_rate() {
    let dir = setup();
    let mut text = String::from("t,v_h1\n");
    for i in 0..40 {
        let t = 10f64 * 1000f64.powf(i as f64 / 39.0);
        text.push_str(&format!("{t:e},{:e}\n", 2.0 * t.powf(-0.7) * t.ln().powf(2.5)));
    }
    fs::write(dir.path().join("series.csv"), text).unwrap();
    let o = modscat(dir.path(), &["fit", "-o", "fit", "--input", "series.csv", "--set", "fit.window=[10.0, 10000.0]"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir.path().join("fit"));
    let alpha = s["fit"]["alpha"].as_f64().unwrap();
    assert!((alpha - 0.7).abs() < 1e-6, "{s}");
    assert!(dir.path().join("fit/fit.csv").exists());
    let o = modscat(dir.path(), &["fit", "-o", "nofit"]);
    assert_eq!(code(&o), 1);
    assert!(fs::read_to_string(dir.path().join("nofit/FAILED")).unwrap().contains("[fit] section present"));
}

#[test]
fn evolve_and_profile_check_report_conservation() {
    let dir = setup();
    let small = ["--set", "grid.t_end=100.0", "--set", "grid.checkpoints=5"];
    let mut args = vec!["evolve", "-c", "small.toml", "-o", "ev"];
    args.extend(small);
    assert_eq!(code(&modscat(dir.path(), &args)), 0);
    let s = summary(&dir.path().join("ev"));
    assert!(s["conservation"]["mass_drift"].as_f64().unwrap() < 1e-8, "{s}");
    let mut args = vec!["profile-check", "-c", "small.toml", "-o", "pc"];
    args.extend(small);
    assert_eq!(code(&modscat(dir.path(), &args)), 0);
    assert_eq!(summary(&dir.path().join("pc"))["passed"], true);
    assert!(dir.path().join("pc/profile.csv").exists());
}

#[test]
fn verify_lemmas_prints_one_line_per_check() {
    let dir = setup();
    let o = modscat(dir.path(), &["verify-lemmas", "-o", "vl"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let checks: Vec<&str> = stdout.lines().filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")).collect();
    assert!(checks.len() >= 10, "{stdout}");
    let text = fs::read_to_string(dir.path().join("vl/summary.txt")).unwrap();
    assert_eq!(text.lines().count(), checks.len());
}
