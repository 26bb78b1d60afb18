use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symroll"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn symroll")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().expect("summary line")).expect("summary is JSON")
}

fn roll(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["roll", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

/// Data rows of a CSV trajectory as numbers, skipping the column and header lines.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let columns = lines.next().unwrap().split(',').map(String::from).collect();
    assert!(lines.next().unwrap().starts_with("# "));
    let rows = lines.map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    (columns, rows)
}

#[test]
fn sphere_quarter_equator_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("quarter.csv");
    let out = roll(&configs_dir().join("sphere_quarter_equator.json"), &out_path, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["pass"], Value::Bool(true));
    assert_eq!(summary["n_steps"], 1000);

    let (columns, rows) = csv_rows(&out_path);
    assert_eq!(rows.len(), 1001);
    assert_eq!(columns[0], "t");
    assert_eq!(columns[1], "alpha_0");
    assert_eq!(columns[4], "alphahat_0");
    assert_eq!(columns[7], "R_00");
    assert_eq!(columns[16], "s_0");
    assert!(rows.iter().all(|r| r.len() == columns.len()));
    // the contact point on the plane travels the arc length pi/2
    let last = rows.last().unwrap();
    let first = &rows[0];
    let travelled: f64 = (4..7).map(|i| (last[i] - first[i]).powi(2)).sum::<f64>().sqrt();
    assert!((travelled - std::f64::consts::FRAC_PI_2).abs() < 1e-6, "{travelled}");
}

#[test]
fn unknown_model_exits_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "model": "banana",
        "curve": {"kind": "control", "generator": "zero"},
        "grid": {"t0": 0.0, "t1": 1.0, "n_steps": 10}
    });
    let path = write_config(dir.path(), "banana.json", &cfg);
    let out = roll(&path, &dir.path().join("x.csv"), &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown model: banana"));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn unreadable_or_invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = roll(&dir.path().join("missing.json"), &dir.path().join("x.csv"), &[]);
    assert_eq!(code(&out), 1);
    std::fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let out = roll(&dir.path().join("broken.json"), &dir.path().join("x.csv"), &[]);
    assert_eq!(code(&out), 1);
    let cfg = serde_json::json!({
        "model": "riemann_sphere",
        "curve": {"kind": "control", "generator": "zero"},
        "grid": {"t0": 0.0, "t1": 1.0, "n_steps": 1}
    });
    let out = roll(&write_config(dir.path(), "short.json", &cfg), &dir.path().join("x.csv"), &[]);
    assert_eq!(code(&out), 1, "n_steps below 2");
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(code(&run(&["roll"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn zero_control_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "model": "riemann_sphere",
        "curve": {"kind": "control", "generator": "zero"},
        "grid": {"t0": 0.0, "t1": 1.0, "n_steps": 50}
    });
    let out_path = dir.path().join("zero.csv");
    let out = roll(&write_config(dir.path(), "zero.json", &cfg), &out_path, &[]);
    assert_eq!(code(&out), 0);
    let summary = stdout_json(&out);
    for (name, value) in summary["residuals"].as_object().unwrap() {
        // zero up to projector round-off
        assert!(value.as_f64().unwrap() <= 1e-13, "{name} {value}");
    }
    let (_, rows) = csv_rows(&out_path);
    let identity = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-15);
    for row in &rows {
        assert!(close(&row[1..7], &rows[0][1..7]), "alpha and alpha_hat constant");
        assert!(close(&row[7..16], &identity), "R stays the identity");
        assert!(close(&row[16..], &[0.0; 3]), "s stays zero");
    }
}

#[test]
fn roll_then_verify_round_trips_for_every_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut configs: Vec<PathBuf> =
        std::fs::read_dir(configs_dir()).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "json")).collect();
    configs.sort();
    assert!(configs.len() >= 8);
    for cfg in configs {
        let stem = cfg.file_stem().unwrap().to_str().unwrap().to_string();
        for (mode_flag, ext) in [("csv", "csv"), ("json", "json")] {
            let out_path = dir.path().join(format!("{stem}.{ext}"));
            let out = roll(&cfg, &out_path, &["--format", mode_flag]);
            assert_eq!(code(&out), 0, "{stem}: {}", String::from_utf8_lossy(&out.stderr));
            let verified = run(&["verify", "--in", out_path.to_str().unwrap()]);
            assert_eq!(code(&verified), 0, "{stem} {ext}: {}", String::from_utf8_lossy(&verified.stdout));
            assert_eq!(stdout_json(&verified)["residuals"], stdout_json(&out)["residuals"], "{stem}");
        }
    }
}

#[test]
fn intrinsic_mode_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["riemann_sphere", "so_2_2", "stiefel_4_2"] {
        let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(configs_dir().join(format!("{name}.json"))).unwrap()).unwrap();
        cfg["mode"] = "intrinsic".into();
        let path = write_config(dir.path(), &format!("{name}.json"), &cfg);
        let out_path = dir.path().join(format!("{name}_intrinsic.csv"));
        let out = roll(&path, &out_path, &[]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(stdout_json(&out)["orientation_failures"], 0);
        let verified = run(&["verify", "--in", out_path.to_str().unwrap()]);
        assert_eq!(code(&verified), 0, "{name}");
    }
}

#[test]
fn perturbed_translation_is_a_breach() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sphere.csv");
    assert_eq!(code(&roll(&configs_dir().join("riemann_sphere.json"), &out_path, &[])), 0);

    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let s0 = lines[0].split(',').position(|c| c == "s_0").unwrap();
    let target = 2 + 200;
    let mut fields: Vec<String> = lines[target].split(',').map(String::from).collect();
    let value: f64 = fields[s0].parse().unwrap();
    fields[s0] = format!("{:.16e}", value + 1e-2);
    lines[target] = fields.join(",");
    let bad = dir.path().join("perturbed.csv");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();

    let out = run(&["verify", "--in", bad.to_str().unwrap(), "--tol", "1e-4"]);
    assert_eq!(code(&out), 2);
    let rp = stdout_json(&out)["residuals"]["rolling_point"].as_f64().unwrap();
    assert!((rp - 1e-2).abs() < 1e-4, "{rp}");
}

#[test]
fn truncated_or_missing_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sphere.csv");
    assert_eq!(code(&roll(&configs_dir().join("riemann_sphere.json"), &out_path, &[])), 0);
    let text = std::fs::read_to_string(&out_path).unwrap();
    for cut in [text.len() / 2, text.len() - 7, 30] {
        let bad = dir.path().join(format!("cut{cut}.csv"));
        std::fs::write(&bad, &text[..cut]).unwrap();
        assert_eq!(code(&run(&["verify", "--in", bad.to_str().unwrap()])), 1, "cut at {cut}");
    }
    let json_path = dir.path().join("sphere.json");
    assert_eq!(code(&roll(&configs_dir().join("riemann_sphere.json"), &json_path, &[])), 0);
    let json = std::fs::read_to_string(&json_path).unwrap();
    let bad = dir.path().join("cut.json");
    std::fs::write(&bad, &json[..json.len() / 2]).unwrap();
    assert_eq!(code(&run(&["verify", "--in", bad.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["verify", "--in", dir.path().join("nope.csv").to_str().unwrap()])), 1);
}

#[test]
fn csv_and_json_outputs_decode_to_identical_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("so_2_1.json");
    let csv_path = dir.path().join("a.csv");
    let json_path = dir.path().join("a.json");
    assert_eq!(code(&roll(&cfg, &csv_path, &["--format", "csv"])), 0);
    assert_eq!(code(&roll(&cfg, &json_path, &["--format", "json"])), 0);

    let (columns, rows) = csv_rows(&csv_path);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let dim = json["header"]["dim"].as_u64().unwrap() as usize;
    assert_eq!(columns.len(), 1 + 3 * dim + dim * dim);
    let floats = |v: &Value| -> Vec<f64> { v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect() };
    for (k, row) in rows.iter().enumerate() {
        let mut expect = vec![json["t"][k].as_f64().unwrap()];
        for key in ["alpha", "alpha_hat", "R", "s"] {
            expect.extend(floats(&json[key][k]));
        }
        let same = row.iter().zip(&expect).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same && row.len() == expect.len(), "row {k} differs");
    }
}

#[test]
fn residual_breach_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(configs_dir().join("hyperbolic_disc.json")).unwrap()).unwrap();
    cfg["tolerance"] = 1e-30.into();
    let path = write_config(dir.path(), "strict.json", &cfg);
    let out_path = dir.path().join("strict.csv");
    let out = roll(&path, &out_path, &[]);
    assert_eq!(code(&out), 2);
    assert!(out_path.exists(), "the trajectory is still written");
    assert_eq!(code(&run(&["verify", "--in", out_path.to_str().unwrap(), "--tol", "1e-30"])), 2);
}

#[test]
fn config_directory_runs_every_config() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["riemann_sphere.json", "hyperbolic_disc.json", "stiefel_3_1.json"] {
        std::fs::copy(configs_dir().join(name), dir.path().join(name)).unwrap();
    }
    let out = run(&["roll", "--config", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
    for name in ["riemann_sphere.csv", "hyperbolic_disc.csv", "stiefel_3_1.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let with_out = run(&["roll", "--config", dir.path().to_str().unwrap(), "--out", "x.csv"]);
    assert_eq!(code(&with_out), 1);
}

#[test]
fn models_list_and_show() {
    let out = run(&["models", "list"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["hyperbolic_disc", "riemann_sphere", "so_1_2", "so_2_1", "so_3_0", "so_2_2", "stiefel_3_1", "stiefel_4_2"] {
        assert!(text.contains(name), "{name}");
    }
    let shown = run(&["models", "show", "so_2_2"]);
    assert_eq!(code(&shown), 0);
    let desc: Value = serde_json::from_slice(&shown.stdout).unwrap();
    assert_eq!(desc["name"], "so_2_2");
    assert_eq!(code(&run(&["models", "show", "banana"])), 1);
}

#[test]
fn model_file_path_is_recorded_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let shown = run(&["models", "show", "hyperbolic_disc"]);
    std::fs::write(dir.path().join("disc.json"), &shown.stdout).unwrap();
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(configs_dir().join("hyperbolic_disc.json")).unwrap()).unwrap();
    cfg["model"] = "disc.json".into();
    let path = write_config(dir.path(), "from_file.json", &cfg);
    let out_path = dir.path().join("from_file.csv");
    let out = roll(&path, &out_path, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // verify runs from another working directory
    let verified = bin().args(["verify", "--in", out_path.to_str().unwrap()]).current_dir(std::env::temp_dir()).output().unwrap();
    assert_eq!(code(&verified), 0, "{}", String::from_utf8_lossy(&verified.stderr));
}
