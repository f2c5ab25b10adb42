use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nanoloc_core::experiments::{MetricsReport, ScenarioConfig, Seeds};

fn nanoloc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanoloc"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn nanoloc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A short fig8 run written to disk so tests can drive it through `--config`.
fn small_visits_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = ScenarioConfig::builtin("fig8").unwrap();
    cfg.name = "small".into();
    cfg.seeds = Seeds::Range { start: 0, count: 3 };
    cfg.duration_s = 300.0;
    let path = dir.join("small.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn channel_sweep_writes_one_row_per_subband() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nanoloc"))
        .args(["channel", "sweep", "--delta-f", "1e11"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "frequency_hz,loss_spread_db,loss_abs_db,loss_total_db,p_rb_db,noise_psd_w_hz,capacity_fwd_bps,capacity_back_bps"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0][0], 0.15e12);
    for r in &rows {
        assert!((r[1] + r[2] - r[3]).abs() < 1e-9 * r[3]);
    }

    let o = nanoloc(&["channel", "sweep", "--delta-f", "1e11"], tmp.path());
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(tmp.path().join("channel_sweep.csv")).unwrap(), text);
}

#[test]
fn simulate_trajectory_writes_states_and_events() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nanoloc(
        &["simulate", "trajectory", "--duration", "20", "--seed", "4"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t_s,x_m,y_m,z_m,segment_id\n"));
    assert_eq!(traj.lines().count(), 2002);
    let first = traj.lines().nth(1).unwrap();
    assert!(first.ends_with(",52"), "{first}");
    let events = fs::read_to_string(tmp.path().join("events.csv")).unwrap();
    assert!(events.starts_with("t_s,event_id,segment_id,x_m,y_m,z_m"));

    let again = tempfile::tempdir().unwrap();
    nanoloc(
        &["simulate", "trajectory", "--duration", "20", "--seed", "4"],
        again.path(),
    );
    assert_eq!(fs::read_to_string(again.path().join("trajectory.csv")).unwrap(), traj);
}

#[test]
fn run_check_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = nanoloc(&["run", "fig4", "--check"], tmp.path());
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("**PASS** `dominant_absorber`"));
    assert!(tmp.path().join("fig4/report.json").is_file());

    // The received-power levels are not reproduced by the model, so the
    // check fails and the run says so through its exit status.
    let bad = nanoloc(&["run", "fig6", "--check"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
    let unchecked = nanoloc(&["run", "fig6"], tmp.path());
    assert_eq!(unchecked.status.code(), Some(0));
}

#[test]
fn compare_detects_perturbed_reports() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(nanoloc(&["run", "fig4"], tmp.path()).status.success());
    let dir = tmp.path().join("fig4");
    let same = nanoloc(
        &[
            "compare",
            dir.to_str().unwrap(),
            dir.join("report.json").to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(same.status.code(), Some(0), "{}", stdout(&same));

    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let cell = &mut v["tables"][0]["rows"][5][5];
    *cell = serde_json::json!(cell.as_f64().unwrap() * 1.001);
    let perturbed = tmp.path().join("perturbed.json");
    fs::write(&perturbed, serde_json::to_string(&v).unwrap()).unwrap();
    let diff = nanoloc(
        &["compare", perturbed.to_str().unwrap(), dir.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(diff.status.code(), Some(2));
}

#[test]
fn seed_offset_and_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_visits_config(tmp.path());
    let run = |out: &str, offset: &str, threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_nanoloc"))
            .env("NANOLOC_THREADS", threads)
            .arg("--out")
            .arg(tmp.path().join(out))
            .args(["--config", cfg.to_str().unwrap(), "--seed-offset", offset, "run"])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        tmp.path().join(out).join("small")
    };
    let base = run("a", "0", "1");
    let threaded = run("b", "0", "3");
    let shifted = run("c", "7", "1");
    for name in ["intervals.csv", "interval_summary.csv", "report.json"] {
        assert_eq!(
            fs::read(base.join(name)).unwrap(),
            fs::read(threaded.join(name)).unwrap(),
            "{name}"
        );
    }
    let r = MetricsReport::from_file(&shifted.join("report.json")).unwrap();
    assert_eq!(r.fingerprint.seeds, [7, 8, 9]);
    assert_ne!(
        fs::read(base.join("intervals.csv")).unwrap(),
        fs::read(shifted.join("intervals.csv")).unwrap()
    );
}

#[test]
fn simulate_localize_accepts_imu_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("imu.json");
    fs::write(
        &spec,
        r#"{"label": "only", "gyro_noise_std": 0.01, "gyro_bias": 0.001,
            "accel_noise_std": 0.01, "accel_bias": 0.001, "sample_rate": 100.0}"#,
    )
    .unwrap();
    let o = nanoloc(
        &[
            "simulate",
            "localize",
            "--seeds",
            "0..2",
            "--duration",
            "120",
            "--imu-spec",
            spec.to_str().unwrap(),
            "--enable-vessel-constraint",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = MetricsReport::from_file(&tmp.path().join("localize/report.json")).unwrap();
    assert_eq!(r.fingerprint.seeds, [0, 1]);
    let bins = r.table("error_bins").unwrap();
    let level = bins.column("level").unwrap();
    assert!(bins.rows.iter().all(|row| row[level].to_string() == "only"));
}

#[test]
fn list_and_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nanoloc(&["list"], tmp.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 7);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"name": "x"}"#).unwrap();
    let o = nanoloc(&["--config", bad.to_str().unwrap(), "run"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let o = nanoloc(&["run", "no_such_scenario"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}
