use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn osc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osc-factor"))
        .args(args)
        .env_remove("OSC_FACTOR_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn factor_fifteen_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = osc(&["factor", "--preset", "fig2", "--N", "15", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let report: serde_json::Value = serde_json::from_str(&read(&dir.path().join("report.json"))).unwrap();
    assert_eq!(report["N"], 15);
    assert_eq!(report["success"], true);
    let mut pairs: Vec<(u64, u64)> = report["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_u64().unwrap(), p[1].as_u64().unwrap()))
        .collect();
    pairs.sort();
    assert_eq!(pairs, vec![(3, 5), (5, 3)]);
    for key in ["tau", "born_probability", "ideal_probability"] {
        assert!(report[key].as_f64().unwrap() > 0.0, "{key}");
    }
    assert!(dir.path().join("curve.csv").exists());
}

#[test]
fn prime_target_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = osc(&["factor", "--N", "13", "--window", "2:7", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&read(&dir.path().join("report.json"))).unwrap();
    assert_eq!(report["success"], false);
    assert_eq!(report["pairs"].as_array().unwrap().len(), 0);
}

#[test]
fn missing_config_exits_one_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = osc(&["factor", "--config", "missing.conf", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.conf"));
    assert!(!out.exists());
}

#[test]
fn malformed_arguments_exit_one() {
    assert_eq!(osc(&["factor", "--N", "fifteen"]).status.code(), Some(1));
    assert_eq!(osc(&["factor", "--window", "2-7"]).status.code(), Some(1));
    assert_eq!(osc(&["factor", "--preset", "fig9"]).status.code(), Some(1));
    assert_eq!(osc(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = osc(&["config", "--preset", "fig4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap().replace("[bath]\n", "[bath]\ngamma_3 = 0.5\n");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let o = osc(&["factor", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gamma_3"), "{}", stderr(&o));
}

#[test]
fn dumped_config_reproduces_the_preset() {
    let dir = tempfile::tempdir().unwrap();
    let dump = osc(&["config", "--preset", "fig2", "--alpha", "6"]);
    let path = dir.path().join("run.toml");
    std::fs::write(&path, &dump.stdout).unwrap();

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(osc(&["curve", "--preset", "fig2", "--alpha", "6", "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(osc(&["curve", "--config", path.to_str().unwrap(), "--out", b.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(read(&a.join("curve.csv")), read(&b.join("curve.csv")));
}

#[test]
fn curve_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = osc(&["curve", "--preset", "fig2", "--tau-grid", "0:1:201", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bytes = std::fs::read(dir.path().join("curve.csv")).unwrap();
    assert!(!bytes.contains(&b'\r'));
    let text = String::from_utf8(bytes).unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines[0], "tau,F,g,k,alpha,gamma3,N,window_mode");
    assert_eq!(lines.len(), 1 + 3 * 201);

    let mut gs = Vec::new();
    for l in &lines[1..] {
        let cells: Vec<&str> = l.split(',').collect();
        assert_eq!(cells.len(), 8);
        for c in [cells[0], cells[1], cells[2], cells[4], cells[5]] {
            let (mantissa, _) = c.split_once('e').expect("scientific notation");
            assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17, "{c}");
            c.parse::<f64>().unwrap();
        }
        assert_eq!(cells[6], "15");
        let g: f64 = cells[2].parse().unwrap();
        if !gs.contains(&g) {
            gs.push(g);
        }
    }
    assert_eq!(gs, vec![1.0, 0.9, 0.8]);
}

#[test]
fn sweep_fig4_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = osc(&["sweep", "--preset", "fig4", "--grid", "3:5:1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = read(&dir.path().join("sweep.csv"));
    let lines = data_lines(&text);
    assert_eq!(lines[0], "alpha,gamma3,F,born_probability,ideal_probability,tau");
    assert_eq!(lines.len(), 1 + 3 * 3);
    assert!(text.contains("# reference tau="));
}

#[test]
fn empty_grid_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = osc(&["sweep", "--preset", "fig5", "--grid", "", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty grid"), "{}", stderr(&o));
    assert!(!dir.path().join("sweep.csv").exists());
}

#[test]
fn output_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: Option<&str>, env: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["sweep", "--preset", "fig3", "--grid", "0.5:1.5:0.25", "--out", out.to_str().unwrap()];
        if let Some(t) = threads {
            args.extend(["--threads", t]);
        }
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_osc-factor"));
        cmd.args(&args).env_remove("OSC_FACTOR_THREADS");
        if let Some(e) = env {
            cmd.env("OSC_FACTOR_THREADS", e);
        }
        let o = cmd.output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(out.join("sweep.csv")).unwrap()
    };
    let one = run(Some("1"), None, "t1");
    assert_eq!(one, run(Some("4"), None, "t4"));
    assert_eq!(one, run(None, Some("3"), "env3"));
    assert_eq!(one, run(None, None, "default"));
}

#[test]
fn bad_thread_variable_is_an_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_osc-factor"))
        .args(["config"])
        .env("OSC_FACTOR_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("OSC_FACTOR_THREADS"));
}

#[test]
fn quick_oracle_check_passes_fast() {
    let started = Instant::now();
    let o = osc(&["oracle-check", "--quick"]);
    let elapsed = started.elapsed().as_secs_f64();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("max deviation"));
    assert!(elapsed < 5.0, "{elapsed} s");
}

#[test]
fn truncated_oracle_check_fails() {
    let o = osc(&["oracle-check", "--quick", "--dim", "10"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout.contains("insufficient dimension"), "{stdout}");
}
