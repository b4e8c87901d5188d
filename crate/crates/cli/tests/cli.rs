use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mnr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mnr"))
        .args(args)
        .env_remove("MNR_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Simulates a dataset into `dir` and returns its path.
fn simulate(dir: &Path, file: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(file);
    let mut args = vec!["simulate", "--out", s(&path)];
    args.extend_from_slice(extra);
    let out = mnr(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    path
}

const TOEPLITZ: [&str; 16] = [
    "--design",
    "toeplitz",
    "--rho",
    "0.9",
    "--n",
    "200",
    "--p",
    "200",
    "--family",
    "gaussian",
    "--beta",
    "1:2,2:4,3:-3,4:-5,5:10",
    "--intercept",
    "1",
    "--seed",
    "7",
];

fn report_column(csv_path: &Path, column: &str) -> Vec<(String, f64)> {
    let mut rdr = csv::Reader::from_path(csv_path).unwrap();
    let idx = rdr
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == column)
        .unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[idx].parse().unwrap())
        })
        .collect()
}

#[test]
fn simulate_writes_dataset_and_model_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = simulate(dir.path(), "a.csv", &TOEPLITZ);
    let b = simulate(dir.path(), "b.csv", &TOEPLITZ);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let text = std::fs::read_to_string(&a).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("X1,X2,"));
    assert!(header.ends_with(",y"));
    assert_eq!(text.lines().count(), 201);

    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.model.json")).unwrap())
            .unwrap();
    assert_eq!(
        model["resolved"]["active"],
        serde_json::json!([1, 2, 3, 4, 5])
    );
    assert_eq!(
        model["resolved"]["model"]["beta"][4],
        serde_json::json!(10.0)
    );
}

#[test]
fn simulate_flag_errors_exit_2() {
    let out = mnr(&[
        "simulate", "--design", "toeplitz", "--rho", "0.9", "--n", "50", "--p", "10", "--family",
        "gaussian", "--beta", "1:1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--out"));

    let dir = TempDir::new().unwrap();
    let path = dir.path().join("x.csv");
    let out = mnr(&[
        "simulate",
        "--design",
        "toeplitz",
        "--rho",
        "0.9",
        "--n",
        "50",
        "--p",
        "10",
        "--family",
        "gaussian",
        "--beta",
        "11:1",
        "--out",
        s(&path),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--beta"));

    let out = mnr(&[
        "simulate",
        "--design",
        "toeplitz",
        "--n",
        "50",
        "--p",
        "10",
        "--family",
        "gaussian",
        "--beta",
        "1:1",
        "--out",
        s(&path),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--rho"));
}

#[test]
fn infer_recovers_the_true_model_on_the_toeplitz_design() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "d.csv", &TOEPLITZ);
    let stem = dir.path().join("out/report");
    let out = mnr(&[
        "infer",
        "--data",
        s(&data),
        "--response",
        "y",
        "--family",
        "gaussian",
        "--out",
        s(&stem),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let holm = report_column(&stem.with_extension("csv"), "p_holm");
    assert_eq!(holm.len(), 200);
    let mut selected: Vec<String> = holm
        .iter()
        .filter(|x| x.1 <= 0.05)
        .map(|x| x.0.clone())
        .collect();
    selected.sort();
    assert_eq!(selected, ["X1", "X2", "X3", "X4", "X5"]);

    // top of the printed ranking is the five true features
    let printed = stdout(&out);
    let top: Vec<&str> = printed
        .lines()
        .skip(1)
        .take(5)
        .map(|l| l.split_whitespace().nth(1).unwrap())
        .collect();
    let mut top = top.clone();
    top.sort();
    assert_eq!(top, ["X1", "X2", "X3", "X4", "X5"]);
    assert_eq!(printed.lines().count(), 11);

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(stem.with_extension("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "infer");
    assert_eq!(manifest["resolved"]["config"]["blanket"], "nodewise");
    assert!(stem.with_extension("json").exists());
}

#[test]
fn infer_binomial_gives_wald_records() {
    let dir = TempDir::new().unwrap();
    let data = simulate(
        dir.path(),
        "d.csv",
        &[
            "--design",
            "ar2",
            "--n",
            "300",
            "--p",
            "150",
            "--family",
            "binomial",
            "--beta",
            "1:1,2:1,3:1,4:1,5:1",
            "--intercept",
            "1",
            "--seed",
            "3",
        ],
    );
    let stem = dir.path().join("logit");
    let out = mnr(&[
        "infer",
        "--data",
        s(&data),
        "--response",
        "y",
        "--family",
        "binomial",
        "--selection",
        "sis-then-mcp",
        "--out",
        s(&stem),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(rep["family"], "binomial");
    let records = rep["records"].as_array().unwrap();
    assert!(records.len() >= 140);
    assert!(records
        .iter()
        .all(|r| r["df"].is_null() && r["score_sup"].as_f64().unwrap() <= 1e-6));
}

#[test]
fn malformed_csv_exits_3_naming_row_and_column() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "a,b,y\n1,2,3\n4,oops,6\n").unwrap();
    let out = mnr(&[
        "infer",
        "--data",
        s(&data),
        "--response",
        "y",
        "--family",
        "gaussian",
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(code(&out), 3);
    let err = stderr(&out);
    assert!(
        err.contains("row 3") && err.contains("column 2") && err.contains("oops"),
        "{err}"
    );

    std::fs::write(&data, "a,b,y\n1,2,3\n4,5\n").unwrap();
    let out = mnr(&[
        "infer",
        "--data",
        s(&data),
        "--response",
        "y",
        "--family",
        "gaussian",
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("row 3"));

    std::fs::write(&data, "a,b,y\n1,2,3\n4,5,6\n").unwrap();
    let out = mnr(&[
        "infer",
        "--data",
        s(&data),
        "--response",
        "z",
        "--family",
        "gaussian",
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("'z'"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let data = simulate(
        dir.path(),
        "d.csv",
        &[
            "--design", "ar2", "--n", "60", "--p", "10", "--family", "cox", "--beta", "1:1",
            "--seed", "2",
        ],
    );
    let r = dir.path().join("r");
    let base = ["--data", s(&data), "--response", "time", "--out", s(&r)];

    let mut args = vec!["infer", "--family", "cox"];
    args.extend_from_slice(&base);
    let out = mnr(&args);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--event"));

    let mut args = vec![
        "infer",
        "--family",
        "gaussian",
        "--method",
        "desparsified",
        "--level",
        "1.2",
    ];
    args.extend_from_slice(&base);
    assert_eq!(code(&mnr(&args)), 2);

    let mut args = vec!["infer", "--family", "binomial", "--method", "desparsified"];
    args.extend_from_slice(&base);
    assert_eq!(code(&mnr(&args)), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_mnr"))
        .args(["infer", "--family", "gaussian"])
        .args(base)
        .env("MNR_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("MNR_THREADS"));
}

#[test]
fn cox_infer_runs_with_event_column() {
    let dir = TempDir::new().unwrap();
    let data = simulate(
        dir.path(),
        "d.csv",
        &[
            "--design", "ar2", "--n", "200", "--p", "20", "--family", "cox", "--beta", "1:1,2:1",
            "--seed", "4",
        ],
    );
    let header = std::fs::read_to_string(&data).unwrap();
    assert!(header.lines().next().unwrap().ends_with(",time,event"));
    let stem = dir.path().join("cox");
    let out = mnr(&[
        "infer",
        "--data",
        s(&data),
        "--response",
        "time",
        "--event",
        "event",
        "--family",
        "cox",
        "--out",
        s(&stem),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let est = report_column(&stem.with_extension("csv"), "beta_hat");
    assert_eq!(est.len(), 20);
}

#[test]
fn desparsified_writes_the_same_columns() {
    let dir = TempDir::new().unwrap();
    let data = simulate(
        dir.path(),
        "d.csv",
        &[
            "--design", "toeplitz", "--rho", "0.5", "--n", "100", "--p", "30", "--family",
            "gaussian", "--beta", "1:1,2:-1", "--seed", "5",
        ],
    );
    let a = dir.path().join("mnr");
    let b = dir.path().join("dl");
    for (stem, method) in [(&a, "mnr"), (&b, "desparsified")] {
        let out = mnr(&[
            "infer",
            "--data",
            s(&data),
            "--response",
            "y",
            "--family",
            "gaussian",
            "--method",
            method,
            "--out",
            s(stem),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let head = |p: &Path| {
        std::fs::read_to_string(p.with_extension("csv"))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(head(&a), head(&b));
}

#[test]
fn causal_mode_selects_true_features_and_flags_fallback() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "d.csv", &TOEPLITZ);
    let stem = dir.path().join("causal");
    let out = mnr(&[
        "causal",
        "--data",
        s(&data),
        "--response",
        "y",
        "--family",
        "gaussian",
        "--out",
        s(&stem),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(rep["selected_causal"], serde_json::json!([1, 2, 3, 4, 5]));
    assert_eq!(rep["causal_fallback"], false);

    // alpha = 1 keeps every assessed feature
    let out = mnr(&[
        "causal",
        "--data",
        s(&data),
        "--response",
        "y",
        "--family",
        "gaussian",
        "--alpha",
        "1.0",
        "--out",
        s(&stem),
    ]);
    assert_eq!(code(&out), 0);
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(
        rep["selected_causal"].as_array().unwrap().len(),
        rep["records"].as_array().unwrap().len()
    );

    let null = simulate(
        dir.path(),
        "null.csv",
        &[
            "--design", "toeplitz", "--rho", "0.5", "--n", "100", "--p", "40", "--family",
            "gaussian", "--beta", "1:0", "--seed", "11",
        ],
    );
    let out = mnr(&[
        "causal",
        "--data",
        s(&null),
        "--response",
        "y",
        "--family",
        "gaussian",
        "--out",
        s(&stem),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(rep["causal_fallback"], true);
    assert_eq!(rep["selected_causal"].as_array().unwrap().len(), 1);
}

#[test]
fn bench_smoke_config_is_fast_and_thread_invariant() {
    let dir = TempDir::new().unwrap();
    let config = configs_dir().join("smoke.json");
    let start = std::time::Instant::now();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(format!("t{threads}"));
        let out = mnr(&[
            "--threads",
            threads,
            "bench",
            "--config",
            s(&config),
            "--out",
            s(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        outputs.push(out_dir);
    }
    assert!(start.elapsed().as_secs_f64() < 20.0);
    for ext in ["csv", "json", "md", "manifest.json"] {
        let a = std::fs::read(outputs[0].join(format!("smoke.{ext}"))).unwrap();
        let b = std::fs::read(outputs[1].join(format!("smoke.{ext}"))).unwrap();
        assert_eq!(a, b, "smoke.{ext} differs across thread counts");
    }
}

#[test]
fn bench_thread_invariance_on_a_multi_replicate_run() {
    let dir = TempDir::new().unwrap();
    let config = configs_dir().join("toeplitz_linear.json");
    let mut reports = Vec::new();
    for threads in ["1", "4"] {
        let out_dir = dir.path().join(format!("t{threads}"));
        let out = mnr(&[
            "--threads",
            threads,
            "bench",
            "--config",
            s(&config),
            "--desk",
            "--replicates",
            "4",
            "--out",
            s(&out_dir),
        ]);
        assert!(matches!(code(&out), 0 | 5), "{}", stderr(&out));
        reports.push(std::fs::read(out_dir.join("toeplitz_linear.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn bench_band_failure_exits_5_with_a_diff() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(configs_dir().join("smoke.json")).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    cfg["bands"] = serde_json::json!([{ "metric": "signal_coverage", "max": -1.0 }]);
    let path = dir.path().join("strict.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = mnr(&[
        "bench",
        "--config",
        s(&path),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 5);
    assert!(stdout(&out).contains("OUT OF BAND"));
}

#[test]
fn bench_config_errors() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = mnr(&["bench", "--config", s(&path), "--out", s(dir.path())]);
    assert_eq!(code(&out), 3);

    let text = std::fs::read_to_string(configs_dir().join("smoke.json")).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    cfg["replicates"] = serde_json::json!(0);
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = mnr(&["bench", "--config", s(&path), "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        mnr::bench::ExperimentConfig::from_json(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
