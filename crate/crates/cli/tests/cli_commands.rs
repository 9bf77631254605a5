use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use uplift_cli::artifact::ModelArtifact;
use uplift_core::datagen::read_csv;

fn uplift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uplift"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = uplift(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_writes_default_sizes_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["gen", "--kind", "rct", "--seed", "1", "--out", p(&a)]);
    ok(&["gen", "--kind", "rct", "--seed", "1", "--out", p(&b)]);
    for f in ["train.csv", "test.csv", "spec.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let train = read_csv(a.join("train.csv"), None).unwrap();
    let test = read_csv(a.join("test.csv"), None).unwrap();
    assert_eq!((train.len(), test.len()), (10_000, 10_000));
    assert!(train.truth.is_none() && test.truth.is_some());
}

#[test]
fn gen_sidecar_records_spec() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "gen",
        "--kind",
        "mix",
        "--with-iv",
        "--n-train",
        "100",
        "--n-test",
        "50",
        "--out",
        p(dir.path()),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("spec.json")).unwrap()).unwrap();
    assert_eq!(v["spec"]["kind"], "mix");
    assert_eq!(v["spec"]["with_iv"], true);
    assert_eq!(v["spec"]["seed"], 0);
    assert_eq!(v["train_rows"], 100);
}

#[test]
fn gen_rejects_unknown_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = uplift(&["gen", "--kind", "weird", "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scenario kind"));
}

#[test]
fn train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen",
        "--kind",
        "rct",
        "--seed",
        "1",
        "--n-train",
        "1500",
        "--n-test",
        "1000",
        "--out",
        p(&data),
    ]);
    let train_csv = data.join("train.csv");
    let test_csv = data.join("test.csv");
    let m1 = dir.path().join("m1");
    let m2 = dir.path().join("m2");
    let args = |out: &Path| {
        vec![
            "train".to_string(),
            "--data".into(),
            p(&train_csv).into(),
            "--backbone".into(),
            "tarnet".into(),
            "--head".into(),
            "sa".into(),
            "--epochs".into(),
            "2".into(),
            "--batch".into(),
            "128".into(),
            "--seed".into(),
            "1".into(),
            "--out".into(),
            p(out).into(),
        ]
    };
    ok(&args(&m1).iter().map(String::as_str).collect::<Vec<_>>());
    ok(&args(&m2).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(
        fs::read(m1.join("model.json")).unwrap(),
        fs::read(m2.join("model.json")).unwrap()
    );

    let artifact = ModelArtifact::load(&m1.join("model.json")).unwrap();
    let test = read_csv(&test_csv, None).unwrap();
    let preds = artifact.model.predict_all(&test.x).unwrap();
    assert_eq!(preds.shape(), (1000, 5));

    let history: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(m1.join("history.json")).unwrap()).unwrap();
    assert_eq!(history["history"]["epochs"].as_array().unwrap().len(), 2);
    assert!(history["wall_clock_secs"].as_f64().is_some());

    let e = dir.path().join("eval");
    let stdout = ok(&[
        "eval",
        "--data",
        p(&test_csv),
        "--model",
        p(&m1.join("model.json")),
        "--out",
        p(&e),
    ]);
    assert!(stdout.starts_with("mqini "));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(e.join("report.json")).unwrap()).unwrap();
    let arms = report["arms"].as_array().unwrap();
    assert_eq!(arms.len(), 4);
    for (i, a) in arms.iter().enumerate() {
        assert_eq!(a["arm"], i + 1);
        assert!(a["qini"].as_f64().unwrap().is_finite());
    }
    let mean = arms.iter().map(|a| a["qini"].as_f64().unwrap()).sum::<f64>() / 4.0;
    assert!((report["mqini"].as_f64().unwrap() - mean).abs() < 1e-12);
    let curve = fs::read_to_string(e.join("curve_arm3.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("fraction,value"));
    assert_eq!(lines.next(), Some("0,0"));
    assert!(curve.trim_end().ends_with(|c: char| c.is_ascii_digit()));
    assert!(curve.lines().last().unwrap().starts_with("1,"));
}

#[test]
fn oracle_and_null_eval_paths() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen",
        "--kind",
        "rct_nm",
        "--seed",
        "2",
        "--n-train",
        "10",
        "--out",
        p(&data),
    ]);
    let test_csv = data.join("test.csv");
    let stdout = ok(&[
        "eval",
        "--data",
        p(&test_csv),
        "--use-truth",
        "--out",
        p(&dir.path().join("o")),
    ]);
    let oracle: f64 = stdout.lines().next().unwrap()["mqini ".len()..].parse().unwrap();

    let test = read_csv(&test_csv, None).unwrap();
    let expected = uplift_core::eval::mqini_from_predictions(
        test.truth.as_ref().unwrap(),
        &test.t,
        &test.y,
        0,
        uplift_core::eval::TieMode::Stable,
        uplift_core::exec::Exec::Sequential,
    )
    .unwrap();
    assert!((oracle - expected.mqini).abs() < 1e-6);
    assert!(oracle > 0.0);

    for seed in ["1", "2", "3"] {
        let stdout = ok(&[
            "eval",
            "--data",
            p(&test_csv),
            "--use-truth",
            "--shuffle-scores",
            "--seed",
            seed,
            "--out",
            p(&dir.path().join(format!("n{seed}"))),
        ]);
        let null: f64 = stdout.lines().next().unwrap()["mqini ".len()..].parse().unwrap();
        assert!(null.abs() < 0.02, "{null}");
    }
}

#[test]
fn eval_rejects_mismatched_covariates() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen",
        "--kind",
        "rct",
        "--n-train",
        "300",
        "--n-test",
        "50",
        "--out",
        p(&data),
    ]);
    let m = dir.path().join("m");
    ok(&[
        "train",
        "--data",
        p(&data.join("train.csv")),
        "--epochs",
        "1",
        "--out",
        p(&m),
    ]);
    // drop the last covariate column
    let text = fs::read_to_string(data.join("test.csv")).unwrap();
    let cut: String = text
        .lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split(',').collect();
            cols.remove(7);
            cols.join(",") + "\n"
        })
        .collect();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, cut).unwrap();
    let out = uplift(&[
        "eval",
        "--data",
        p(&bad),
        "--model",
        p(&m.join("model.json")),
        "--out",
        p(&dir.path().join("e")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("covariates"));
}

#[test]
fn balancing_loss_shows_in_history() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen",
        "--kind",
        "obs",
        "--n-train",
        "800",
        "--n-test",
        "10",
        "--out",
        p(&data),
    ]);
    let m = dir.path().join("m");
    ok(&[
        "train",
        "--data",
        p(&data.join("train.csv")),
        "--backbone",
        "cfrnet",
        "--head",
        "ofa",
        "--disc",
        "wass",
        "--lambda2",
        "0.5",
        "--degree",
        "3",
        "--epochs",
        "2",
        "--out",
        p(&m),
    ]);
    let history: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(m.join("history.json")).unwrap()).unwrap();
    assert_eq!(history["model"], "CFRNet+OFA+WASS");
    for e in history["history"]["epochs"].as_array().unwrap() {
        assert!(e["disc"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn bench_single_cell_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let args = [
        "bench",
        "--kind",
        "rct",
        "--backbone",
        "tarnet",
        "--head",
        "ofa",
        "--seed",
        "1",
        "--seed",
        "2",
        "--epochs",
        "2",
        "--n-train",
        "600",
        "--n-test",
        "500",
        "--out",
        p(&out),
    ];
    let first = Command::new(env!("CARGO_BIN_EXE_uplift"))
        .args(args)
        .env("UPLIFT_BENCH_WORKERS", "2")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let stdout = String::from_utf8(first.stdout).unwrap();
    assert!(stdout.contains("| Model | RCT |"), "{stdout}");
    assert!(stdout.contains("ran 2, reused 0, failed 0"));
    let table = fs::read_to_string(out.join("table.md")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.contains("| TARNet+OFA |"));

    let seed1 = out.join("runs/rct/tarnet_ofa/seed1.json");
    let before = fs::read(&seed1).unwrap();
    fs::remove_file(&seed1).unwrap();
    let again = ok(&args);
    assert!(again.contains("ran 1, reused 1, failed 0"), "{again}");
    assert_eq!(fs::read(&seed1).unwrap(), before);
    assert_eq!(fs::read_to_string(out.join("table.md")).unwrap(), table);
}

#[test]
fn bench_config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"scenarios":[{"kind":"obs","with_iv":true},{"kind":"mix"}],
            "models":[{"backbone":"bnn","head":"fa","disc":"mmd"}],
            "seeds":[7],"n_train":400,"n_test":400,"epochs":50}"#,
    )
    .unwrap();
    let out = dir.path().join("bench");
    let stdout = ok(&[
        "bench",
        "--config",
        p(&cfg),
        "--epochs",
        "1",
        "--lambda2",
        "0.3",
        "--out",
        p(&out),
    ]);
    assert!(stdout.contains("| Model | OBS w/ IV | MIX w/o IV |"), "{stdout}");
    assert!(stdout.contains("BNN+FA+MMD (λ2=0.3)"));
    let csv = fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("runs/obs_iv/bnn_fa_mmd_l0.3/seed7.json")).unwrap()).unwrap();
    assert_eq!(run["epochs_run"], 1);
}

#[test]
fn bench_marks_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // one arm never appears in a 3-row test split, so scoring fails
    fs::write(
        &cfg,
        r#"{"scenarios":[{"kind":"rct"}],"models":[{"backbone":"tarnet_cfrnet","head":"sa"}],
            "seeds":[1],"n_train":200,"n_test":3,"epochs":1}"#,
    )
    .unwrap();
    let out = dir.path().join("bench");
    let stdout = ok(&["bench", "--config", p(&cfg), "--out", p(&out)]);
    assert!(stdout.contains("| TARNet+SA | — |"), "{stdout}");
    assert!(stdout.contains("failed 1"));
    assert!(out.join("runs/rct/tarnet_sa/seed1.error.txt").exists());
}
