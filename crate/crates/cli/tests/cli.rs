use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pgts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgts"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn one_iteration_gives_one_curve_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = pgts(&[
        "train",
        "--preset",
        "hetero",
        "--iterations",
        "1",
        "--batch-size",
        "50",
        "--out",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&dir.path().join("learning_curve.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "1");
    let ckpt = fs::read_to_string(dir.path().join("checkpoint.json")).unwrap();
    let params = pgts_core::MetaParams::from_json(&ckpt).unwrap();
    assert_eq!(params.arms(), 5);
}

#[test]
fn missing_field_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{
  "schema_version": 1,
  "bandit": {"arms": 2, "horizon": 5, "prior_mean": [0, 0], "prior_var": [1, 1]},
  "training": {"iterations": 1, "batch_size": 4, "step_size": 0.05, "metric": "mean", "baseline": "null", "seed": 1},
  "evaluation": {"n_instances": 10, "seed": 2}
}"#,
    )
    .unwrap();
    let out = pgts(&["train", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("noise_var"), "{err}");
}

#[test]
fn uncoupled_pair_and_unknown_policy_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"schema_version": 1, "preset": "hetero", "training": {"metric": "bayes", "baseline": "oracle"}}"#).unwrap();
    assert_eq!(
        pgts(&["train", "--config", path(&cfg)]).status.code(),
        Some(2)
    );
    assert_eq!(
        pgts(&["evaluate", "--preset", "hetero", "--policy", "greedy"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        pgts(&["evaluate", "--preset", "hetero"]).status.code(),
        Some(2)
    );
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("div.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1,
 "bandit": {"arms": 2, "horizon": 400, "prior_mean": [0, 0], "prior_var": [1, 1], "noise_var": [1, 1]},
 "training": {"iterations": 30, "batch_size": 50, "step_size": 20.0, "metric": "obs", "baseline": "null", "seed": 3},
 "evaluation": {"n_instances": 100, "seed": 2}}"#,
    )
    .unwrap();
    let out = pgts(&["train", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "2")] {
        let d = path(dir.path());
        let common = ["--preset", "hetero", "--out", d];
        let train = pgts(
            &[
                &[
                    "--threads",
                    threads,
                    "train",
                    "--iterations",
                    "3",
                    "--batch-size",
                    "40",
                    "--no-wall-clock",
                ],
                &common[..],
            ]
            .concat(),
        );
        assert!(train.status.success());
        let ckpt = dir.path().join("checkpoint.json");
        assert!(pgts(
            &[
                &["compare", "--n", "500", "--checkpoint", path(&ckpt)],
                &common[..]
            ]
            .concat()
        )
        .status
        .success());
        assert!(pgts(
            &[
                &["pull-histogram", "--n", "500", "--policy", "naive_ts"],
                &common[..]
            ]
            .concat()
        )
        .status
        .success());
        assert!(pgts(
            &[
                &["variance-study", "--n", "10000", "--resamples", "200"],
                &common[..]
            ]
            .concat()
        )
        .status
        .success());
    }
    for file in [
        "learning_curve.csv",
        "checkpoint.json",
        "report.csv",
        "report.json",
        "pulls.csv",
        "variance.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn shared_seed_shares_instances() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let out = pgts(&[
        "evaluate",
        "--preset",
        "many_arms",
        "--policy",
        "naive_ts",
        "--n",
        "300",
        "--seed",
        "5",
        "--out",
        d,
    ]);
    assert!(out.status.success());
    let single = csv_rows(&dir.path().join("report.csv"));
    let out = pgts(&[
        "compare",
        "--preset",
        "many_arms",
        "--n",
        "300",
        "--seed",
        "5",
        "--out",
        d,
    ]);
    assert!(out.status.success());
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(
        table.contains("naive_ts") && table.contains("bayes_ucb"),
        "{table}"
    );
    let both = csv_rows(&dir.path().join("report.csv"));
    assert_eq!(single[0], both[0]);
    assert_eq!(both.len(), 2);
}

#[test]
fn variance_study_rejects_small_n_and_reports_nonnegative_traces() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    assert_eq!(
        pgts(&[
            "variance-study",
            "--preset",
            "hetero",
            "--n",
            "100",
            "--out",
            d
        ])
        .status
        .code(),
        Some(2)
    );
    let out = pgts(&[
        "variance-study",
        "--preset",
        "standard",
        "--n",
        "10000",
        "--resamples",
        "200",
        "--out",
        d,
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("variance.csv"));
    let traces: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "trace").collect();
    assert_eq!(traces.len(), 11);
    assert!(traces.iter().all(|r| r[4].parse::<f64>().unwrap() >= 0.0));
    let gap = rows
        .iter()
        .find(|r| r[0] == "gap" && r[1] == "obs" && r[2] == "oracle")
        .unwrap();
    assert!(
        gap[5].parse::<f64>().unwrap() > 0.0,
        "obs-mean gap CI {gap:?}"
    );
}

#[test]
fn standard_training_improves_at_reduced_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = pgts(&[
        "train",
        "--preset",
        "standard",
        "--iterations",
        "100",
        "--batch-size",
        "1000",
        "--out",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&dir.path().join("learning_curve.csv"));
    assert_eq!(rows.len(), 100);
    let first: f64 = rows[0][1].parse().unwrap();
    let last: f64 = rows[99][1].parse().unwrap();
    assert!(last <= 0.95 * first, "{first} -> {last}");
}
