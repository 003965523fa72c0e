mod common;

use std::fs;

use common::*;
use metatrace::csvio::parse_dataset;
use tempfile::tempdir;

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempdir().unwrap();
    for args in [
        vec!["--dataset", "sat", "--prior", "uniform", "--highlight", "A"],
        vec![
            "--dataset",
            "aspirin",
            "--mode",
            "freq",
            "--estimator",
            "dl",
        ],
    ] {
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        run_ok(&a, &args);
        run_ok(&b, &args);
        let (fa, fb) = (files(&a), files(&b));
        assert_eq!(
            fa.keys().collect::<Vec<_>>(),
            [
                "forest.svg",
                "report.json",
                "report.txt",
                "trace.csv",
                "trace.svg"
            ]
        );
        assert_eq!(fa, fb, "{args:?}");
        fs::remove_dir_all(&a).unwrap();
        fs::remove_dir_all(&b).unwrap();
    }
}

#[test]
fn empty_regression_matches_plain_meta_analysis() {
    let tmp = tempdir().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    run_ok(&a, &["--dataset", "sat", "--prior", "uniform"]);
    run_ok(
        &b,
        &["--dataset", "sat", "--prior", "uniform", "--regression", ""],
    );
    run_ok(
        &c,
        &["--dataset", "sat", "--prior", "uniform", "--regression"],
    );
    assert_eq!(files(&a), files(&b));
    assert_eq!(files(&a), files(&c));
}

fn key_paths(v: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, child) in map {
                let p = format!("{prefix}.{k}");
                out.push(p.clone());
                key_paths(child, &p, out);
            }
        }
        serde_json::Value::Array(items) => {
            for child in items {
                key_paths(child, &format!("{prefix}[]"), out);
            }
        }
        _ => {}
    }
}

fn schema(v: &serde_json::Value) -> String {
    let mut paths = Vec::new();
    key_paths(v, "", &mut paths);
    paths.sort();
    paths.dedup();
    paths.join("\n") + "\n"
}

#[test]
fn json_schema_matches_golden_files() {
    let tmp = tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(
        &a,
        &[
            "--dataset",
            "sat",
            "--prior",
            "uniform",
            "--outputs",
            "report",
        ],
    );
    run_ok(
        &b,
        &[
            "--dataset",
            "sat",
            "--mode",
            "freq",
            "--estimator",
            "reml",
            "--outputs",
            "report",
        ],
    );
    let golden = |name: &str| {
        fs::read_to_string(format!(
            "{}/tests/golden/{name}",
            env!("CARGO_MANIFEST_DIR")
        ))
        .unwrap()
    };
    assert_eq!(schema(&report(&a)), golden("schema_bayes.txt"));
    assert_eq!(schema(&report(&b)), golden("schema_freq.txt"));
    let ra = report(&a);
    assert_eq!(ra["schema_version"], 1);
    assert_eq!(ra["tau"]["kind"], "bayes");
    assert_eq!(report(&b)["tau"]["kind"], "freq");
}

#[test]
fn json_numbers_carry_seventeen_significant_digits() {
    let tmp = tempdir().unwrap();
    run_ok(
        tmp.path(),
        &[
            "--dataset",
            "sat",
            "--prior",
            "uniform",
            "--outputs",
            "report",
        ],
    );
    let text = fs::read_to_string(tmp.path().join("report.json")).unwrap();
    let integers = ["schema_version", "k", "grid_points"];
    let mut floats = 0;
    for line in text.lines() {
        let t = line.trim().trim_end_matches(',');
        let value = match t.split_once("\": ") {
            Some((key, value)) => {
                if integers.contains(&key.trim_start_matches('"')) {
                    continue;
                }
                value
            }
            None => t,
        };
        if value.starts_with(|c: char| c == '-' || c.is_ascii_digit()) {
            let (mantissa, exp) = value.split_once('e').expect("exponent form");
            let digits = mantissa.trim_start_matches('-').replace('.', "");
            assert_eq!(digits.len(), 17, "{value}");
            assert!(exp.parse::<i32>().is_ok());
            floats += 1;
        }
    }
    assert!(floats > 50);
}

#[test]
fn report_values_match_library() {
    let tmp = tempdir().unwrap();
    run_ok(
        tmp.path(),
        &[
            "--dataset",
            "sat",
            "--prior",
            "uniform",
            "--outputs",
            "report",
        ],
    );
    let r = report(tmp.path());
    let data = metatrace::datasets::find("sat").unwrap().load().unwrap();
    let design = metatrace::DesignMatrix::intercept_only(8);
    let post =
        metatrace::build_posterior(&data, &design, metatrace::HeterogeneityPrior::Uniform).unwrap();
    assert_eq!(num(&r["tau"]["median"]), post.median());
    assert_eq!(r["studies"].as_array().unwrap().len(), 8);
    assert_eq!(r["contrasts"][0]["label"], "mu");
    assert_eq!(r["predictions"][0]["label"], "prediction");
    let sd_mu = num(&r["contrasts"][0]["estimate"]["sd"]);
    let sd_pred = num(&r["predictions"][0]["estimate"]["sd"]);
    assert!(sd_pred > sd_mu);
}

#[test]
fn excluding_amis_reduces_heterogeneity() {
    let tmp = tempdir().unwrap();
    run_ok(
        tmp.path(),
        &[
            "--dataset",
            "aspirin",
            "--prior",
            "uniform",
            "--exclude",
            "AMIS",
            "--outputs",
            "report",
        ],
    );
    let r = report(tmp.path());
    assert_eq!(r["data"]["k"], 5);
    assert!((num(&r["tau"]["median"]) - 0.094).abs() < 0.005);
    assert!(fs::read_to_string(tmp.path().join("report.txt"))
        .unwrap()
        .contains("excluded: AMIS"));
}

#[test]
fn exit_codes_by_error_class() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    let two = tmp.path().join("two.csv");
    fs::write(&two, "label,y,se\na,1,1\nb,2,1\n").unwrap();

    // input and validation errors
    for args in [
        vec!["run", "--dataset", "sat", "--out", o],
        vec!["run", "--dataset", "sat", "--mode", "freq", "--out", o],
        vec!["run", "--dataset", "nope", "--prior", "uniform", "--out", o],
        vec!["run", "--dataset", "sat", "--prior", "cauchy", "--out", o],
        vec![
            "run",
            "--dataset",
            "sat",
            "--prior",
            "uniform",
            "--contrast",
            "x:1,2",
            "--out",
            o,
        ],
        vec![
            "run",
            "--dataset",
            "sat",
            "--prior",
            "uniform",
            "--exclude",
            "Z",
            "--out",
            o,
        ],
        vec![
            "run",
            "--dataset",
            "sat",
            "--prior",
            "uniform",
            "--regression",
            "age",
            "--out",
            o,
        ],
        vec![
            "run",
            "--dataset",
            "sat",
            "--prior",
            "uniform",
            "--grid-points",
            "3",
            "--out",
            o,
        ],
        vec![
            "run",
            "--dataset",
            "sat",
            "--prior",
            "uniform",
            "--highlight",
            "Q",
            "--out",
            o,
        ],
        vec![
            "run",
            "--dataset",
            "no2",
            "--prior",
            "dumouchel",
            "--out",
            o,
        ],
        vec![
            "run",
            "--data",
            "x.csv",
            "--dataset",
            "sat",
            "--prior",
            "uniform",
            "--out",
            o,
        ],
        vec!["bogus"],
    ] {
        let r = metatrace(&args);
        assert_eq!(code(&r), 2, "{args:?}: {}", stderr(&r));
        assert!(!stderr(&r).is_empty());
    }
    // model errors: improper posterior
    let r = metatrace(&[
        "run",
        "--data",
        two.to_str().unwrap(),
        "--prior",
        "uniform",
        "--out",
        o,
    ]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
    assert!(stderr(&r).contains("improper"));
    // I/O errors
    let missing = tmp.path().join("missing.csv");
    let r = metatrace(&[
        "run",
        "--data",
        missing.to_str().unwrap(),
        "--prior",
        "uniform",
        "--out",
        o,
    ]);
    assert_eq!(code(&r), 4);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let r = metatrace(&[
        "run",
        "--dataset",
        "sat",
        "--prior",
        "uniform",
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 4, "{}", stderr(&r));
    assert!(!out.exists());
}

#[test]
fn failed_run_leaves_output_directory_untouched() {
    let tmp = tempdir().unwrap();
    let two = tmp.path().join("two.csv");
    fs::write(&two, "label,y,se\na,1,1\nb,2,1\n").unwrap();
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let r = metatrace(&[
        "run",
        "--data",
        two.to_str().unwrap(),
        "--prior",
        "uniform",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 3);
    assert_eq!(files(&out).into_keys().collect::<Vec<_>>(), ["keep.txt"]);
    run_ok(
        &out,
        &[
            "--data",
            two.to_str().unwrap(),
            "--prior",
            "halfnormal:1",
            "--outputs",
            "report",
        ],
    );
    assert_eq!(
        files(&out).into_keys().collect::<Vec<_>>(),
        ["keep.txt", "report.json", "report.txt"]
    );
}

#[test]
fn ingestion_errors_are_distinct() {
    let tmp = tempdir().unwrap();
    let cases = [
        (
            "missing.csv",
            "label,y\na,1\nb,2\n",
            "missing required column `se`",
        ),
        (
            "dup.csv",
            "label,y,se\na,1,1\na,2,1\n",
            "duplicate study label `a`",
        ),
        ("empty.csv", "", "no data rows"),
        ("header.csv", "label,y,se\n", "no data rows"),
        ("zero.csv", "label,y,se\na,1,1\nb,2,0\n", "row 3"),
        ("text.csv", "label,y,se\na,1,1\nb,two,1\n", "row 3"),
    ];
    for (name, contents, needle) in cases {
        let path = tmp.path().join(name);
        fs::write(&path, contents).unwrap();
        let out = tmp.path().join("out");
        let r = metatrace(&[
            "run",
            "--data",
            path.to_str().unwrap(),
            "--prior",
            "uniform",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&r), 2, "{name}");
        assert!(stderr(&r).contains(needle), "{name}: {}", stderr(&r));
    }
}

#[test]
fn datasets_list_shows_registry() {
    let r = metatrace(&["datasets", "list"]);
    assert_eq!(code(&r), 0);
    let text = stdout(&r);
    let rows: Vec<(String, usize)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split_whitespace();
            (
                f.next().unwrap().to_string(),
                f.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        rows,
        [
            ("sat".to_string(), 8),
            ("aspirin".into(), 6),
            ("no2".into(), 9),
            ("copd".into(), 22)
        ]
    );
    assert!(text.contains("gender,smoke,no2"));
    assert!(text.contains("fev1"));
}

#[test]
fn export_then_ingest_round_trips() {
    let tmp = tempdir().unwrap();
    for name in ["sat", "aspirin"] {
        let path = tmp.path().join(format!("{name}.csv"));
        let r = metatrace(&["datasets", "export", name, path.to_str().unwrap()]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# source: "));
        let exported = parse_dataset(&text).unwrap();
        let bundled = metatrace::datasets::find(name).unwrap().load().unwrap();
        assert_eq!(exported, bundled);

        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        run_ok(
            &a,
            &[
                "--data",
                path.to_str().unwrap(),
                "--prior",
                "uniform",
                "--outputs",
                "report",
            ],
        );
        run_ok(
            &b,
            &[
                "--dataset",
                name,
                "--prior",
                "uniform",
                "--outputs",
                "report",
            ],
        );
        assert_eq!(report(&a)["tau"], report(&b)["tau"]);
        assert_eq!(report(&a)["studies"], report(&b)["studies"]);
        fs::remove_dir_all(&a).unwrap();
        fs::remove_dir_all(&b).unwrap();
    }
    let r = metatrace(&[
        "datasets",
        "export",
        "copd",
        tmp.path().join("c.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("not bundled"));
    let r = metatrace(&[
        "datasets",
        "export",
        "sat",
        tmp.path().join("no/such/dir.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 4);
}

#[test]
fn regression_contrasts_and_predictions() {
    let tmp = tempdir().unwrap();
    let path = tmp.path().join("reg.csv");
    fs::write(
        &path,
        "label,y,se,x\na,0.10,0.2,0\nb,0.30,0.25,0\nc,-0.05,0.2,0\nd,0.60,0.3,1\ne,0.45,0.2,1\nf,0.80,0.35,1\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let out = tmp.path().join("out");
    run_ok(
        &out,
        &[
            "--data",
            p,
            "--prior",
            "halfnormal:0.5",
            "--regression",
            "x",
            "--contrast",
            "group x=1:1,1",
            "--predict-at",
            "x=1",
            "--highlight",
            "group x=1",
        ],
    );
    let r = report(&out);
    let labels: Vec<&str> = r["contrasts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["intercept", "x", "group x=1", "x=1"]);
    // the explicit contrast and the predict-at point are the same linear combination
    assert_eq!(r["contrasts"][2]["estimate"], r["contrasts"][3]["estimate"]);
    assert_eq!(r["predictions"][0]["label"], "new study at x=1");
    let mean_c = num(&r["contrasts"][3]["estimate"]["mean"]);
    let mean_p = num(&r["predictions"][0]["estimate"]["mean"]);
    assert!((mean_c - mean_p).abs() < 1e-12);
    assert!(
        num(&r["predictions"][0]["estimate"]["sd"]) > num(&r["contrasts"][3]["estimate"]["sd"])
    );
    // explicit contrasts replace the coefficient lines in the trace
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let series: std::collections::BTreeSet<&str> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert!(series.contains("group x=1") && series.contains("x=1"));
    assert!(!series.contains("intercept") && !series.contains("x"));

    let r = metatrace(&[
        "run",
        "--data",
        p,
        "--prior",
        "uniform",
        "--regression",
        "x",
        "--predict-at",
        "z=1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn freq_mode_warns_about_ignored_prior() {
    let tmp = tempdir().unwrap();
    run_ok(
        tmp.path(),
        &[
            "--dataset",
            "sat",
            "--mode",
            "freq",
            "--estimator",
            "reml",
            "--prior",
            "uniform",
            "--outputs",
            "report",
        ],
    );
    let r = report(tmp.path());
    assert_eq!(r["config"]["estimator"], "REML");
    assert_eq!(num(&r["tau"]["estimate"]), 0.0);
    assert!(r["warnings"][0]
        .as_str()
        .unwrap()
        .contains("--prior is ignored"));
}
