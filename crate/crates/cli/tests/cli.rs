mod common;

use std::fs;

use common::{cli, fixture, write_confused_replay, write_full_annotations, write_full_dataset};
use serde_json::Value;
use tempfile::tempdir;

fn lines(path: &std::path::Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn validate_reports_counts_and_bad_records() {
    let ok = cli(&["validate", &fixture("train_pool.jsonl")], &[]);
    assert_eq!(ok.code, 0, "{}", ok.stderr);
    assert!(ok.stdout.contains("148 records OK"));

    let dir = tempdir().unwrap();
    let text = fs::read_to_string(fixture("train_pool.jsonl")).unwrap();
    let bad = text.replacen("\"answer\":\"Aldo Ashgrove\"", "\"answer\":\"\"", 1);
    assert_ne!(bad, text);
    let path = dir.path().join("bad.jsonl");
    fs::write(&path, bad).unwrap();
    let out = cli(&["validate", path.to_str().unwrap()], &[]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.contains("train-b000"), "{}", out.stdout);
    assert!(out.stderr.contains("1 of 148"), "{}", out.stderr);

    assert_eq!(cli(&["validate", "/no/such/file.jsonl"], &[]).code, 2);
}

fn mixture_args<'a>(shots: &'a str, seed: &'a str, out: &'a str, pools: &'a [String; 2]) -> Vec<&'a str> {
    vec![
        "mixture", "--pool", &pools[0], "--pool", &pools[1], "--shots", shots, "--seed", seed, "--out", out,
    ]
}

#[test]
fn mixture_splits_and_is_deterministic() {
    let dir = tempdir().unwrap();
    let pools = [fixture("train_pool.jsonl"), fixture("dev_pool.jsonl")];
    let a = dir.path().join("a/k128.jsonl");
    let b = dir.path().join("b/k128.jsonl");
    for p in [&a, &b] {
        let out = cli(&mixture_args("128", "7", p.to_str().unwrap(), &pools), &[]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        assert!(out.stderr.contains("seed: 7"));
        assert!(
            out.stdout.contains("train examples: 96 bridge + 32 comparison"),
            "{}",
            out.stdout
        );
        assert!(out.stdout.contains("val examples:   32 bridge + 24 comparison"));
    }
    for name in ["k128.jsonl", "k128.val.jsonl", "k128.meta.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a/k128.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["k"], 128);
    assert!(meta["version"].as_str().unwrap().starts_with("reasoning-circuits "));

    let small = dir.path().join("k8.jsonl");
    let out = cli(&mixture_args("8", "1", small.to_str().unwrap(), &pools), &[]);
    assert!(out.stdout.contains("train examples: 6 bridge + 2 comparison"));

    let out = cli(&mixture_args("10000", "1", small.to_str().unwrap(), &pools), &[]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("required 7500"), "{}", out.stderr);
}

#[test]
fn config_file_fills_missing_flags() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("mix.jsonl");
    let cfg = dir.path().join("rc.toml");
    fs::write(
        &cfg,
        format!(
            "pool = [{:?}, {:?}]\nshots = 16\nseed = 5\nout = {:?}\n",
            fixture("train_pool.jsonl"),
            fixture("dev_pool.jsonl"),
            out.display().to_string()
        ),
    )
    .unwrap();
    let env = [("REASONING_CIRCUITS_CONFIG", cfg.to_str().unwrap())];
    let r = cli(&["mixture"], &env);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("seed: 5"));
    assert!(r.stdout.contains("12 bridge + 4 comparison"));

    // A flag overrides the file.
    let r = cli(&["mixture", "--shots", "8", "--seed", "9"], &env);
    assert!(r.stderr.contains("seed: 9"));
    assert!(r.stdout.contains("6 bridge + 2 comparison"));

    fs::write(&cfg, "shots = 8\nshot_count = 9\n").unwrap();
    let r = cli(&["mixture"], &env);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("shot_count"), "{}", r.stderr);

    let r = cli(&["mixture", "--config", "/no/such.toml"], &[]);
    assert_eq!(r.code, 2);
}

#[test]
fn scripted_run_reproduces_annotations() {
    let dir = tempdir().unwrap();
    let traces = dir.path().join("traces");
    let pred = dir.path().join("pred.jsonl");
    let args = [
        "run",
        "--dataset",
        &fixture("dev_dataset.json"),
        "--backend",
        "scripted",
        "--annotations",
        &fixture("dev_pool.jsonl"),
        "--traces",
        traces.to_str().unwrap(),
        "--out",
        pred.to_str().unwrap(),
    ];
    let out = cli(&args, &[]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(fs::read_dir(&traces).unwrap().count(), 56);
    let rows = lines(&pred);
    assert_eq!(rows.len(), 56);
    for r in &rows {
        assert_eq!(r["hypothesis"], r["reference"]);
        assert_eq!(r["hypotheses"].as_array().unwrap().len(), 1);
    }
    let ids: Vec<&str> = rows.iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]));

    let before = fs::read(&pred).unwrap();
    let trace_before = fs::read(traces.join("dev-b000.trace.json")).unwrap();
    assert_eq!(cli(&args, &[]).code, 0);
    assert_eq!(fs::read(&pred).unwrap(), before);
    assert_eq!(fs::read(traces.join("dev-b000.trace.json")).unwrap(), trace_before);

    let report = dir.path().join("report.json");
    let out = cli(
        &[
            "eval",
            "--pred",
            pred.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rep: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for k in ["bleu1", "bleu2", "bleu3", "bleu4", "rouge_l"] {
        assert!((rep[k].as_f64().unwrap() - 1.0).abs() < 1e-9, "{k}");
    }
    assert_eq!(rep["n"], 56);
}

#[test]
fn scripted_backend_needs_a_script() {
    let dir = tempdir().unwrap();
    let out = cli(
        &[
            "run",
            "--dataset",
            &fixture("dev_dataset.json"),
            "--traces",
            dir.path().to_str().unwrap(),
            "--out",
            dir.path().join("p.jsonl").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("--annotations"));
}

#[test]
fn unreachable_http_backend_fails_every_example() {
    let dir = tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let endpoint = format!("http://127.0.0.1:{port}/generate");
    let out = cli(
        &[
            "run",
            "--dataset",
            &fixture("dev_dataset.json"),
            "--backend",
            "http",
            "--endpoint",
            &endpoint,
            "--retries",
            "0",
            "--traces",
            dir.path().join("t").to_str().unwrap(),
            "--out",
            dir.path().join("p.jsonl").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("unavailable"), "{}", out.stderr);
    assert!(out.stderr.contains("56 of 56 examples failed"));
}

#[test]
fn confused_type_yields_two_questions() {
    let dir = tempdir().unwrap();
    let replay = dir.path().join("calls.jsonl");
    write_confused_replay(&replay);
    let pred = dir.path().join("pred.jsonl");
    let record = dir.path().join("again.jsonl");
    let out = cli(
        &[
            "run",
            "--dataset",
            &fixture("dev_dataset.json"),
            "--replay",
            replay.to_str().unwrap(),
            "--confused-policy",
            "both",
            "--record",
            record.to_str().unwrap(),
            "--traces",
            dir.path().join("t").to_str().unwrap(),
            "--out",
            pred.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rows = lines(&pred);
    assert_eq!(rows.len(), 56);
    for r in &rows {
        assert_eq!(r["q_type"], "confused");
        assert_eq!(r["hypotheses"].as_array().unwrap().len(), 2);
    }
    // Re-recording the replayed run gives back the same calls.
    let mut a: Vec<String> = fs::read_to_string(&replay).unwrap().lines().map(String::from).collect();
    let b: Vec<String> = fs::read_to_string(&record).unwrap().lines().map(String::from).collect();
    a.sort();
    let mut sorted_b = b.clone();
    sorted_b.sort();
    assert_eq!(a, sorted_b);
}

#[test]
fn eval_rejects_empty_and_missing_predictions() {
    let dir = tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let report = dir.path().join("r.json");
    assert_eq!(
        cli(
            &[
                "eval",
                "--pred",
                empty.to_str().unwrap(),
                "--out",
                report.to_str().unwrap()
            ],
            &[]
        )
        .code,
        2
    );
    assert_eq!(
        cli(&["eval", "--pred", "/no/such", "--out", report.to_str().unwrap()], &[]).code,
        2
    );
    fs::write(&empty, "{\"id\": 1}\n").unwrap();
    assert_eq!(
        cli(
            &[
                "eval",
                "--pred",
                empty.to_str().unwrap(),
                "--out",
                report.to_str().unwrap()
            ],
            &[]
        )
        .code,
        2
    );
}

#[test]
fn sheet_samples_deterministically() {
    let dir = tempdir().unwrap();
    let dataset = dir.path().join("all.json");
    let annotations = dir.path().join("all.jsonl");
    assert_eq!(write_full_dataset(&dataset), 204);
    write_full_annotations(&annotations);
    let pred = dir.path().join("pred.jsonl");
    let out = cli(
        &[
            "run",
            "--dataset",
            dataset.to_str().unwrap(),
            "--annotations",
            annotations.to_str().unwrap(),
            "--traces",
            dir.path().join("t").to_str().unwrap(),
            "--out",
            pred.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);

    let sheet = |seed: &str, name: &str, n: &str| {
        let path = dir.path().join(name);
        let out = cli(
            &[
                "sheet",
                "--pred",
                pred.to_str().unwrap(),
                "-n",
                n,
                "--seed",
                seed,
                "--out",
                path.to_str().unwrap(),
            ],
            &[],
        );
        (out, path)
    };
    let (out, a) = sheet("11", "a.csv", "150");
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stderr.contains("seed: 11"));
    let (_, b) = sheet("11", "b.csv", "150");
    let (_, c) = sheet("12", "c.csv", "150");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    let mut rows = text.lines();
    assert_eq!(
        rows.next().unwrap(),
        "\"id\",\"p1\",\"p2\",\"answer\",\"question\",\"multi_hop\",\"well_formed\",\"answerable\",\"answer_matching\""
    );
    assert_eq!(rows.count(), 150);

    let (out, _) = sheet("1", "d.csv", "205");
    assert_eq!(out.code, 1);
    let (out, d) = sheet("1", "d.csv", "0");
    assert_eq!(out.code, 0);
    assert_eq!(fs::read_to_string(d).unwrap().lines().count(), 1);
}
