#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use reasoning_circuits::annotation::{dataset_to_string, parse_annotation_file, parse_dataset_file};
use reasoning_circuits::backends::{
    scripted_from_annotations, Backend, BackendError, FnBackend, GenRequest, MissPolicy, Recording,
};
use reasoning_circuits::{run_circuit, AnnotatedExample, ContextMode, RunConfig, SentinelConfig, TaskId};

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn fixture(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

/// Runs the binary with no config file in the environment unless `env` sets one.
pub fn cli(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reasoning-circuits"));
    cmd.args(args).env_remove("REASONING_CIRCUITS_CONFIG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn load(name: &str) -> Vec<AnnotatedExample> {
    parse_annotation_file(fixtures().join(name)).unwrap()
}

/// Dataset file holding every annotated example of both pools.
pub fn write_full_dataset(path: &Path) -> usize {
    let mut all = load("train_pool.jsonl");
    all.extend(load("dev_pool.jsonl"));
    let gold: Vec<_> = all.into_iter().map(|a| a.example).collect();
    std::fs::write(path, dataset_to_string(&gold)).unwrap();
    gold.len()
}

/// Annotations file covering both pools, for scripting the full dataset.
pub fn write_full_annotations(path: &Path) {
    let mut text = std::fs::read_to_string(fixtures().join("train_pool.jsonl")).unwrap();
    text.push_str(&std::fs::read_to_string(fixtures().join("dev_pool.jsonl")).unwrap());
    std::fs::write(path, text).unwrap();
}

/// Records a run over the dev dataset where the type task answers with a
/// word outside its vocabulary, so every example runs both branches. Steps
/// the annotations cover answer from them, the rest from fixed rules.
pub fn write_confused_replay(path: &Path) {
    let s = SentinelConfig::default();
    let (s0, s1) = (s.s0().to_string(), s.s1().to_string());
    let oracle = scripted_from_annotations(&load("dev_pool.jsonl"), ContextMode::Full, &s, MissPolicy::Fail).unwrap();
    let inner = FnBackend::new("confusing", move |req: &GenRequest| {
        let key = req.key.as_ref().unwrap();
        match key.task {
            TaskId::T1 => Ok(format!("{s0} none {s1} perhaps")),
            TaskId::T11 => Ok(format!("{s0} The first fact. {s1} The second fact.")),
            TaskId::T12 => Ok(format!("{s0} Both facts together.")),
            TaskId::T13 => Ok(format!("{s0} Which came first?")),
            task => match oracle.generate(req) {
                Err(BackendError::Miss(_)) => Ok(match task {
                    TaskId::T2 => format!("{s0} none {s1} the subject"),
                    TaskId::T3 => format!("{s0} absent"),
                    TaskId::T4 => format!("{s0} different"),
                    TaskId::T10 => format!("{s0} What links the two passages?"),
                    _ => format!("{s0} A statement about the subject of both passages."),
                }),
                other => other.map(|r| r.text),
            },
        }
    });
    let rec = Recording::new(inner);
    for ex in parse_dataset_file(fixtures().join("dev_dataset.json")).unwrap() {
        run_circuit(&ex.id, &ex.input, &rec, &RunConfig::default()).unwrap();
    }
    std::fs::write(path, rec.to_jsonl()).unwrap();
}
