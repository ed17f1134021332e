use std::path::PathBuf;
use std::time::Instant;

use reasoning_circuits::annotation::{
    annotations_to_string, parse_annotation_file, parse_dataset_file, validate_annotation,
};
use reasoning_circuits::backends::{scripted_from_annotations, MissPolicy};
use reasoning_circuits::metrics::{evaluate_run, EvalPair};
use reasoning_circuits::{run_circuit, AnnotatedExample, ContextMode, QuestionType, RunConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn dev_pool() -> Vec<AnnotatedExample> {
    parse_annotation_file(fixture("dev_pool.jsonl")).expect("dev pool parses and validates")
}

#[test]
fn pools_have_expected_shape() {
    for (name, bridge, comparison) in [("train_pool.jsonl", 98, 50), ("dev_pool.jsonl", 32, 24)] {
        let pool = parse_annotation_file(fixture(name)).unwrap();
        let b = pool
            .iter()
            .filter(|a| a.question_type() == QuestionType::Bridge)
            .count();
        assert_eq!((b, pool.len() - b), (bridge, comparison), "{name}");
        for a in &pool {
            let report = validate_annotation(a);
            assert!(report.violations.is_empty(), "{report}");
        }
    }
}

#[test]
fn pool_files_are_canonical() {
    for name in ["train_pool.jsonl", "dev_pool.jsonl", "worked_examples.jsonl"] {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let pool = parse_annotation_file(fixture(name)).unwrap();
        assert_eq!(annotations_to_string(&pool), text, "{name}");
    }
}

#[test]
fn dev_dataset_matches_pool() {
    let data = parse_dataset_file(fixture("dev_dataset.json")).unwrap();
    let pool = dev_pool();
    assert_eq!(data.len(), pool.len());
    for (d, a) in data.iter().zip(&pool) {
        assert_eq!(d, &a.example);
    }
}

fn closed_loop(mode: ContextMode) {
    let pool = dev_pool();
    let cfg = RunConfig {
        context_mode: mode,
        ..RunConfig::default()
    };
    let backend = scripted_from_annotations(&pool, mode, &cfg.sentinels, MissPolicy::Fail).unwrap();
    let start = Instant::now();
    let mut pairs = Vec::new();
    for a in &pool {
        let trace = run_circuit(a.id(), &a.example.input, &backend, &cfg).unwrap_or_else(|e| panic!("{e}"));
        assert_eq!(trace.questions.len(), 1, "{}", a.id());
        let q = &trace.questions[0];
        assert_eq!(q.q_type, a.question_type());
        assert_eq!(q.text, a.rationale.question(), "{}", a.id());
        assert!(trace.steps.iter().all(|s| s.validator_flags.is_empty() && !s.fallback));
        pairs.push(EvalPair::new(a.id(), a.rationale.question(), &q.text));
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
    let report = evaluate_run::<f64>(&pairs).unwrap();
    for v in [report.bleu1, report.bleu2, report.bleu3, report.bleu4, report.rouge_l] {
        assert!((v - 1.0).abs() < 1e-9, "{report:?}");
    }
}

#[test]
fn scripted_oracle_reproduces_annotations_full_context() {
    closed_loop(ContextMode::Full);
}

#[test]
fn scripted_oracle_reproduces_annotations_supporting_context() {
    closed_loop(ContextMode::Supporting);
}

#[test]
fn worked_examples_round_trip() {
    let pool = parse_annotation_file(fixture("worked_examples.jsonl")).unwrap();
    let cfg = RunConfig::default();
    let backend = scripted_from_annotations(&pool, cfg.context_mode, &cfg.sentinels, MissPolicy::Fail).unwrap();
    for a in &pool {
        let trace = run_circuit(a.id(), &a.example.input, &backend, &cfg).unwrap();
        assert_eq!(trace.questions[0].text, a.rationale.question());
    }
}
