//! Circuit execution over a dataset with a bounded worker pool.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use reasoning_circuits::backends::Backend;
use reasoning_circuits::circuit::CircuitTrace;
use reasoning_circuits::{run_circuit, GoldExample, Passage, RunConfig, RunError};
use serde::{Deserialize, Serialize};

/// One line of the predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub reference: String,
    /// First emitted question; the bridge one when both branches ran.
    pub hypothesis: String,
    pub hypotheses: Vec<String>,
    pub q_type: String,
    #[serde(default)]
    pub answer: String,
    #[serde(default)]
    pub p1: String,
    #[serde(default)]
    pub p2: String,
}

pub fn passage_text(p: &Passage) -> String {
    format!("{}: {}", p.title, p.sentences.join(" "))
}

impl Prediction {
    fn new(ex: &GoldExample, trace: &CircuitTrace) -> Self {
        let hypotheses: Vec<String> = trace.questions.iter().map(|q| q.text.clone()).collect();
        let q_type = serde_json::to_value(trace.controls.q_type)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        Self {
            id: ex.id.clone(),
            reference: ex.gold_question.clone().unwrap_or_default(),
            hypothesis: hypotheses.first().cloned().unwrap_or_default(),
            hypotheses,
            q_type,
            answer: ex.input.answer.clone(),
            p1: passage_text(&ex.input.p1),
            p2: passage_text(&ex.input.p2),
        }
    }
}

pub struct Outcome {
    pub predictions: Vec<Prediction>,
    /// Every example's trace (partial for failures), in id order.
    pub traces: Vec<CircuitTrace>,
    pub failures: Vec<String>,
}

/// Runs every example on `workers` threads. Results come back in the order
/// of `examples`, whatever order the workers finish in.
pub fn run_all(examples: &[GoldExample], backend: &dyn Backend, cfg: &RunConfig, workers: usize) -> Outcome {
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut slots: Vec<Option<Result<CircuitTrace, RunError>>> = (0..examples.len()).map(|_| None).collect();
    thread::scope(|s| {
        for _ in 0..workers.max(1).min(examples.len().max(1)) {
            let tx = tx.clone();
            let next = &next;
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(ex) = examples.get(i) else { break };
                let res = run_circuit(&ex.id, &ex.input, backend, cfg);
                if tx.send((i, res)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, res) in rx {
            slots[i] = Some(res);
        }
    });

    let mut out = Outcome {
        predictions: Vec::new(),
        traces: Vec::new(),
        failures: Vec::new(),
    };
    for (ex, res) in examples.iter().zip(slots) {
        match res.expect("every example reports") {
            Ok(trace) => {
                out.predictions.push(Prediction::new(ex, &trace));
                out.traces.push(trace);
            }
            Err(e) => {
                out.failures.push(e.to_string());
                out.traces.push(*e.trace);
            }
        }
    }
    out
}

/// File name for an example's trace; ids are not trusted as path segments.
pub fn trace_path(dir: &Path, id: &str) -> PathBuf {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    dir.join(format!("{safe}.trace.json"))
}

pub fn predictions_jsonl(preds: &[Prediction]) -> String {
    preds
        .iter()
        .map(|p| serde_json::to_string(p).expect("prediction serializes") + "\n")
        .collect()
}
