//! Dataset and annotation file parsing, canonical annotation serialization,
//! structural validation and encoder context selection.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::metrics::contains_span;
use crate::types::{
    AnnotatedExample, BridgeRationale, ComparisonRationale, ContextMode, ControlState, GoldExample, MqgInput, Passage,
    QuestionType, Rationale, Split,
};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("record {record}: missing field '{field}'")]
    MissingField { record: String, field: String },
    #[error("record {record}: {message}")]
    Schema { record: String, message: String },
    #[error("{} record(s) failed validation:\n{}", .0.len(), render_reports(.0))]
    Invalid(Vec<ValidationReport>),
}

fn render_reports(reports: &[ValidationReport]) -> String {
    reports.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n")
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn json_error(e: serde_json::Error, line_offset: usize) -> DataError {
    DataError::Json {
        line: e.line() + line_offset,
        column: e.column(),
        message: e.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Dataset files

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRecord {
    id: String,
    p1: Passage,
    p2: Passage,
    answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_type: Option<QuestionType>,
}

const DATASET_REQUIRED: &[&str] = &["id", "p1", "p2", "answer"];
const PASSAGE_REQUIRED: &[&str] = &["title", "sentences"];

fn record_label(v: &Value, index: usize) -> String {
    match v.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
        None => format!("#{index}"),
    }
}

fn check_required(v: &Value, index: usize) -> Result<(), DataError> {
    let missing = |field: String| DataError::MissingField {
        record: record_label(v, index),
        field,
    };
    for f in DATASET_REQUIRED {
        if v.get(f).is_none() {
            return Err(missing(f.to_string()));
        }
    }
    for p in ["p1", "p2"] {
        for f in PASSAGE_REQUIRED {
            if v[p].get(f).is_none() {
                return Err(missing(format!("{p}.{f}")));
            }
        }
    }
    Ok(())
}

/// Parses a JSON array of dataset records. Passage order is preserved.
pub fn parse_dataset_str(text: &str) -> Result<Vec<GoldExample>, DataError> {
    let values: Vec<Value> = serde_json::from_str(text).map_err(|e| json_error(e, 0))?;
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.into_iter().enumerate() {
        check_required(&v, i)?;
        let label = record_label(&v, i);
        let rec: DatasetRecord = serde_json::from_value(v).map_err(|e| DataError::Schema {
            record: label,
            message: e.to_string(),
        })?;
        out.push(GoldExample {
            id: rec.id,
            input: MqgInput {
                p1: rec.p1,
                p2: rec.p2,
                answer: rec.answer,
            },
            gold_question: rec.gold_question,
            gold_type: rec.gold_type,
        });
    }
    Ok(out)
}

pub fn parse_dataset_file(path: impl AsRef<Path>) -> Result<Vec<GoldExample>, DataError> {
    parse_dataset_str(&read(path.as_ref())?)
}

/// Serializes examples in the dataset file format (pretty-printed array).
pub fn dataset_to_string(examples: &[GoldExample]) -> String {
    let recs: Vec<DatasetRecord> = examples
        .iter()
        .map(|g| DatasetRecord {
            id: g.id.clone(),
            p1: g.input.p1.clone(),
            p2: g.input.p2.clone(),
            answer: g.input.answer.clone(),
            gold_question: g.gold_question.clone(),
            gold_type: g.gold_type,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&recs).expect("dataset records serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Annotation files

/// One line of the canonical annotation format. Field order here is the
/// canonical field order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRecord {
    id: String,
    split: Option<Split>,
    gold_type: Option<QuestionType>,
    p1: Passage,
    p2: Passage,
    answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bridge: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    combined: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    combined_minus_bridge: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    combined_minus_bridge_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_a_p1: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_a_p2: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    same_a_b: Option<bool>,
}

impl AnnotationRecord {
    fn into_annotated(self) -> Result<AnnotatedExample, DataError> {
        let id = self.id.clone();
        let missing = |field: &str| DataError::MissingField {
            record: id.clone(),
            field: field.to_string(),
        };
        let split = self.split.ok_or_else(|| missing("split"))?;
        let gold_type = self.gold_type.ok_or_else(|| missing("gold_type"))?;
        let rationale = match gold_type {
            QuestionType::Bridge => {
                let controls = ControlState::bridge(
                    self.in_a_p1.ok_or_else(|| missing("in_a_p1"))?,
                    self.in_a_p2.ok_or_else(|| missing("in_a_p2"))?,
                    self.same_a_b.ok_or_else(|| missing("same_a_b"))?,
                );
                Rationale::Bridge(BridgeRationale {
                    bridge: self.bridge.ok_or_else(|| missing("bridge"))?,
                    s1: self.s1,
                    s2: self.s2,
                    combined: self.combined.ok_or_else(|| missing("combined"))?,
                    combined_minus_bridge: self.combined_minus_bridge,
                    combined_minus_bridge_answer: self
                        .combined_minus_bridge_answer
                        .ok_or_else(|| missing("combined_minus_bridge_answer"))?,
                    question: self.question.ok_or_else(|| missing("question"))?,
                    controls,
                })
            }
            QuestionType::Comparison => {
                let stray = [
                    ("bridge", self.bridge.is_some()),
                    ("combined_minus_bridge", self.combined_minus_bridge.is_some()),
                    (
                        "combined_minus_bridge_answer",
                        self.combined_minus_bridge_answer.is_some(),
                    ),
                    ("in_a_p1", self.in_a_p1.is_some()),
                    ("in_a_p2", self.in_a_p2.is_some()),
                    ("same_a_b", self.same_a_b.is_some()),
                ];
                if let Some((field, _)) = stray.iter().find(|(_, present)| *present) {
                    return Err(DataError::Schema {
                        record: id,
                        message: format!("field '{field}' is not allowed on a comparison record"),
                    });
                }
                Rationale::Comparison(ComparisonRationale {
                    s1: self.s1.ok_or_else(|| missing("s1"))?,
                    s2: self.s2.ok_or_else(|| missing("s2"))?,
                    combined: self.combined.ok_or_else(|| missing("combined"))?,
                    question: self.question.ok_or_else(|| missing("question"))?,
                })
            }
        };
        Ok(AnnotatedExample {
            example: GoldExample {
                id: self.id,
                input: MqgInput {
                    p1: self.p1,
                    p2: self.p2,
                    answer: self.answer,
                },
                gold_question: self.gold_question,
                gold_type: Some(gold_type),
            },
            rationale,
            split,
        })
    }

    fn from_annotated(a: &AnnotatedExample) -> Self {
        let g = &a.example;
        let mut rec = AnnotationRecord {
            id: g.id.clone(),
            split: Some(a.split),
            gold_type: Some(g.gold_type.unwrap_or(a.question_type())),
            p1: g.input.p1.clone(),
            p2: g.input.p2.clone(),
            answer: g.input.answer.clone(),
            gold_question: g.gold_question.clone(),
            bridge: None,
            s1: None,
            s2: None,
            combined: None,
            combined_minus_bridge: None,
            combined_minus_bridge_answer: None,
            question: None,
            in_a_p1: None,
            in_a_p2: None,
            same_a_b: None,
        };
        match &a.rationale {
            Rationale::Bridge(b) => {
                rec.bridge = Some(b.bridge.clone());
                rec.s1 = b.s1.clone();
                rec.s2 = b.s2.clone();
                rec.combined = Some(b.combined.clone());
                rec.combined_minus_bridge = b.combined_minus_bridge.clone();
                rec.combined_minus_bridge_answer = Some(b.combined_minus_bridge_answer.clone());
                rec.question = Some(b.question.clone());
                rec.in_a_p1 = b.controls.in_a_p1;
                rec.in_a_p2 = b.controls.in_a_p2;
                rec.same_a_b = b.controls.same_a_b;
            }
            Rationale::Comparison(c) => {
                rec.s1 = Some(c.s1.clone());
                rec.s2 = Some(c.s2.clone());
                rec.combined = Some(c.combined.clone());
                rec.question = Some(c.question.clone());
            }
        }
        rec
    }
}

/// Parses JSON-lines annotations without validating them.
pub fn parse_annotations_unchecked(text: &str) -> Result<Vec<AnnotatedExample>, DataError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord = serde_json::from_str(line).map_err(|e| {
            if e.is_data() {
                let record = serde_json::from_str::<Value>(line)
                    .map(|v| record_label(&v, i))
                    .unwrap_or_else(|_| format!("line {}", i + 1));
                let message = e.to_string();
                match missing_field_name(&message) {
                    Some(field) => DataError::MissingField { record, field },
                    None => DataError::Schema { record, message },
                }
            } else {
                json_error(e, i)
            }
        })?;
        out.push(rec.into_annotated()?);
    }
    Ok(out)
}

fn missing_field_name(message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

/// Parses and validates an annotation file. Any record with validation
/// errors rejects the whole file; the error lists every failing record.
pub fn parse_annotations_str(text: &str) -> Result<Vec<AnnotatedExample>, DataError> {
    let recs = parse_annotations_unchecked(text)?;
    let failures: Vec<ValidationReport> = recs.iter().map(validate_annotation).filter(|r| !r.is_valid()).collect();
    if failures.is_empty() {
        Ok(recs)
    } else {
        Err(DataError::Invalid(failures))
    }
}

pub fn parse_annotation_file(path: impl AsRef<Path>) -> Result<Vec<AnnotatedExample>, DataError> {
    parse_annotations_str(&read(path.as_ref())?)
}

/// Canonical single-line form of one annotation.
pub fn annotation_to_line(a: &AnnotatedExample) -> String {
    serde_json::to_string(&AnnotationRecord::from_annotated(a)).expect("annotation serializes")
}

/// Canonical file form: one record per line, each newline-terminated.
pub fn annotations_to_string(records: &[AnnotatedExample]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&annotation_to_line(r));
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub severity: Severity,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub id: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Warning)
    }

    /// No error-severity violations. Warnings do not reject a record.
    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let sev = match v.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, "{}: {} [{}] {}", self.id, sev, v.rule, v.detail)?;
        }
        Ok(())
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn error(&mut self, rule: &'static str, detail: impl Into<String>) {
        self.0.push(Violation {
            rule,
            severity: Severity::Error,
            detail: detail.into(),
        });
    }

    fn warn(&mut self, rule: &'static str, detail: impl Into<String>) {
        self.0.push(Violation {
            rule,
            severity: Severity::Warning,
            detail: detail.into(),
        });
    }

    fn non_empty(&mut self, field: &str, value: &str) {
        if value.trim().is_empty() {
            self.error("empty-field", format!("{field} is empty"));
        }
    }
}

/// Checks the structural rules of a rationale annotation.
///
/// Span containment uses the evaluation tokenizer (case-insensitive token
/// sequence match). Annotator control flags that disagree with the
/// containment test are reported as warnings only.
pub fn validate_annotation(a: &AnnotatedExample) -> ValidationReport {
    let mut c = Collector(Vec::new());
    let input = &a.example.input;

    for (name, p) in [("p1", &input.p1), ("p2", &input.p2)] {
        for problem in p.problems() {
            c.error("passage-invalid", format!("{name}: {problem}"));
        }
    }
    if input.answer.trim().is_empty() {
        c.error("empty-answer", "answer is empty");
    }
    if let Some(t) = a.example.gold_type {
        if t != a.question_type() {
            c.error(
                "type-mismatch",
                format!("gold_type is {t} but rationale is {}", a.question_type()),
            );
        }
    }

    let p1 = full_text(&input.p1);
    let p2 = full_text(&input.p2);
    let answer = input.answer.as_str();

    match &a.rationale {
        Rationale::Bridge(b) => {
            if b.bridge.trim().is_empty() {
                c.error("empty-bridge", "bridge entity is empty");
            } else if !(contains_span(&p1, &b.bridge) && contains_span(&p2, &b.bridge)) {
                c.error(
                    "bridge-not-in-both",
                    format!("bridge '{}' does not occur in both passages", b.bridge),
                );
            }
            if b.s1.is_none() || b.s2.is_none() {
                c.error("statement-missing", "bridge rationale needs both s1 and s2");
            }
            c.non_empty("combined", &b.combined);
            c.non_empty("combined_minus_bridge_answer", &b.combined_minus_bridge_answer);
            if b.question.trim().is_empty() {
                c.error("empty-question", "question is empty");
            }

            let (Some(in1), Some(in2), Some(same)) = (b.controls.in_a_p1, b.controls.in_a_p2, b.controls.same_a_b)
            else {
                c.error("controls-unset", "bridge controls must all be set");
                return ValidationReport {
                    id: a.id().to_string(),
                    violations: c.0,
                };
            };

            match (&b.combined_minus_bridge, same) {
                (Some(_), true) => c.error(
                    "skip-mismatch",
                    "combined_minus_bridge present although same_a_b is true",
                ),
                (None, false) => c.error(
                    "skip-mismatch",
                    "combined_minus_bridge absent although same_a_b is false",
                ),
                _ => {}
            }
            if let Some(cb) = &b.combined_minus_bridge {
                c.non_empty("combined_minus_bridge", cb);
                if contains_span(cb, &b.bridge) {
                    c.error(
                        "bridge-not-contracted",
                        format!("combined_minus_bridge still contains '{}'", b.bridge),
                    );
                }
            }
            let cba = &b.combined_minus_bridge_answer;
            if contains_span(cba, answer) {
                c.error(
                    "answer-not-contracted",
                    format!("combined_minus_bridge_answer still contains '{answer}'"),
                );
            }
            if contains_span(cba, &b.bridge) {
                c.error(
                    "bridge-not-contracted",
                    format!("combined_minus_bridge_answer still contains '{}'", b.bridge),
                );
            }

            if in1 != contains_span(&p1, answer) {
                c.warn("in-a-p1-mismatch", format!("in_a_p1={in1} disagrees with span test"));
            }
            if in2 != contains_span(&p2, answer) {
                c.warn("in-a-p2-mismatch", format!("in_a_p2={in2} disagrees with span test"));
            }
            if same != answer.trim().eq_ignore_ascii_case(b.bridge.trim()) {
                c.warn(
                    "same-a-b-mismatch",
                    format!("same_a_b={same} disagrees with string test"),
                );
            }
        }
        Rationale::Comparison(r) => {
            c.non_empty("s1", &r.s1);
            c.non_empty("s2", &r.s2);
            c.non_empty("combined", &r.combined);
            if r.question.trim().is_empty() {
                c.error("empty-question", "question is empty");
            }
        }
    }

    ValidationReport {
        id: a.id().to_string(),
        violations: c.0,
    }
}

// ---------------------------------------------------------------------------
// Context selection

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("passage '{0}' has no supporting sentence annotation")]
    NoSupporting(String),
    #[error("passage '{0}' has an empty supporting sentence set")]
    EmptySupporting(String),
    #[error("passage '{title}' supporting index {index} out of range")]
    OutOfRange { title: String, index: usize },
}

fn full_text(p: &Passage) -> String {
    format!("{} - {}", p.title, p.sentences.join(" "))
}

/// Renders a passage for the encoder: `title - sentence sentence ...`.
/// Supporting mode keeps only the supporting sentences, in passage order.
pub fn select_context(p: &Passage, mode: ContextMode) -> Result<String, ContextError> {
    match mode {
        ContextMode::Full => Ok(full_text(p)),
        ContextMode::Supporting => {
            let sup = p
                .supporting
                .as_ref()
                .ok_or_else(|| ContextError::NoSupporting(p.title.clone()))?;
            let mut idx = sup.clone();
            idx.sort_unstable();
            idx.dedup();
            if idx.is_empty() {
                return Err(ContextError::EmptySupporting(p.title.clone()));
            }
            let mut kept = Vec::with_capacity(idx.len());
            for i in idx {
                let s = p.sentences.get(i).ok_or_else(|| ContextError::OutOfRange {
                    title: p.title.clone(),
                    index: i,
                })?;
                kept.push(s.as_str());
            }
            Ok(format!("{} - {}", p.title, kept.join(" ")))
        }
    }
}
