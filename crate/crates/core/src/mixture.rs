//! Turns rationale annotations into per-task training records and samples
//! k-shot train/validation mixtures.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::annotation::{select_context, ContextError};
use crate::entities::{common_entities_slot, StopWords};
use crate::prompts::{
    presence_word, render_input, render_target, sameness_word, PromptError, SentinelConfig, Slot, Slots, TaskId,
};
use crate::rng;
use crate::routing::bridge_statement_plan;
use crate::types::{AnnotatedExample, ContextMode, PassageIndex, QuestionType, Rationale, Split};

/// One (prompt, target) training record for one reasoning step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskInstance {
    pub task: TaskId,
    pub example_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passage: Option<PassageIndex>,
    pub input_prompt: String,
    pub target: String,
    /// Slot values the prompt was rendered from, carried slots included.
    pub meta: Slots,
}

impl TaskInstance {
    fn sort_key(&self) -> (&str, TaskId, Option<PassageIndex>) {
        (&self.example_id, self.task, self.passage)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExpandError {
    #[error("{id}: {source}")]
    Context { id: String, source: ContextError },
    #[error("{id}: {source}")]
    Prompt { id: String, source: PromptError },
    #[error("{id}: annotation lacks {field}")]
    Missing { id: String, field: &'static str },
}

fn default_stopwords() -> &'static StopWords {
    static STOP: OnceLock<StopWords> = OnceLock::new();
    STOP.get_or_init(StopWords::default)
}

struct Builder<'a> {
    id: &'a str,
    s: &'a SentinelConfig,
    out: Vec<TaskInstance>,
}

impl Builder<'_> {
    fn push<V: AsRef<str>>(
        &mut self,
        task: TaskId,
        passage: Option<PassageIndex>,
        slots: &[(Slot, &str)],
        outputs: &[V],
    ) -> Result<(), ExpandError> {
        let meta: Slots = slots.iter().map(|(k, v)| (*k, v.to_string())).collect();
        let wrap = |source| ExpandError::Prompt {
            id: self.id.to_string(),
            source,
        };
        let input_prompt = render_input(task, &meta, self.s).map_err(wrap)?;
        let target = render_target(task, outputs, self.s).map_err(wrap)?;
        self.out.push(TaskInstance {
            task,
            example_id: self.id.to_string(),
            passage,
            input_prompt,
            target,
            meta,
        });
        Ok(())
    }
}

/// Every training record an annotation yields, following the routing rules
/// for its control values.
pub fn expand_annotation(
    a: &AnnotatedExample,
    mode: ContextMode,
    s: &SentinelConfig,
) -> Result<Vec<TaskInstance>, ExpandError> {
    expand_annotation_with(a, mode, s, default_stopwords())
}

pub fn expand_annotation_with(
    a: &AnnotatedExample,
    mode: ContextMode,
    s: &SentinelConfig,
    stop: &StopWords,
) -> Result<Vec<TaskInstance>, ExpandError> {
    let id = a.id();
    let ctx = |idx: PassageIndex| {
        select_context(a.example.input.passage(idx), mode).map_err(|source| ExpandError::Context {
            id: id.to_string(),
            source,
        })
    };
    let (p1, p2) = (ctx(PassageIndex::First)?, ctx(PassageIndex::Second)?);
    let ans = a.example.input.answer.as_str();
    let entities = common_entities_slot(&p1, &p2, stop);
    let mut bld = Builder { id, s, out: Vec::new() };
    let head = [(Slot::P1, p1.as_str()), (Slot::P2, p2.as_str()), (Slot::Answer, ans)];

    match &a.rationale {
        Rationale::Comparison(c) => {
            bld.push(TaskId::T1, None, &head, &[entities.as_str(), "comparison"])?;
            bld.push(TaskId::T11, None, &head, &[&c.s1, &c.s2])?;
            bld.push(
                TaskId::T12,
                None,
                &[(Slot::S1, &c.s1), (Slot::S2, &c.s2)],
                &[&c.combined],
            )?;
            bld.push(
                TaskId::T13,
                None,
                &[(Slot::Combined, &c.combined), (Slot::Answer, ans)],
                &[&c.question],
            )?;
        }
        Rationale::Bridge(r) => {
            let missing = |field| ExpandError::Missing {
                id: id.to_string(),
                field,
            };
            let st = r.controls;
            let same = st.same_a_b.ok_or_else(|| missing("same_a_b"))?;
            let plan = bridge_statement_plan(&st).map_err(|_| missing("control values"))?;
            let b = r.bridge.as_str();

            bld.push(TaskId::T1, None, &head, &[entities.as_str(), "bridge"])?;
            bld.push(TaskId::T2, None, &head, &[entities.as_str(), b])?;
            for idx in PassageIndex::BOTH {
                let present = st.answer_in(idx).ok_or_else(|| missing("in_a_p flags"))?;
                let p = if idx == PassageIndex::First { &p1 } else { &p2 };
                bld.push(
                    TaskId::T3,
                    Some(idx),
                    &[(Slot::Answer, ans), (Slot::Passage, p)],
                    &[presence_word(present)],
                )?;
            }
            bld.push(
                TaskId::T4,
                None,
                &[(Slot::Answer, ans), (Slot::Bridge, b)],
                &[sameness_word(same)],
            )?;
            for step in plan {
                let idx = step.passage.expect("statement steps are per passage");
                let p = if idx == PassageIndex::First { &p1 } else { &p2 };
                let stmt = r
                    .statement(idx)
                    .ok_or_else(|| missing(if idx == PassageIndex::First { "s1" } else { "s2" }))?;
                let mut slots = vec![(Slot::Passage, p.as_str()), (Slot::Bridge, b)];
                if step.task == TaskId::T5 {
                    slots.push((Slot::Answer, ans));
                }
                bld.push(step.task, Some(idx), &slots, &[stmt])?;
            }
            let s1 = r.s1.as_deref().ok_or_else(|| missing("s1"))?;
            let s2 = r.s2.as_deref().ok_or_else(|| missing("s2"))?;
            bld.push(
                TaskId::T7,
                None,
                &[(Slot::Bridge, b), (Slot::S1, s1), (Slot::S2, s2)],
                &[&r.combined],
            )?;
            if !same {
                let cb = r
                    .combined_minus_bridge
                    .as_deref()
                    .ok_or_else(|| missing("combined_minus_bridge"))?;
                bld.push(
                    TaskId::T8,
                    None,
                    &[(Slot::Bridge, b), (Slot::Combined, &r.combined)],
                    &[cb],
                )?;
            }
            let cb = r.contraction_input();
            bld.push(
                TaskId::T9,
                None,
                &[(Slot::Answer, ans), (Slot::CombinedMinusBridge, cb)],
                &[&r.combined_minus_bridge_answer],
            )?;
            bld.push(
                TaskId::T10,
                None,
                &[
                    (Slot::CombinedMinusBridgeAnswer, &r.combined_minus_bridge_answer),
                    (Slot::CombinedMinusBridge, cb),
                    (Slot::Answer, ans),
                ],
                &[&r.question],
            )?;
        }
    }
    Ok(bld.out)
}

/// Single-prompt baseline record: passages and answer in, question out.
pub fn baseline_instance(
    a: &AnnotatedExample,
    mode: ContextMode,
    s: &SentinelConfig,
) -> Result<TaskInstance, ExpandError> {
    let id = a.id();
    let ctx = |idx: PassageIndex| {
        select_context(a.example.input.passage(idx), mode).map_err(|source| ExpandError::Context {
            id: id.to_string(),
            source,
        })
    };
    let (p1, p2) = (ctx(PassageIndex::First)?, ctx(PassageIndex::Second)?);
    let mut bld = Builder { id, s, out: Vec::new() };
    bld.push(
        TaskId::Baseline,
        None,
        &[
            (Slot::P1, p1.as_str()),
            (Slot::P2, p2.as_str()),
            (Slot::Answer, &a.example.input.answer),
        ],
        &[a.rationale.question()],
    )?;
    Ok(bld.out.pop().expect("one instance pushed"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MixtureSpec {
    pub k_train: usize,
    pub seed: u64,
    pub context_mode: ContextMode,
    pub include_baseline: bool,
}

/// Per-type sample sizes for one split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TypeCounts {
    pub bridge: usize,
    pub comparison: usize,
}

impl TypeCounts {
    pub fn total(&self) -> usize {
        self.bridge + self.comparison
    }

    fn get(&self, t: QuestionType) -> usize {
        match t {
            QuestionType::Bridge => self.bridge,
            QuestionType::Comparison => self.comparison,
        }
    }
}

pub const VAL_BRIDGE_CAP: usize = 32;
pub const VAL_COMPARISON_CAP: usize = 24;

/// round(0.75 k) bridge examples, the rest comparison.
pub fn train_counts(k: usize) -> TypeCounts {
    let bridge = (3 * k + 2) / 4;
    TypeCounts {
        bridge,
        comparison: k - bridge,
    }
}

/// Validation mirrors the training split until the dev caps bite.
pub fn val_counts(k: usize) -> TypeCounts {
    let t = train_counts(k);
    TypeCounts {
        bridge: t.bridge.min(VAL_BRIDGE_CAP),
        comparison: t.comparison.min(VAL_COMPARISON_CAP),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortfall {
    pub split: Split,
    pub kind: QuestionType,
    pub required: usize,
    pub available: usize,
}

impl fmt::Display for Shortfall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let split = match self.split {
            Split::TrainPool => "train_pool",
            Split::DevPool => "dev_pool",
        };
        write!(
            f,
            "{split} {}: required {}, available {}",
            self.kind, self.required, self.available
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SampleError {
    #[error("k must be at least 1")]
    ZeroShots,
    #[error("insufficient annotations: {}", .0.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("; "))]
    Capacity(Vec<Shortfall>),
    #[error("example id '{0}' appears more than once in the annotation pool")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KShot {
    pub train: Vec<AnnotatedExample>,
    pub val: Vec<AnnotatedExample>,
}

impl KShot {
    pub fn counts(list: &[AnnotatedExample]) -> TypeCounts {
        let bridge = list
            .iter()
            .filter(|a| a.question_type() == QuestionType::Bridge)
            .count();
        TypeCounts {
            bridge,
            comparison: list.len() - bridge,
        }
    }
}

fn group(pool: &[AnnotatedExample], split: Split, kind: QuestionType) -> Vec<&AnnotatedExample> {
    let mut v: Vec<_> = pool
        .iter()
        .filter(|a| a.split == split && a.question_type() == kind)
        .collect();
    v.sort_by(|a, b| a.id().cmp(b.id()));
    v
}

/// Seeded k-shot sample: training examples from the train pool, validation
/// examples from the dev pool. A `k` equal to the train pool size takes the
/// whole train pool.
pub fn sample_kshot(pool: &[AnnotatedExample], spec: &MixtureSpec) -> Result<KShot, SampleError> {
    let k = spec.k_train;
    if k == 0 {
        return Err(SampleError::ZeroShots);
    }
    let mut seen = HashSet::new();
    for a in pool {
        if !seen.insert(a.id()) {
            return Err(SampleError::DuplicateId(a.id().to_string()));
        }
    }
    let train_pool_size = pool.iter().filter(|a| a.split == Split::TrainPool).count();
    let want_train = if k == train_pool_size {
        KShot::counts(
            &pool
                .iter()
                .filter(|a| a.split == Split::TrainPool)
                .cloned()
                .collect::<Vec<_>>(),
        )
    } else {
        train_counts(k)
    };
    let plan = [(Split::TrainPool, want_train), (Split::DevPool, val_counts(k))];

    let mut shortfalls = Vec::new();
    for (split, want) in plan {
        for kind in [QuestionType::Bridge, QuestionType::Comparison] {
            let available = group(pool, split, kind).len();
            let required = want.get(kind);
            if required > available {
                shortfalls.push(Shortfall {
                    split,
                    kind,
                    required,
                    available,
                });
            }
        }
    }
    if !shortfalls.is_empty() {
        return Err(SampleError::Capacity(shortfalls));
    }

    let mut r = rng::seeded(spec.seed);
    let mut draw = |split, want: TypeCounts| {
        let mut out = Vec::new();
        for kind in [QuestionType::Bridge, QuestionType::Comparison] {
            let g = group(pool, split, kind);
            out.extend(rng::shuffled_prefix(&g, want.get(kind), &mut r).into_iter().cloned());
        }
        out.sort_by(|a: &AnnotatedExample, b| a.id().cmp(b.id()));
        out
    };
    let train = draw(Split::TrainPool, plan[0].1);
    let val = draw(Split::DevPool, plan[1].1);
    Ok(KShot { train, val })
}

/// Expands a list of annotations, optionally adding one baseline record each.
pub fn expand_all(
    list: &[AnnotatedExample],
    mode: ContextMode,
    s: &SentinelConfig,
    include_baseline: bool,
) -> Result<Vec<TaskInstance>, ExpandError> {
    let mut out = Vec::new();
    for a in list {
        out.extend(expand_annotation(a, mode, s)?);
        if include_baseline {
            out.push(baseline_instance(a, mode, s)?);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct TrainingRecord<'a> {
    task: TaskId,
    example_id: &'a str,
    input: &'a str,
    target: &'a str,
}

/// JSON lines `{task, example_id, input, target}`, stably sorted by
/// (example_id, task, passage). Duplicates are kept.
pub fn training_jsonl(instances: &[TaskInstance]) -> String {
    let mut sorted: Vec<&TaskInstance> = instances.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut out = String::new();
    for i in sorted {
        let rec = TrainingRecord {
            task: i.task,
            example_id: &i.example_id,
            input: &i.input_prompt,
            target: &i.target,
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn emit_training_file(instances: &[TaskInstance], path: impl AsRef<Path>) -> std::io::Result<usize> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(training_jsonl(instances).as_bytes())?;
    f.flush()?;
    Ok(instances.len())
}

/// Exact per-task histogram; every task appears, zeros included.
pub fn mixture_stats(instances: &[TaskInstance]) -> BTreeMap<TaskId, usize> {
    let mut m: BTreeMap<TaskId, usize> = TaskId::ALL.iter().map(|&t| (t, 0)).collect();
    for i in instances {
        *m.entry(i.task).or_insert(0) += 1;
    }
    m
}

pub fn format_stats(stats: &BTreeMap<TaskId, usize>) -> String {
    let mut out = String::from("task      count\n");
    for (t, n) in stats {
        out.push_str(&format!("{:<9} {n}\n", t.as_str()));
    }
    out.push_str(&format!("{:<9} {}\n", "total", stats.values().sum::<usize>()));
    out
}

/// Inputs longer than this many characters are reported; truncation is the
/// training stack's business.
pub const LONG_INPUT_CHARS: usize = 4096;

pub fn long_inputs(instances: &[TaskInstance], max_chars: usize) -> Vec<(&str, TaskId, usize)> {
    instances
        .iter()
        .map(|i| (i.example_id.as_str(), i.task, i.input_prompt.chars().count()))
        .filter(|&(_, _, n)| n > max_chars)
        .collect()
}

pub const LEARNING_RATE: f64 = 0.00002;
pub const SCHEDULE: &str = "constant lr, no warm-up; max(35 epochs, 5000 steps)";

/// Sidecar written next to a training file for downstream trainers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MixtureMetadata {
    pub k: usize,
    pub seed: u64,
    pub context_mode: ContextMode,
    pub include_baseline: bool,
    pub lr: f64,
    pub schedule: String,
    pub train_examples: usize,
    pub val_examples: usize,
    pub train_records: usize,
    pub val_records: usize,
    pub generator: String,
    pub version: String,
}

impl MixtureMetadata {
    pub fn new(spec: &MixtureSpec, kshot: &KShot, train_records: usize, val_records: usize) -> Self {
        Self {
            k: spec.k_train,
            seed: spec.seed,
            context_mode: spec.context_mode,
            include_baseline: spec.include_baseline,
            lr: LEARNING_RATE,
            schedule: SCHEDULE.into(),
            train_examples: kshot.train.len(),
            val_examples: kshot.val.len(),
            train_records,
            val_records,
            generator: rng::GENERATOR.into(),
            version: crate::VERSION.into(),
        }
    }
}
