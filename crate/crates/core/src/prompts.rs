//! Input/target rendering for every reasoning task and parsing of raw
//! generations back into slot values.
//!
//! Templates follow the sentinel-infilling format the seq2seq model was
//! pretrained on: each output item is preceded by a sentinel token, both in
//! the prompt and in the target string.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::types::QTypeState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
    T10,
    T11,
    T12,
    T13,
    Baseline,
}

impl TaskId {
    pub const ALL: [TaskId; 14] = [
        TaskId::T1,
        TaskId::T2,
        TaskId::T3,
        TaskId::T4,
        TaskId::T5,
        TaskId::T6,
        TaskId::T7,
        TaskId::T8,
        TaskId::T9,
        TaskId::T10,
        TaskId::T11,
        TaskId::T12,
        TaskId::T13,
        TaskId::Baseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::T1 => "T1",
            TaskId::T2 => "T2",
            TaskId::T3 => "T3",
            TaskId::T4 => "T4",
            TaskId::T5 => "T5",
            TaskId::T6 => "T6",
            TaskId::T7 => "T7",
            TaskId::T8 => "T8",
            TaskId::T9 => "T9",
            TaskId::T10 => "T10",
            TaskId::T11 => "T11",
            TaskId::T12 => "T12",
            TaskId::T13 => "T13",
            TaskId::Baseline => "Baseline",
        }
    }

    /// Control tasks set routing variables instead of producing text.
    pub fn is_control(self) -> bool {
        matches!(self, TaskId::T1 | TaskId::T3 | TaskId::T4)
    }

    pub fn output_arity(self) -> usize {
        match self {
            TaskId::T1 | TaskId::T2 | TaskId::T11 => 2,
            _ => 1,
        }
    }

    fn template(self) -> &'static str {
        match self {
            TaskId::T1 => "Context 1: {p1} Context 2: {p2} Answer: {a} Common entities found: {S0} Question type: {S1}",
            TaskId::T2 => "Context 1: {p1} Context 2: {p2} Answer: {a} Common entities found: {S0} Bridge entity: {S1}",
            TaskId::T3 => "Answer: {a} is {S0} in context: {p}",
            TaskId::T4 => "Entities: {a} and {b} are {S0}.",
            TaskId::T5 => "Context: {p} Bridge entity: {b} Answer: {a} Assertion: {S0}",
            TaskId::T6 => "Context: {p} Bridge entity: {b} Assertion: {S0}",
            TaskId::T7 => "Bridge entity: {b} Assertion 1: {s1} Assertion 2: {s2} Combined: {S0}",
            TaskId::T8 => "Removing bridge entity: {b} from: {c} We get: {S0}",
            TaskId::T9 => "Contract answer entity {a} from: {c-b} We get: {S0}",
            TaskId::T10 => "Turn: {c-b-a} into question: {S0}",
            TaskId::T11 => "Context 1: {p1} Context 2: {p2} Answer: {a} Assertion from Context 1: {S0} Assertion from Context 2: {S1}",
            TaskId::T12 => "Assertion 1: {s1} Assertion 2: {s2} Combine, compare and think: {S0}",
            TaskId::T13 => "Combined assertion: {c} Answer: {a} Question: {S0}",
            TaskId::Baseline => "Context 1: {p1} Context 2: {p2} Answer: {a} Question type: {S0}",
        }
    }

    /// Slots substituted into the prompt.
    pub fn input_slots(self) -> Vec<Slot> {
        pieces(self.template())
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s),
                _ => None,
            })
            .collect()
    }

    /// Slots accepted alongside the prompt slots but not rendered. Task 10
    /// consumes `c−b` and `a` as metadata only.
    pub fn carried_slots(self) -> &'static [Slot] {
        match self {
            TaskId::T10 => &[Slot::CombinedMinusBridge, Slot::Answer],
            _ => &[],
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown task '{s}'"))
    }
}

/// Named input slot of a prompt template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    #[serde(rename = "p1")]
    P1,
    #[serde(rename = "p2")]
    P2,
    /// The single passage `p_i` of a per-passage task.
    #[serde(rename = "p")]
    Passage,
    #[serde(rename = "a")]
    Answer,
    #[serde(rename = "b")]
    Bridge,
    #[serde(rename = "s1")]
    S1,
    #[serde(rename = "s2")]
    S2,
    #[serde(rename = "c")]
    Combined,
    #[serde(rename = "c-b")]
    CombinedMinusBridge,
    #[serde(rename = "c-b-a")]
    CombinedMinusBridgeAnswer,
}

impl Slot {
    pub fn name(self) -> &'static str {
        match self {
            Slot::P1 => "p1",
            Slot::P2 => "p2",
            Slot::Passage => "p",
            Slot::Answer => "a",
            Slot::Bridge => "b",
            Slot::S1 => "s1",
            Slot::S2 => "s2",
            Slot::Combined => "c",
            Slot::CombinedMinusBridge => "c-b",
            Slot::CombinedMinusBridgeAnswer => "c-b-a",
        }
    }

    fn from_name(name: &str) -> Option<Slot> {
        [
            Slot::P1,
            Slot::P2,
            Slot::Passage,
            Slot::Answer,
            Slot::Bridge,
            Slot::S1,
            Slot::S2,
            Slot::Combined,
            Slot::CombinedMinusBridge,
            Slot::CombinedMinusBridgeAnswer,
        ]
        .into_iter()
        .find(|s| s.name() == name)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type Slots = BTreeMap<Slot, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentinelConfig {
    sentinel_0: String,
    sentinel_1: String,
}

impl Default for SentinelConfig {
    fn default() -> Self {
        Self {
            sentinel_0: "<extra_id_0>".into(),
            sentinel_1: "<extra_id_1>".into(),
        }
    }
}

impl SentinelConfig {
    pub fn new(s0: impl Into<String>, s1: impl Into<String>) -> Result<Self, PromptError> {
        let (s0, s1) = (s0.into(), s1.into());
        if s0.is_empty() || s1.is_empty() || s0.contains(&s1) || s1.contains(&s0) {
            return Err(PromptError::BadSentinels(s0, s1));
        }
        Ok(Self {
            sentinel_0: s0,
            sentinel_1: s1,
        })
    }

    pub fn s0(&self) -> &str {
        &self.sentinel_0
    }

    pub fn s1(&self) -> &str {
        &self.sentinel_1
    }

    fn get(&self, i: usize) -> &str {
        if i == 0 {
            &self.sentinel_0
        } else {
            &self.sentinel_1
        }
    }

    fn occurs_in(&self, text: &str) -> bool {
        text.contains(self.s0()) || text.contains(self.s1())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("{task}: missing slot '{slot}'")]
    MissingSlot { task: TaskId, slot: Slot },
    #[error("{task}: unexpected slot '{slot}'")]
    ExtraSlot { task: TaskId, slot: Slot },
    #[error("{task}: value for '{slot}' contains a sentinel token")]
    SentinelInValue { task: TaskId, slot: Slot },
    #[error("{task}: expected {expected} output value(s), got {got}")]
    Arity { task: TaskId, expected: usize, got: usize },
    #[error("invalid sentinels '{0}' / '{1}': must be distinct, non-empty and not nested")]
    BadSentinels(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece<'t> {
    Lit(&'t str),
    Slot(Slot),
    Sentinel(usize),
}

fn pieces(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Piece::Lit(&rest[..open]));
        }
        let close = open + rest[open..].find('}').expect("template braces balance");
        let name = &rest[open + 1..close];
        out.push(match name {
            "S0" => Piece::Sentinel(0),
            "S1" => Piece::Sentinel(1),
            other => Piece::Slot(Slot::from_name(other).expect("template slot name is known")),
        });
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        out.push(Piece::Lit(rest));
    }
    out
}

/// Renders the prompt for `task`, substituting slot values verbatim.
pub fn render_input(task: TaskId, slots: &Slots, s: &SentinelConfig) -> Result<String, PromptError> {
    let required = task.input_slots();
    for slot in &required {
        if !slots.contains_key(slot) {
            return Err(PromptError::MissingSlot { task, slot: *slot });
        }
    }
    for (slot, value) in slots {
        if !required.contains(slot) && !task.carried_slots().contains(slot) {
            return Err(PromptError::ExtraSlot { task, slot: *slot });
        }
        if s.occurs_in(value) {
            return Err(PromptError::SentinelInValue { task, slot: *slot });
        }
    }
    let mut out = String::new();
    for piece in pieces(task.template()) {
        match piece {
            Piece::Lit(l) => out.push_str(l),
            Piece::Slot(slot) => out.push_str(&slots[&slot]),
            Piece::Sentinel(i) => out.push_str(s.get(i)),
        }
    }
    Ok(out)
}

/// Renders the target string `<s0> v0` or `<s0> v0 <s1> v1`.
pub fn render_target<V: AsRef<str>>(task: TaskId, outputs: &[V], s: &SentinelConfig) -> Result<String, PromptError> {
    let expected = task.output_arity();
    if outputs.len() != expected {
        return Err(PromptError::Arity {
            task,
            expected,
            got: outputs.len(),
        });
    }
    let mut out = String::new();
    for (i, v) in outputs.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(s.get(i));
        out.push(' ');
        out.push_str(v.as_ref());
    }
    Ok(out)
}

/// A generation that does not contain the expected sentinels.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{task}: cannot parse generation ({reason}): {raw:?}")]
pub struct ParseFailure {
    pub task: TaskId,
    pub raw: String,
    pub reason: String,
}

fn next_sentinel(text: &str, from: usize, s: &SentinelConfig) -> usize {
    [s.s0(), s.s1()]
        .iter()
        .filter_map(|sent| text[from..].find(sent).map(|p| from + p))
        .min()
        .unwrap_or(text.len())
}

/// Splits a raw generation on the sentinels, returning trimmed values.
/// Anything after the last expected slot's value is discarded.
pub fn parse_output(task: TaskId, raw: &str, s: &SentinelConfig) -> Result<Vec<String>, ParseFailure> {
    let fail = |reason: String| ParseFailure {
        task,
        raw: raw.to_string(),
        reason,
    };
    let mut values = Vec::with_capacity(task.output_arity());
    let mut cursor = 0;
    for i in 0..task.output_arity() {
        let sent = s.get(i);
        let at = raw[cursor..]
            .find(sent)
            .map(|p| cursor + p)
            .ok_or_else(|| fail(format!("sentinel {sent} not found")))?;
        let start = at + sent.len();
        let end = next_sentinel(raw, start, s);
        values.push(raw[start..end].trim().to_string());
        cursor = start;
    }
    Ok(values)
}

pub const PRESENT: &str = "present";
pub const ABSENT: &str = "absent";
pub const SAME: &str = "the same";
pub const DIFFERENT: &str = "different";

/// Target word for the answer-presence task.
pub fn presence_word(present: bool) -> &'static str {
    if present {
        PRESENT
    } else {
        ABSENT
    }
}

/// Target phrase for the answer/bridge identity task.
pub fn sameness_word(same: bool) -> &'static str {
    if same {
        SAME
    } else {
        DIFFERENT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlOutcome {
    QuestionType(QTypeState),
    Flag(bool),
    /// Unrecognized value; the caller applies its fallback.
    Fallback,
}

/// Maps a control task's generated value onto its control variable.
pub fn parse_control(task: TaskId, value: &str) -> ControlOutcome {
    let v = value.trim().to_lowercase();
    match task {
        TaskId::T1 => ControlOutcome::QuestionType(match v.as_str() {
            "bridge" => QTypeState::Bridge,
            "comparison" => QTypeState::Comparison,
            _ => QTypeState::Confused,
        }),
        TaskId::T3 => match v.as_str() {
            PRESENT => ControlOutcome::Flag(true),
            ABSENT => ControlOutcome::Flag(false),
            _ => ControlOutcome::Fallback,
        },
        TaskId::T4 => match v.as_str() {
            SAME => ControlOutcome::Flag(true),
            DIFFERENT => ControlOutcome::Flag(false),
            _ => ControlOutcome::Fallback,
        },
        other => panic!("{other} is not a control task"),
    }
}
