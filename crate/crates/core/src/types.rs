//! Domain data model: passages, inputs, gold examples, rationales and the
//! routing controls a circuit run assigns.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A titled passage split into sentences, optionally marking the supporting
/// sentences needed to answer the gold question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub title: String,
    pub sentences: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supporting: Option<Vec<usize>>,
}

impl Passage {
    pub fn new(title: impl Into<String>, sentences: Vec<String>) -> Self {
        Self {
            title: title.into(),
            sentences,
            supporting: None,
        }
    }

    pub fn with_supporting(mut self, supporting: Vec<usize>) -> Self {
        self.supporting = Some(supporting);
        self
    }

    /// Structural problems with this passage, empty when well formed.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.sentences.is_empty() {
            out.push(format!("passage '{}' has no sentences", self.title));
        }
        if let Some(sup) = &self.supporting {
            for &i in sup {
                if i >= self.sentences.len() {
                    out.push(format!(
                        "passage '{}' supporting index {} out of range ({} sentences)",
                        self.title,
                        i,
                        self.sentences.len()
                    ));
                }
            }
        }
        out
    }
}

/// Two passages and a pre-defined answer span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MqgInput {
    pub p1: Passage,
    pub p2: Passage,
    pub answer: String,
}

impl MqgInput {
    pub fn passage(&self, index: PassageIndex) -> &Passage {
        match index {
            PassageIndex::First => &self.p1,
            PassageIndex::Second => &self.p2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Bridge,
    Comparison,
}

impl QuestionType {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Bridge => "bridge",
            QuestionType::Comparison => "comparison",
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the two input passages. Serialized as `1` or `2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PassageIndex {
    First,
    Second,
}

impl PassageIndex {
    pub const BOTH: [PassageIndex; 2] = [PassageIndex::First, PassageIndex::Second];

    pub fn number(self) -> u8 {
        match self {
            PassageIndex::First => 1,
            PassageIndex::Second => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(PassageIndex::First),
            2 => Some(PassageIndex::Second),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            PassageIndex::First => PassageIndex::Second,
            PassageIndex::Second => PassageIndex::First,
        }
    }
}

impl fmt::Display for PassageIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl Serialize for PassageIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for PassageIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let n = u8::deserialize(d)?;
        PassageIndex::from_number(n)
            .ok_or_else(|| serde::de::Error::custom(format!("passage index must be 1 or 2, got {n}")))
    }
}

/// A dataset record: input plus whatever gold annotation the source carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldExample {
    pub id: String,
    pub input: MqgInput,
    pub gold_question: Option<String>,
    pub gold_type: Option<QuestionType>,
}

/// Question-type control value assigned by the type task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QTypeState {
    Bridge,
    Comparison,
    Confused,
    #[default]
    Unset,
}

impl From<QuestionType> for QTypeState {
    fn from(t: QuestionType) -> Self {
        match t {
            QuestionType::Bridge => QTypeState::Bridge,
            QuestionType::Comparison => QTypeState::Comparison,
        }
    }
}

/// Attempted to assign a control variable that already holds a value.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("control '{0}' assigned twice")]
pub struct ControlReassigned(pub &'static str);

/// Routing variables. Tri-state booleans are `None` until their control task
/// runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlState {
    pub q_type: QTypeState,
    pub in_a_p1: Option<bool>,
    pub in_a_p2: Option<bool>,
    pub same_a_b: Option<bool>,
}

impl ControlState {
    /// Fully-set bridge controls, as carried by an annotation.
    pub fn bridge(in_a_p1: bool, in_a_p2: bool, same_a_b: bool) -> Self {
        Self {
            q_type: QTypeState::Bridge,
            in_a_p1: Some(in_a_p1),
            in_a_p2: Some(in_a_p2),
            same_a_b: Some(same_a_b),
        }
    }

    pub fn answer_in(&self, index: PassageIndex) -> Option<bool> {
        match index {
            PassageIndex::First => self.in_a_p1,
            PassageIndex::Second => self.in_a_p2,
        }
    }

    pub fn set_q_type(&mut self, v: QTypeState) -> Result<(), ControlReassigned> {
        if self.q_type != QTypeState::Unset {
            return Err(ControlReassigned("q_type"));
        }
        self.q_type = v;
        Ok(())
    }

    pub fn set_answer_in(&mut self, index: PassageIndex, v: bool) -> Result<(), ControlReassigned> {
        let (slot, name) = match index {
            PassageIndex::First => (&mut self.in_a_p1, "in_a_p1"),
            PassageIndex::Second => (&mut self.in_a_p2, "in_a_p2"),
        };
        set_once(slot, v, name)
    }

    pub fn set_same_a_b(&mut self, v: bool) -> Result<(), ControlReassigned> {
        set_once(&mut self.same_a_b, v, "same_a_b")
    }
}

fn set_once(slot: &mut Option<bool>, v: bool, name: &'static str) -> Result<(), ControlReassigned> {
    if slot.is_some() {
        return Err(ControlReassigned(name));
    }
    *slot = Some(v);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgeRationale {
    pub bridge: String,
    pub s1: Option<String>,
    pub s2: Option<String>,
    pub combined: String,
    pub combined_minus_bridge: Option<String>,
    pub combined_minus_bridge_answer: String,
    pub question: String,
    pub controls: ControlState,
}

impl BridgeRationale {
    pub fn statement(&self, index: PassageIndex) -> Option<&str> {
        match index {
            PassageIndex::First => self.s1.as_deref(),
            PassageIndex::Second => self.s2.as_deref(),
        }
    }

    /// The value fed to answer contraction: `c−b` when bridge contraction
    /// ran, otherwise `c` itself.
    pub fn contraction_input(&self) -> &str {
        self.combined_minus_bridge.as_deref().unwrap_or(&self.combined)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonRationale {
    pub s1: String,
    pub s2: String,
    pub combined: String,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rationale {
    Bridge(BridgeRationale),
    Comparison(ComparisonRationale),
}

impl Rationale {
    pub fn question_type(&self) -> QuestionType {
        match self {
            Rationale::Bridge(_) => QuestionType::Bridge,
            Rationale::Comparison(_) => QuestionType::Comparison,
        }
    }

    pub fn question(&self) -> &str {
        match self {
            Rationale::Bridge(b) => &b.question,
            Rationale::Comparison(c) => &c.question,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    TrainPool,
    DevPool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedExample {
    pub example: GoldExample,
    pub rationale: Rationale,
    pub split: Split,
}

impl AnnotatedExample {
    pub fn id(&self) -> &str {
        &self.example.id
    }

    pub fn question_type(&self) -> QuestionType {
        self.rationale.question_type()
    }
}

/// Which part of each passage is fed to the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    #[default]
    Full,
    Supporting,
}

impl ContextMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ContextMode::Full => "full",
            ContextMode::Supporting => "supporting",
        }
    }
}

impl std::str::FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(ContextMode::Full),
            "supporting" => Ok(ContextMode::Supporting),
            other => Err(format!("unknown context mode '{other}' (expected full|supporting)")),
        }
    }
}
