//! Executes the reasoning circuit over one input: one backend call per
//! step, control outputs routing the branches, generative outputs feeding
//! the slots of later steps.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotation::{select_context, ContextError};
use crate::backends::{Backend, BackendError, GenRequest, RequestKey};
use crate::metrics::{contains_span, eval_tokenize};
use crate::prompts::{
    parse_control, parse_output, render_input, ControlOutcome, ParseFailure, PromptError, SentinelConfig, Slot, Slots,
    TaskId,
};
use crate::routing::{bridge_statement_plan, Step};
use crate::types::{ContextMode, ControlReassigned, ControlState, MqgInput, PassageIndex, QTypeState, QuestionType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfusedPolicy {
    /// Run the bridge branch, then the comparison branch.
    #[default]
    Both,
    BridgeOnly,
    ComparisonOnly,
}

impl FromStr for ConfusedPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(Self::Both),
            "bridge_only" | "bridge-only" => Ok(Self::BridgeOnly),
            "comparison_only" | "comparison-only" => Ok(Self::ComparisonOnly),
            other => Err(format!(
                "unknown confused policy '{other}' (expected both|bridge_only|comparison_only)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidatorMode {
    #[default]
    Warn,
    Reject,
}

impl FromStr for ValidatorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "warn" => Ok(Self::Warn),
            "reject" => Ok(Self::Reject),
            other => Err(format!("unknown validator mode '{other}' (expected warn|reject)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub context_mode: ContextMode,
    pub confused_policy: ConfusedPolicy,
    /// Generation budget for every step.
    pub max_new_tokens: usize,
    pub validator_mode: ValidatorMode,
    pub sentinels: SentinelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            context_mode: ContextMode::Full,
            confused_policy: ConfusedPolicy::Both,
            max_new_tokens: 64,
            validator_mode: ValidatorMode::Warn,
            sentinels: SentinelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parsed {
    Values(Vec<String>),
    ParseFailure(String),
}

impl Parsed {
    pub fn values(&self) -> Option<&[String]> {
        match self {
            Parsed::Values(v) => Some(v),
            Parsed::ParseFailure(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub task: TaskId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage: Option<PassageIndex>,
    pub slots: Slots,
    pub prompt: String,
    pub raw_generation: String,
    pub parsed: Parsed,
    /// Set on control steps whose output was unusable.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub validator_flags: Vec<String>,
}

impl StepRecord {
    pub fn step(&self) -> Step {
        Step {
            task: self.task,
            passage: self.passage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedQuestion {
    pub q_type: QuestionType,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitTrace {
    pub input_id: String,
    pub steps: Vec<StepRecord>,
    pub controls: ControlState,
    pub questions: Vec<EmittedQuestion>,
    pub version: String,
}

impl CircuitTrace {
    fn new(id: &str) -> Self {
        Self {
            input_id: id.to_string(),
            steps: Vec::new(),
            controls: ControlState::default(),
            questions: Vec::new(),
            version: crate::VERSION.to_string(),
        }
    }

    pub fn task_sequence(&self) -> Vec<Step> {
        self.steps.iter().map(StepRecord::step).collect()
    }

    pub fn tasks(&self) -> Vec<TaskId> {
        self.steps.iter().map(|s| s.task).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunErrorKind {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("backend failed at {task}: {source}")]
    Backend { task: TaskId, source: BackendError },
    #[error(transparent)]
    Parse(#[from] ParseFailure),
    #[error("{task} output rejected by validators: {}", flags.join(", "))]
    Rejected { task: TaskId, flags: Vec<String> },
    #[error(transparent)]
    Control(#[from] ControlReassigned),
}

/// A failed run, carrying everything executed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{}: {}", .trace.input_id, .kind)]
pub struct RunError {
    pub kind: RunErrorKind,
    pub trace: Box<CircuitTrace>,
}

pub const BRIDGE_RETAINED: &str = "bridge-retained";
pub const ANSWER_RETAINED: &str = "answer-retained";
pub const COMBINATION_TOO_SHORT: &str = "combination-too-short";
pub const NOT_A_QUESTION: &str = "not-a-question";

/// Heuristic checks on a generative step's output. `context` holds the
/// step's own slots plus values established earlier in the run (the bridge
/// entity for T9).
pub fn validate_step(task: TaskId, parsed: &[String], context: &Slots) -> Vec<&'static str> {
    let mut flags = Vec::new();
    let Some(out) = parsed.first() else {
        return flags;
    };
    let slot = |s: Slot| context.get(&s).map(String::as_str).unwrap_or("");
    match task {
        TaskId::T8 => {
            if contains_span(out, slot(Slot::Bridge)) {
                flags.push(BRIDGE_RETAINED);
            }
        }
        TaskId::T9 => {
            if contains_span(out, slot(Slot::Answer)) {
                flags.push(ANSWER_RETAINED);
            }
            if let Some(b) = context.get(&Slot::Bridge) {
                if contains_span(out, b) {
                    flags.push(BRIDGE_RETAINED);
                }
            }
        }
        TaskId::T7 | TaskId::T12 => {
            let n = eval_tokenize(out).len() as f64;
            let longest = eval_tokenize(slot(Slot::S1))
                .len()
                .max(eval_tokenize(slot(Slot::S2)).len()) as f64;
            if n < 0.5 * longest {
                flags.push(COMBINATION_TOO_SHORT);
            }
        }
        TaskId::T10 | TaskId::T13 if !out.trim_end().ends_with('?') => flags.push(NOT_A_QUESTION),
        _ => {}
    }
    flags
}

/// Value used when a presence or identity control step cannot be parsed:
/// answer containment in the passage for T3, case-insensitive equality of
/// answer and bridge for T4.
pub fn control_fallback(task: TaskId, x: &MqgInput, passage: Option<PassageIndex>, bridge: Option<&str>) -> bool {
    match task {
        TaskId::T3 => {
            let p = x.passage(passage.expect("presence fallback needs a passage"));
            let text = select_context(p, ContextMode::Full).expect("full context always renders");
            contains_span(&text, &x.answer)
        }
        TaskId::T4 => bridge.is_some_and(|b| b.trim().to_lowercase() == x.answer.trim().to_lowercase()),
        other => panic!("{other} has no control fallback"),
    }
}

struct Engine<'a> {
    id: &'a str,
    x: &'a MqgInput,
    backend: &'a dyn Backend,
    cfg: &'a RunConfig,
    p1: String,
    p2: String,
    /// Values established so far, visible to the validators.
    known: Slots,
    trace: CircuitTrace,
}

type StepResult<T> = Result<T, RunErrorKind>;

impl Engine<'_> {
    fn ctx(&self, idx: PassageIndex) -> &str {
        match idx {
            PassageIndex::First => &self.p1,
            PassageIndex::Second => &self.p2,
        }
    }

    /// Calls the backend and records the step. Returns parsed values, or
    /// `None` for an unparsable control step.
    fn call(&mut self, task: TaskId, passage: Option<PassageIndex>, slots: Slots) -> StepResult<Option<Vec<String>>> {
        let s = &self.cfg.sentinels;
        let prompt = render_input(task, &slots, s)?;
        let req =
            GenRequest::new(prompt.clone(), self.cfg.max_new_tokens).with_key(RequestKey::new(self.id, task, passage));
        let raw = self
            .backend
            .generate(&req)
            .map_err(|source| RunErrorKind::Backend { task, source })?
            .text;
        let mut rec = StepRecord {
            task,
            passage,
            slots,
            prompt,
            raw_generation: raw.clone(),
            parsed: Parsed::ParseFailure(String::new()),
            fallback: false,
            validator_flags: Vec::new(),
        };
        match parse_output(task, &raw, s) {
            Ok(values) => {
                let mut context = self.known.clone();
                context.extend(rec.slots.clone());
                rec.validator_flags = validate_step(task, &values, &context)
                    .into_iter()
                    .map(String::from)
                    .collect();
                rec.parsed = Parsed::Values(values.clone());
                let flags = rec.validator_flags.clone();
                self.trace.steps.push(rec);
                if !flags.is_empty() && self.cfg.validator_mode == ValidatorMode::Reject {
                    return Err(RunErrorKind::Rejected { task, flags });
                }
                Ok(Some(values))
            }
            Err(fail) => {
                rec.parsed = Parsed::ParseFailure(fail.reason.clone());
                rec.fallback = task.is_control();
                self.trace.steps.push(rec);
                if task.is_control() {
                    Ok(None)
                } else {
                    Err(fail.into())
                }
            }
        }
    }

    fn generate(&mut self, task: TaskId, passage: Option<PassageIndex>, slots: Slots) -> StepResult<Vec<String>> {
        Ok(self
            .call(task, passage, slots)?
            .expect("generative steps abort on parse failure"))
    }

    /// Runs a flag-setting control step, falling back when the output is
    /// outside the control vocabulary.
    fn flag(
        &mut self,
        task: TaskId,
        passage: Option<PassageIndex>,
        slots: Slots,
        bridge: Option<&str>,
    ) -> StepResult<bool> {
        let outcome = self
            .call(task, passage, slots)?
            .map(|v| parse_control(task, &v[0]))
            .unwrap_or(ControlOutcome::Fallback);
        Ok(match outcome {
            ControlOutcome::Flag(v) => v,
            _ => {
                self.trace.steps.last_mut().expect("step recorded").fallback = true;
                control_fallback(task, self.x, passage, bridge)
            }
        })
    }

    fn slots(pairs: &[(Slot, &str)]) -> Slots {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    fn head(&self) -> Slots {
        Self::slots(&[
            (Slot::P1, &self.p1),
            (Slot::P2, &self.p2),
            (Slot::Answer, &self.x.answer),
        ])
    }

    fn question_type(&mut self) -> StepResult<QTypeState> {
        let q = match self.call(TaskId::T1, None, self.head())? {
            Some(v) => match parse_control(TaskId::T1, &v[1]) {
                ControlOutcome::QuestionType(q) => q,
                _ => QTypeState::Confused,
            },
            None => QTypeState::Confused,
        };
        self.trace.controls.set_q_type(q)?;
        Ok(q)
    }

    fn bridge_branch(&mut self) -> StepResult<String> {
        let a = self.x.answer.clone();
        let b = self.generate(TaskId::T2, None, self.head())?.swap_remove(1);
        self.known.insert(Slot::Bridge, b.clone());
        for idx in PassageIndex::BOTH {
            let slots = Self::slots(&[(Slot::Answer, &a), (Slot::Passage, self.ctx(idx))]);
            let present = self.flag(TaskId::T3, Some(idx), slots, None)?;
            self.trace.controls.set_answer_in(idx, present)?;
        }
        let same = self.flag(
            TaskId::T4,
            None,
            Self::slots(&[(Slot::Answer, &a), (Slot::Bridge, &b)]),
            Some(&b),
        )?;
        self.trace.controls.set_same_a_b(same)?;

        let plan = bridge_statement_plan(&self.trace.controls).expect("all bridge controls just set");
        let mut statements = [String::new(), String::new()];
        for step in plan {
            let idx = step.passage.expect("statement steps are per passage");
            let mut slots = Self::slots(&[(Slot::Passage, self.ctx(idx)), (Slot::Bridge, &b)]);
            if step.task == TaskId::T5 {
                slots.insert(Slot::Answer, a.clone());
            }
            statements[idx.number() as usize - 1] = self.generate(step.task, Some(idx), slots)?.swap_remove(0);
        }
        let [s1, s2] = statements;
        let c = self
            .generate(
                TaskId::T7,
                None,
                Self::slots(&[(Slot::Bridge, &b), (Slot::S1, &s1), (Slot::S2, &s2)]),
            )?
            .swap_remove(0);
        let cb = if same {
            c
        } else {
            self.generate(
                TaskId::T8,
                None,
                Self::slots(&[(Slot::Bridge, &b), (Slot::Combined, &c)]),
            )?
            .swap_remove(0)
        };
        let cba = self
            .generate(
                TaskId::T9,
                None,
                Self::slots(&[(Slot::Answer, &a), (Slot::CombinedMinusBridge, &cb)]),
            )?
            .swap_remove(0);
        let q = self
            .generate(
                TaskId::T10,
                None,
                Self::slots(&[
                    (Slot::CombinedMinusBridgeAnswer, &cba),
                    (Slot::CombinedMinusBridge, &cb),
                    (Slot::Answer, &a),
                ]),
            )?
            .swap_remove(0);
        Ok(q)
    }

    fn comparison_branch(&mut self) -> StepResult<String> {
        let a = self.x.answer.clone();
        let mut st = self.generate(TaskId::T11, None, self.head())?;
        let s2 = st.pop().expect("two values");
        let s1 = st.pop().expect("two values");
        let c = self
            .generate(TaskId::T12, None, Self::slots(&[(Slot::S1, &s1), (Slot::S2, &s2)]))?
            .swap_remove(0);
        let q = self
            .generate(
                TaskId::T13,
                None,
                Self::slots(&[(Slot::Combined, &c), (Slot::Answer, &a)]),
            )?
            .swap_remove(0);
        Ok(q)
    }

    fn run(&mut self) -> StepResult<()> {
        let branches: &[QuestionType] = match (self.question_type()?, self.cfg.confused_policy) {
            (QTypeState::Bridge, _) | (QTypeState::Confused, ConfusedPolicy::BridgeOnly) => &[QuestionType::Bridge],
            (QTypeState::Comparison, _) | (QTypeState::Confused, ConfusedPolicy::ComparisonOnly) => {
                &[QuestionType::Comparison]
            }
            (QTypeState::Confused, ConfusedPolicy::Both) => &[QuestionType::Bridge, QuestionType::Comparison],
            (QTypeState::Unset, _) => unreachable!("question type assigned above"),
        };
        for &branch in branches {
            let text = match branch {
                QuestionType::Bridge => self.bridge_branch()?,
                QuestionType::Comparison => self.comparison_branch()?,
            };
            self.trace.questions.push(EmittedQuestion { q_type: branch, text });
        }
        Ok(())
    }
}

/// Runs the circuit for one input. Backend failures, generative parse
/// failures and (in reject mode) validator flags abort the run; the error
/// carries the partial trace.
pub fn run_circuit(id: &str, x: &MqgInput, backend: &dyn Backend, cfg: &RunConfig) -> Result<CircuitTrace, RunError> {
    let fail = |kind, trace| RunError {
        kind,
        trace: Box::new(trace),
    };
    if cfg.max_new_tokens == 0 {
        return Err(fail(
            RunErrorKind::Config("max_new_tokens must be at least 1".into()),
            CircuitTrace::new(id),
        ));
    }
    let ctx = |p| select_context(p, cfg.context_mode);
    let (p1, p2) = match (ctx(&x.p1), ctx(&x.p2)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Err(fail(e.into(), CircuitTrace::new(id))),
    };
    let mut engine = Engine {
        id,
        x,
        backend,
        cfg,
        p1,
        p2,
        known: Slots::new(),
        trace: CircuitTrace::new(id),
    };
    match engine.run() {
        Ok(()) => Ok(engine.trace),
        Err(kind) => Err(fail(kind, engine.trace)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Passage;

    fn input(answer: &str) -> MqgInput {
        MqgInput {
            p1: Passage::new("Survivor 28", vec!["It was renewed for season 28.".into()]),
            p2: Passage::new("Beagle", vec!["The Beagle is a breed.".into()]),
            answer: answer.into(),
        }
    }

    fn slots(pairs: &[(Slot, &str)]) -> Slots {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn fallbacks() {
        let x = input("28");
        assert!(control_fallback(TaskId::T3, &x, Some(PassageIndex::First), None));
        assert!(!control_fallback(TaskId::T3, &x, Some(PassageIndex::Second), None));
        let war = MqgInput {
            answer: "War & Peace".into(),
            ..x.clone()
        };
        assert!(control_fallback(TaskId::T4, &war, None, Some("war & peace")));
        let no = MqgInput {
            answer: "no".into(),
            ..x
        };
        assert!(!control_fallback(TaskId::T4, &no, None, Some("Beagle")));
    }

    #[test]
    fn validators() {
        let s9 = slots(&[(Slot::Answer, "Marc Bolan"), (Slot::CombinedMinusBridge, "x")]);
        assert_eq!(
            validate_step(TaskId::T9, &["Marc Bolan wrote a certain song.".into()], &s9),
            [ANSWER_RETAINED]
        );
        let s8 = slots(&[(Slot::Bridge, "T. Rex"), (Slot::Combined, "x")]);
        assert!(validate_step(TaskId::T8, &["A band released a song.".into()], &s8).is_empty());
        assert_eq!(
            validate_step(TaskId::T8, &["The band T. Rex released it.".into()], &s8),
            [BRIDGE_RETAINED]
        );
        let s10 = slots(&[(Slot::CombinedMinusBridgeAnswer, "x")]);
        assert_eq!(
            validate_step(TaskId::T10, &["Who wrote it".into()], &s10),
            [NOT_A_QUESTION]
        );
        assert!(validate_step(TaskId::T10, &["Who wrote it?".into()], &s10).is_empty());
        let s7 = slots(&[
            (Slot::Bridge, "b"),
            (Slot::S1, "one two three four five six"),
            (Slot::S2, "a b"),
        ]);
        assert_eq!(
            validate_step(TaskId::T7, &["one two".into()], &s7),
            [COMBINATION_TOO_SHORT]
        );
        assert!(validate_step(TaskId::T7, &["one two three".into()], &s7).is_empty());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("both".parse::<ConfusedPolicy>(), Ok(ConfusedPolicy::Both));
        assert_eq!("bridge_only".parse::<ConfusedPolicy>(), Ok(ConfusedPolicy::BridgeOnly));
        assert!("all".parse::<ConfusedPolicy>().is_err());
        assert_eq!("reject".parse::<ValidatorMode>(), Ok(ValidatorMode::Reject));
    }
}
