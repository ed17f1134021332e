//! Routing rules of the circuit: which tasks run, on which passage, in which
//! order, given the control variables.

use serde::Serialize;

use crate::prompts::TaskId;
use crate::types::{ControlState, PassageIndex};

/// One scheduled task invocation. `passage` is set for per-passage tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Step {
    pub task: TaskId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passage: Option<PassageIndex>,
}

impl Step {
    pub const fn new(task: TaskId) -> Self {
        Self { task, passage: None }
    }

    pub const fn on(task: TaskId, passage: PassageIndex) -> Self {
        Self {
            task,
            passage: Some(passage),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("statement routing needs in_a_p1, in_a_p2 and same_a_b to be set")]
pub struct ControlsUnset;

/// The two statement-extraction steps of the bridge branch.
///
/// Identical answer and bridge always extracts statements about the bridge
/// from both passages, regardless of the presence flags.
pub fn bridge_statement_plan(st: &ControlState) -> Result<[Step; 2], ControlsUnset> {
    use PassageIndex::{First, Second};
    let (Some(in1), Some(in2), Some(same)) = (st.in_a_p1, st.in_a_p2, st.same_a_b) else {
        return Err(ControlsUnset);
    };
    Ok(match (same, in1, in2) {
        (true, _, _) => [Step::on(TaskId::T6, First), Step::on(TaskId::T6, Second)],
        (false, true, false) => [Step::on(TaskId::T5, First), Step::on(TaskId::T6, Second)],
        (false, false, true) => [Step::on(TaskId::T5, Second), Step::on(TaskId::T6, First)],
        (false, true, true) => [Step::on(TaskId::T5, First), Step::on(TaskId::T5, Second)],
        (false, false, false) => [Step::on(TaskId::T6, First), Step::on(TaskId::T6, Second)],
    })
}

pub const BRIDGE_PREFIX: [Step; 4] = [
    Step::new(TaskId::T2),
    Step::on(TaskId::T3, PassageIndex::First),
    Step::on(TaskId::T3, PassageIndex::Second),
    Step::new(TaskId::T4),
];

pub const COMPARISON_BRANCH: [Step; 3] = [Step::new(TaskId::T11), Step::new(TaskId::T12), Step::new(TaskId::T13)];

/// Steps after statement extraction. Bridge contraction (T8) is skipped when
/// the answer is the bridge entity.
pub fn bridge_suffix(same_a_b: bool) -> Vec<Step> {
    let mut v = vec![Step::new(TaskId::T7)];
    if !same_a_b {
        v.push(Step::new(TaskId::T8));
    }
    v.push(Step::new(TaskId::T9));
    v.push(Step::new(TaskId::T10));
    v
}

/// Full bridge branch for fully-set controls.
pub fn bridge_branch(st: &ControlState) -> Result<Vec<Step>, ControlsUnset> {
    let mut v = BRIDGE_PREFIX.to_vec();
    v.extend(bridge_statement_plan(st)?);
    v.extend(bridge_suffix(st.same_a_b.ok_or(ControlsUnset)?));
    Ok(v)
}

#[derive(Debug, Serialize)]
pub struct StatementRoute {
    pub in_a_p1: bool,
    pub in_a_p2: bool,
    pub same_a_b: bool,
    pub steps: [Step; 2],
}

/// Machine-readable routing table shipped as `data/routing_table.json`.
#[derive(Debug, Serialize)]
pub struct RoutingTable {
    pub version: u32,
    pub entry: Step,
    pub question_type_values: [&'static str; 3],
    pub confused_order: [&'static str; 2],
    pub comparison_branch: [Step; 3],
    pub bridge_prefix: [Step; 4],
    pub bridge_statements: Vec<StatementRoute>,
    pub bridge_suffix_same: Vec<Step>,
    pub bridge_suffix_different: Vec<Step>,
}

pub fn routing_table() -> RoutingTable {
    let mut statements = Vec::with_capacity(8);
    for in1 in [false, true] {
        for in2 in [false, true] {
            for same in [false, true] {
                let st = ControlState::bridge(in1, in2, same);
                statements.push(StatementRoute {
                    in_a_p1: in1,
                    in_a_p2: in2,
                    same_a_b: same,
                    steps: bridge_statement_plan(&st).expect("controls set"),
                });
            }
        }
    }
    RoutingTable {
        version: 1,
        entry: Step::new(TaskId::T1),
        question_type_values: ["bridge", "comparison", "confused"],
        confused_order: ["bridge", "comparison"],
        comparison_branch: COMPARISON_BRANCH,
        bridge_prefix: BRIDGE_PREFIX,
        bridge_statements: statements,
        bridge_suffix_same: bridge_suffix(true),
        bridge_suffix_different: bridge_suffix(false),
    }
}

pub fn routing_table_json() -> String {
    let mut s = serde_json::to_string_pretty(&routing_table()).expect("routing table serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use PassageIndex::{First, Second};
    use TaskId::{T5, T6};

    #[test]
    fn statement_plans() {
        let plan = |a, b, c| bridge_statement_plan(&ControlState::bridge(a, b, c)).unwrap();
        assert_eq!(plan(true, false, false), [Step::on(T5, First), Step::on(T6, Second)]);
        for (a, b) in [(true, true), (true, false), (false, true), (false, false)] {
            assert_eq!(plan(a, b, true), [Step::on(T6, First), Step::on(T6, Second)]);
        }
        // Hand routing table: neither passage holds the answer.
        assert_eq!(plan(false, false, false), [Step::on(T6, First), Step::on(T6, Second)]);
        assert_eq!(plan(false, true, false), [Step::on(T5, Second), Step::on(T6, First)]);
        assert_eq!(plan(true, true, false), [Step::on(T5, First), Step::on(T5, Second)]);
    }

    #[test]
    fn plan_is_total_and_covers_both_passages() {
        for bits in 0..8u8 {
            let st = ControlState::bridge(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
            let plan = bridge_statement_plan(&st).unwrap();
            let mut ps: Vec<_> = plan.iter().map(|s| s.passage.unwrap()).collect();
            ps.sort();
            assert_eq!(ps, [First, Second]);
        }
    }

    #[test]
    fn unset_controls_rejected() {
        assert_eq!(bridge_statement_plan(&ControlState::default()), Err(ControlsUnset));
    }

    #[test]
    fn shipped_table_matches() {
        let shipped = include_str!("../data/routing_table.json");
        assert_eq!(shipped, routing_table_json());
    }
}
