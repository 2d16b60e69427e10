//! Node-level predicate evaluation.

use crate::ast::{CompareOp, NodeKind, NodePattern, Operand, Predicate};
use crate::tree::{AttributeValue, MultiTree, NodeIdx};

use super::MatchDiagnostic;

/// Evaluates a node pattern (with its negation and alternatives) at `node`.
/// Out-of-range level references evaluate false and are pushed to `diags`.
pub fn eval_node_with(
    pattern: &NodePattern,
    tree: &MultiTree,
    node: NodeIdx,
    diags: &mut Vec<MatchDiagnostic>,
) -> bool {
    pattern.alternatives().any(|alt| {
        let base = match &alt.kind {
            NodeKind::Wildcard => true,
            NodeKind::Root => tree.parent(node).is_none(),
            NodeKind::Leaf => tree.node(node).is_leaf(),
            NodeKind::Custom(preds) => preds.iter().all(|p| eval_predicate(alt, p, tree, node, diags)),
        };
        base != alt.negated
    })
}

pub fn eval_node(pattern: &NodePattern, tree: &MultiTree, node: NodeIdx) -> bool {
    eval_node_with(pattern, tree, node, &mut Vec::new())
}

fn eval_predicate(
    owner: &NodePattern,
    p: &Predicate,
    tree: &MultiTree,
    node: NodeIdx,
    diags: &mut Vec<MatchDiagnostic>,
) -> bool {
    let this = tree.node(node);
    match &p.rhs {
        Operand::Literal(rhs) => match this.attribute(&p.attribute) {
            Some(lhs) => compare_values(&lhs, p.op, rhs),
            None => false,
        },
        Operand::Relative(k) | Operand::Absolute(k) => {
            let depth = i64::from(this.inherent.depth);
            let up = match &p.rhs {
                Operand::Relative(_) => -k,
                _ => depth - k,
            };
            let other = if (0..depth).contains(&up) {
                tree.ancestor(node, up as u32)
            } else {
                None
            };
            let Some(other) = other else {
                diags.push(MatchDiagnostic::RefOutOfRange {
                    elem_id: owner.id,
                    node_id: this.id.clone(),
                });
                return false;
            };
            match (this.numeric(&p.attribute), tree.node(other).numeric(&p.attribute)) {
                (Some(a), Some(b)) => compare_numbers(a, p.op, b),
                _ => false,
            }
        }
    }
}

fn compare_numbers(a: f64, op: CompareOp, b: f64) -> bool {
    match op {
        CompareOp::Gt => a > b,
        CompareOp::Ge => a >= b,
        CompareOp::Lt => a < b,
        CompareOp::Le => a <= b,
        CompareOp::Eq => a == b,
        CompareOp::In => false,
    }
}

/// Literal comparison. Text equality is exact; `=` with a text literal on a
/// list attribute tests membership; `in` on a list attribute tests whether
/// the two sets intersect.
pub fn compare_values(lhs: &AttributeValue, op: CompareOp, rhs: &AttributeValue) -> bool {
    use AttributeValue::*;
    match (lhs, op, rhs) {
        (Number(a), op, Number(b)) => compare_numbers(*a, op, *b),
        (Text(a), CompareOp::Eq, Text(b)) => a == b,
        (List(a), CompareOp::Eq, Text(b)) => a.contains(b),
        (List(a), CompareOp::Eq, List(b)) => a == b,
        (Text(a), CompareOp::In, List(b)) => b.contains(a),
        (List(a), CompareOp::In, List(b)) => !a.is_disjoint(b),
        _ => false,
    }
}
