//! Canonical text form of a [`QueryTarget`].
//!
//! The output has no optional whitespace and omits `{1}` repetitions, except
//! on a single-step path core, where `{1}` keeps it distinct from a node core.

use std::fmt::{self, Write};

use crate::ast::*;
use crate::tree::AttributeValue;

pub fn format(target: &QueryTarget) -> String {
    target.to_string()
}

impl fmt::Display for QueryTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.core {
            Core::Node(n) => write_node(f, n)?,
            Core::Path(p) if p.steps.len() == 1 => {
                write_node(f, &p.steps[0].node)?;
                write_rep(f, p.steps[0].rep, true)?;
            }
            Core::Path(p) => write_path(f, p)?,
            Core::Subtree { node, branch } => {
                write_node(f, node)?;
                write_branch(f, branch)?;
            }
        }
        for clause in &self.ec {
            write!(f, " - {} <", clause.quantifier.keyword())?;
            write_path(f, &clause.path)?;
            f.write_char('>')?;
            write_rep(f, clause.occurrences, false)?;
        }
        Ok(())
    }
}

impl fmt::Display for Repetition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_rep(f, *self, true)
    }
}

fn write_rep(f: &mut fmt::Formatter<'_>, rep: Repetition, force: bool) -> fmt::Result {
    match (rep.min, rep.max) {
        (1, Some(1)) if !force => Ok(()),
        (m, Some(n)) if m == n => write!(f, "{{{m}}}"),
        (m, None) => write!(f, "{{{m},}}"),
        (0, Some(n)) => write!(f, "{{,{n}}}"),
        (m, Some(n)) => write!(f, "{{{m},{n}}}"),
    }
}

fn write_path(f: &mut fmt::Formatter<'_>, path: &PathPattern) -> fmt::Result {
    for (i, step) in path.steps.iter().enumerate() {
        if i > 0 {
            f.write_char('/')?;
        }
        write_node(f, &step.node)?;
        write_rep(f, step.rep, false)?;
    }
    Ok(())
}

fn write_branch(f: &mut fmt::Formatter<'_>, branch: &BranchPattern) -> fmt::Result {
    f.write_char('[')?;
    for (i, arm) in branch.arms.iter().enumerate() {
        if i > 0 {
            f.write_char(',')?;
        }
        f.write_char('<')?;
        write_path(f, &arm.path)?;
        if let Some(nested) = &arm.branch {
            write_branch(f, nested)?;
        }
        f.write_char('>')?;
        write_rep(f, arm.rep, false)?;
    }
    f.write_char(']')
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &NodePattern) -> fmt::Result {
    for (i, alt) in node.alternatives().enumerate() {
        if i > 0 {
            f.write_char('|')?;
        }
        if alt.negated {
            f.write_char('!')?;
        }
        match &alt.kind {
            NodeKind::Wildcard => f.write_char('.')?,
            NodeKind::Root => f.write_char('^')?,
            NodeKind::Leaf => f.write_char('$')?,
            NodeKind::Custom(preds) => {
                f.write_char('(')?;
                for (j, p) in preds.iter().enumerate() {
                    if j > 0 {
                        f.write_char(',')?;
                    }
                    write_predicate(f, p)?;
                }
                f.write_char(')')?;
            }
        }
    }
    Ok(())
}

fn write_predicate(f: &mut fmt::Formatter<'_>, p: &Predicate) -> fmt::Result {
    f.write_str(&p.attribute)?;
    match p.op {
        CompareOp::In => f.write_str(" in ")?,
        op => f.write_str(op.symbol())?,
    }
    match &p.rhs {
        Operand::Relative(k) => write!(f, "&{k}"),
        Operand::Absolute(k) => write!(f, "#{k}"),
        Operand::Literal(v) => write_value(f, v),
    }
}

fn write_value(f: &mut fmt::Formatter<'_>, value: &AttributeValue) -> fmt::Result {
    match value {
        AttributeValue::Number(n) => write!(f, "{n}"),
        AttributeValue::Text(s) => write_string(f, s),
        AttributeValue::List(items) => {
            f.write_char('[')?;
            for (i, s) in items.iter().enumerate() {
                if i > 0 {
                    f.write_char(',')?;
                }
                write_string(f, s)?;
            }
            f.write_char(']')
        }
    }
}

fn write_string(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c if c.is_control() => write!(f, "\\u{:04x}", c as u32)?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}
