//! Typed syntax tree for tree regular expressions.
//!
//! A [`QueryTarget`] is a core pattern (single node, downward path, or node
//! with a branch) plus a conjunction of element-composition clauses. Every
//! node pattern, branch arm, and composition clause carries an [`ElemId`];
//! match bindings are keyed by it.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tree::{is_inherent, AttributeKind, AttributeValue, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElemId(pub u32);

impl fmt::Display for ElemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Byte range into the query text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    In,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Eq => "=",
            CompareOp::In => "in",
        }
    }

    fn is_ordering(self) -> bool {
        matches!(self, CompareOp::Gt | CompareOp::Ge | CompareOp::Lt | CompareOp::Le)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Literal(AttributeValue),
    /// `&k`: the same attribute read `-k` levels above the node.
    Relative(i64),
    /// `#k`: the same attribute read from the ancestor at level `k`.
    Absolute(i64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub attribute: String,
    pub op: CompareOp,
    pub rhs: Operand,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Custom(Vec<Predicate>),
    Wildcard,
    Root,
    Leaf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodePattern {
    pub id: ElemId,
    pub kind: NodeKind,
    pub negated: bool,
    pub alternative: Option<Box<NodePattern>>,
    pub span: Option<Span>,
}

impl NodePattern {
    pub fn new(id: ElemId, kind: NodeKind) -> Self {
        NodePattern {
            id,
            kind,
            negated: false,
            alternative: None,
            span: None,
        }
    }

    pub fn wildcard(id: ElemId) -> Self {
        NodePattern::new(id, NodeKind::Wildcard)
    }

    pub fn is_plain(&self, kind: &NodeKind) -> bool {
        !self.negated && self.alternative.is_none() && &self.kind == kind
    }

    /// Whether the pattern constrains attributes (and so can be wildcarded).
    pub fn is_constrained(&self) -> bool {
        self.negated || self.alternative.is_some() || matches!(self.kind, NodeKind::Custom(_))
    }

    /// This pattern followed by its right-nested alternatives.
    pub fn alternatives(&self) -> impl Iterator<Item = &NodePattern> {
        std::iter::successors(Some(self), |p| p.alternative.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Repetition {
    pub min: u32,
    /// `None` is unbounded.
    pub max: Option<u32>,
}

impl Default for Repetition {
    fn default() -> Self {
        Repetition::ONCE
    }
}

impl Repetition {
    pub const ONCE: Repetition = Repetition { min: 1, max: Some(1) };

    pub fn new(min: u32, max: Option<u32>) -> Self {
        Repetition { min, max }
    }

    pub fn at_least(min: u32) -> Self {
        Repetition { min, max: None }
    }

    pub fn exactly(n: u32) -> Self {
        Repetition { min: n, max: Some(n) }
    }

    pub fn is_valid(&self) -> bool {
        self.max.is_none_or(|m| m >= self.min)
    }

    pub fn is_unbounded(&self) -> bool {
        self.max.is_none()
    }

    pub fn contains(&self, n: u32) -> bool {
        n >= self.min && self.max.is_none_or(|m| n <= m)
    }

    /// Whether another count may still be taken after `n`.
    pub fn allows_more(&self, n: u32) -> bool {
        self.max.is_none_or(|m| n < m)
    }

    /// Smallest widening of `self` that admits `n`.
    pub fn widened_to(&self, n: u32) -> Repetition {
        Repetition {
            min: self.min.min(n),
            max: self.max.map(|m| m.max(n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub node: NodePattern,
    pub rep: Repetition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub steps: Vec<PathStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchArm {
    pub id: ElemId,
    pub path: PathPattern,
    /// Number of distinct children matched by this arm.
    pub rep: Repetition,
    pub branch: Option<BranchPattern>,
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPattern {
    pub arms: Vec<BranchArm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantifier {
    Exists,
    Forall,
}

impl Quantifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::Exists => "exists",
            Quantifier::Forall => "forall",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcClause {
    pub id: ElemId,
    pub quantifier: Quantifier,
    pub path: PathPattern,
    pub occurrences: Repetition,
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Core {
    Node(NodePattern),
    Path(PathPattern),
    Subtree { node: NodePattern, branch: BranchPattern },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryTarget {
    pub core: Core,
    pub ec: Vec<EcClause>,
}

impl QueryTarget {
    /// All element ids in AST pre-order (node patterns including alternatives,
    /// arms, composition clauses).
    pub fn elem_ids(&self) -> Vec<ElemId> {
        let mut out = Vec::new();
        self.visit(&mut |e| out.push(e.id()));
        out
    }

    /// Visits every element in pre-order.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(Element<'a>)) {
        fn node<'a>(p: &'a NodePattern, f: &mut impl FnMut(Element<'a>)) {
            for alt in p.alternatives() {
                f(Element::Node(alt));
            }
        }
        fn path<'a>(p: &'a PathPattern, f: &mut impl FnMut(Element<'a>)) {
            for s in &p.steps {
                node(&s.node, f);
            }
        }
        fn branch<'a>(b: &'a BranchPattern, f: &mut impl FnMut(Element<'a>)) {
            for arm in &b.arms {
                f(Element::Arm(arm));
                path(&arm.path, f);
                if let Some(nested) = &arm.branch {
                    branch(nested, f);
                }
            }
        }
        match &self.core {
            Core::Node(n) => node(n, f),
            Core::Path(p) => path(p, f),
            Core::Subtree { node: n, branch: b } => {
                node(n, f);
                branch(b, f);
            }
        }
        for clause in &self.ec {
            f(Element::Ec(clause));
            path(&clause.path, f);
        }
    }

    /// Nesting depth: 1 for flat targets, +1 per branch level.
    pub fn depth(&self) -> usize {
        fn branch_depth(b: &BranchPattern) -> usize {
            1 + b
                .arms
                .iter()
                .map(|a| a.branch.as_ref().map_or(0, branch_depth))
                .max()
                .unwrap_or(0)
        }
        match &self.core {
            Core::Subtree { branch, .. } => 1 + branch_depth(branch),
            _ => 1,
        }
    }

    /// First node pattern tried at a candidate start node.
    pub fn leading_node(&self) -> &NodePattern {
        match &self.core {
            Core::Node(n) | Core::Subtree { node: n, .. } => n,
            Core::Path(p) => &p.steps[0].node,
        }
    }

    /// Reassigns element ids 1.. in pre-order.
    pub fn renumber(&mut self) {
        fn node(p: &mut NodePattern, next: &mut u32) {
            p.id = ElemId(*next);
            *next += 1;
            if let Some(alt) = p.alternative.as_deref_mut() {
                node(alt, next);
            }
        }
        fn path(p: &mut PathPattern, next: &mut u32) {
            for s in &mut p.steps {
                node(&mut s.node, next);
            }
        }
        fn branch(b: &mut BranchPattern, next: &mut u32) {
            for arm in &mut b.arms {
                arm.id = ElemId(*next);
                *next += 1;
                path(&mut arm.path, next);
                if let Some(nested) = &mut arm.branch {
                    branch(nested, next);
                }
            }
        }
        let mut next = 1;
        match &mut self.core {
            Core::Node(n) => node(n, &mut next),
            Core::Path(p) => path(p, &mut next),
            Core::Subtree { node: n, branch: b } => {
                node(n, &mut next);
                branch(b, &mut next);
            }
        }
        for clause in &mut self.ec {
            clause.id = ElemId(next);
            next += 1;
            path(&mut clause.path, &mut next);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Element<'a> {
    Node(&'a NodePattern),
    Arm(&'a BranchArm),
    Ec(&'a EcClause),
}

impl Element<'_> {
    pub fn id(&self) -> ElemId {
        match self {
            Element::Node(n) => n.id,
            Element::Arm(a) => a.id,
            Element::Ec(c) => c.id,
        }
    }
}

// ---------------------------------------------------------------------------
// structural equality

/// Structural equality ignoring element ids and spans.
pub fn ast_equal(a: &QueryTarget, b: &QueryTarget) -> bool {
    core_eq(&a.core, &b.core)
        && a.ec.len() == b.ec.len()
        && a.ec
            .iter()
            .zip(&b.ec)
            .all(|(x, y)| x.quantifier == y.quantifier && x.occurrences == y.occurrences && path_eq(&x.path, &y.path))
}

fn core_eq(a: &Core, b: &Core) -> bool {
    match (a, b) {
        (Core::Node(x), Core::Node(y)) => node_eq(x, y),
        (Core::Path(x), Core::Path(y)) => path_eq(x, y),
        (Core::Subtree { node: n1, branch: b1 }, Core::Subtree { node: n2, branch: b2 }) => {
            node_eq(n1, n2) && branch_eq(b1, b2)
        }
        _ => false,
    }
}

fn node_eq(a: &NodePattern, b: &NodePattern) -> bool {
    a.kind == b.kind
        && a.negated == b.negated
        && match (&a.alternative, &b.alternative) {
            (None, None) => true,
            (Some(x), Some(y)) => node_eq(x, y),
            _ => false,
        }
}

fn path_eq(a: &PathPattern, b: &PathPattern) -> bool {
    a.steps.len() == b.steps.len()
        && a.steps
            .iter()
            .zip(&b.steps)
            .all(|(x, y)| x.rep == y.rep && node_eq(&x.node, &y.node))
}

fn branch_eq(a: &BranchPattern, b: &BranchPattern) -> bool {
    a.arms.len() == b.arms.len()
        && a.arms.iter().zip(&b.arms).all(|(x, y)| {
            x.rep == y.rep
                && path_eq(&x.path, &y.path)
                && match (&x.branch, &y.branch) {
                    (None, None) => true,
                    (Some(p), Some(q)) => branch_eq(p, q),
                    _ => false,
                }
        })
}

// ---------------------------------------------------------------------------
// validation

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub elem_id: ElemId,
    pub message: String,
}

/// Checks type invariants and attribute references against a corpus schema.
/// An empty result means the target is valid.
pub fn validate(target: &QueryTarget, schema: &Schema) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    target.visit(&mut |e| {
        if !seen.insert(e.id()) {
            out.push(Diagnostic {
                elem_id: e.id(),
                message: format!("element id {} is used more than once", e.id()),
            });
        }
    });

    let mut v = Validator { schema, out: &mut out };
    match &target.core {
        Core::Node(n) => v.node(n),
        Core::Path(p) => v.path(p, PathRole::Core),
        Core::Subtree { node, branch } => {
            v.node(node);
            v.branch(branch);
        }
    }
    for clause in &target.ec {
        v.repetition(clause.id, &clause.occurrences, "occurrence");
        v.path(&clause.path, PathRole::Composition);
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum PathRole {
    Core,
    Arm,
    Composition,
}

struct Validator<'a> {
    schema: &'a Schema,
    out: &'a mut Vec<Diagnostic>,
}

impl Validator<'_> {
    fn report(&mut self, id: ElemId, message: impl Into<String>) {
        self.out.push(Diagnostic {
            elem_id: id,
            message: message.into(),
        });
    }

    fn repetition(&mut self, id: ElemId, rep: &Repetition, what: &str) {
        if !rep.is_valid() {
            self.report(
                id,
                format!("{what} repetition has max {:?} below min {}", rep.max, rep.min),
            );
        }
    }

    fn path(&mut self, path: &PathPattern, role: PathRole) {
        let Some(last) = path.steps.len().checked_sub(1) else {
            // no element to attach the message to; ids are per node
            self.out.push(Diagnostic {
                elem_id: ElemId(0),
                message: "path has no steps".into(),
            });
            return;
        };
        for (i, step) in path.steps.iter().enumerate() {
            self.node(&step.node);
            self.repetition(step.node.id, &step.rep, "node");
            for alt in step.node.alternatives() {
                if alt.kind == NodeKind::Root && (i > 0 || role == PathRole::Arm) {
                    self.report(alt.id, "root node may only open a core or composition path");
                }
                if alt.kind == NodeKind::Leaf && i != last {
                    self.report(alt.id, "leaf node may only close a path");
                }
            }
        }
    }

    fn branch(&mut self, branch: &BranchPattern) {
        if branch.arms.is_empty() {
            self.out.push(Diagnostic {
                elem_id: ElemId(0),
                message: "branch has no arms".into(),
            });
        }
        for arm in &branch.arms {
            self.repetition(arm.id, &arm.rep, "arm");
            self.path(&arm.path, PathRole::Arm);
            if let Some(nested) = &arm.branch {
                self.branch(nested);
            }
        }
    }

    fn node(&mut self, pattern: &NodePattern) {
        for alt in pattern.alternatives() {
            if let NodeKind::Custom(preds) = &alt.kind {
                if preds.is_empty() {
                    self.report(alt.id, "custom node has no predicates");
                }
                for p in preds {
                    self.predicate(alt.id, p);
                }
            }
        }
    }

    fn predicate(&mut self, id: ElemId, p: &Predicate) {
        let kind = if is_inherent(&p.attribute) {
            Some(AttributeKind::Numeric)
        } else {
            self.schema.get(&p.attribute).map(|s| s.kind())
        };
        let Some(kind) = kind else {
            self.report(id, format!("unknown attribute {:?}", p.attribute));
            return;
        };
        let mismatch = |expected: &str| {
            format!(
                "attribute {:?} is {} but `{}` needs {expected}",
                p.attribute,
                kind_name(kind),
                p.op.symbol()
            )
        };
        match &p.rhs {
            Operand::Relative(k) => {
                if *k > 0 {
                    self.report(id, format!("relative reference &{k} points below the node"));
                }
                if kind != AttributeKind::Numeric {
                    self.report(id, mismatch("a numeric attribute for a level reference"));
                }
                if p.op == CompareOp::In {
                    self.report(id, "`in` needs a list literal");
                }
            }
            Operand::Absolute(k) => {
                if *k < 1 {
                    self.report(id, format!("absolute reference #{k} must be at least 1"));
                }
                if kind != AttributeKind::Numeric {
                    self.report(id, mismatch("a numeric attribute for a level reference"));
                }
                if p.op == CompareOp::In {
                    self.report(id, "`in` needs a list literal");
                }
            }
            Operand::Literal(value) => match (p.op, value) {
                (CompareOp::In, AttributeValue::List(_)) => {
                    if kind != AttributeKind::Categorical {
                        self.report(id, mismatch("a categorical attribute"));
                    }
                }
                (CompareOp::In, _) => self.report(id, "`in` needs a list literal"),
                (_, AttributeValue::Number(n)) => {
                    if !n.is_finite() {
                        self.report(id, "numeric literal is not finite");
                    }
                    if kind != AttributeKind::Numeric {
                        self.report(id, mismatch("a numeric attribute"));
                    }
                }
                (op, _) if op.is_ordering() => self.report(id, format!("`{}` needs a numeric literal", op.symbol())),
                (_, _) => {
                    if kind != AttributeKind::Categorical {
                        self.report(id, mismatch("a categorical attribute"));
                    }
                }
            },
        }
    }
}

fn kind_name(kind: AttributeKind) -> &'static str {
    match kind {
        AttributeKind::Numeric => "numeric",
        AttributeKind::Categorical => "categorical",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::tree::AttributeSchema;
    use std::collections::BTreeSet;

    fn schema() -> Schema {
        let mut s = Schema::new();
        s.insert(
            "year".into(),
            AttributeSchema::Numeric {
                min: 2014.0,
                max: 2020.0,
            },
        );
        s.insert("citation".into(), AttributeSchema::Numeric { min: 0.0, max: 900.0 });
        s.insert("topics".into(), AttributeSchema::Numeric { min: 0.0, max: 1.0 });
        s.insert(
            "keywords".into(),
            AttributeSchema::Categorical {
                values: BTreeSet::new(),
            },
        );
        s
    }

    #[test]
    fn wildcard_target_is_valid() {
        assert!(validate(&parse(".").unwrap(), &Schema::new()).is_empty());
    }

    #[test]
    fn in_on_numeric_attribute() {
        let t = parse(r#"(topics in ["vis","graph"])"#).unwrap();
        let d = validate(&t, &schema());
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.contains("categorical"));
    }

    #[test]
    fn composition_example_is_valid() {
        let t = parse("(year=2019)[<(.){0,}>{0,}] - exists <(citation>=200)>{10,}").unwrap();
        assert_eq!(validate(&t, &schema()), vec![]);
    }

    #[test]
    fn level_reference_rules() {
        let t = parse("(degree=&1, degree=#0, keywords=&-1)").unwrap();
        let d = validate(&t, &schema());
        assert_eq!(d.len(), 3, "{d:?}");
    }

    #[test]
    fn placement_of_root_and_leaf() {
        assert_eq!(validate(&parse("./^").unwrap(), &schema()).len(), 1);
        assert_eq!(validate(&parse("$/.").unwrap(), &schema()).len(), 1);
        assert!(validate(&parse("^/./$").unwrap(), &schema()).is_empty());
        assert_eq!(validate(&parse(".[<^>]").unwrap(), &schema()).len(), 1);
    }

    #[test]
    fn unknown_attribute_and_duplicate_ids() {
        let mut t = parse("(nope=1)/(year>1)").unwrap();
        assert_eq!(validate(&t, &schema()).len(), 1);
        if let Core::Path(p) = &mut t.core {
            p.steps[1].node.id = p.steps[0].node.id;
        }
        assert_eq!(validate(&t, &schema()).len(), 2);
    }

    #[test]
    fn equality_ignores_ids_and_spans() {
        let a = parse("(year=2019){2,5}/.").unwrap();
        let mut b = parse("(year = 2019) {2,5} / .").unwrap();
        assert!(ast_equal(&a, &a));
        assert!(ast_equal(&a, &b));
        if let Core::Path(p) = &mut b.core {
            p.steps[0].node.id = ElemId(77);
        }
        assert!(ast_equal(&a, &b));
        let c = parse("(year=2019){2,4}/.").unwrap();
        assert!(!ast_equal(&a, &c));
    }

    #[test]
    fn widening() {
        let r = Repetition::at_least(5);
        assert_eq!(r.widened_to(2), Repetition::at_least(2));
        assert_eq!(Repetition::new(1, Some(2)).widened_to(4), Repetition::new(1, Some(4)));
        assert!(Repetition::new(0, None).contains(1000));
    }
}
