//! JSON interchange form of the AST, shared with the editor client.
//!
//! The layout is documented in `docs/ast-interchange.md`. Decoding is strict:
//! unknown fields, unknown tags, and inverted repetitions are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::*;
use crate::tree::AttributeValue;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AstDecodeError {
    #[error("malformed AST document: {0}")]
    MalformedAst(String),
    #[error("unknown quantifier {0:?}")]
    UnknownQuantifier(String),
    #[error("bad repetition: max {max} is below min {min}")]
    BadRepetition { min: u32, max: u32 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetDoc {
    core: CoreDoc,
    #[serde(default)]
    ec: Vec<EcDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum CoreDoc {
    Node { node: NodeDoc },
    Path { path: PathDoc },
    Subtree { node: NodeDoc, branch: BranchDoc },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: u32,
    kind: KindDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predicates: Option<Vec<PredicateDoc>>,
    #[serde(default)]
    negated: bool,
    #[serde(default)]
    alternative: Option<Box<NodeDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    span: Option<Span>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindDoc {
    Custom,
    Wildcard,
    Root,
    Leaf,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredicateDoc {
    attribute: String,
    op: CompareOp,
    rhs: OperandDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum OperandDoc {
    Literal { value: AttributeValue },
    Relative { offset: i64 },
    Absolute { level: i64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RepDoc {
    min: u32,
    max: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    node: NodeDoc,
    repetition: RepDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathDoc {
    steps: Vec<StepDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchDoc {
    arms: Vec<ArmDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmDoc {
    id: u32,
    path: PathDoc,
    repetition: RepDoc,
    #[serde(default)]
    branch: Option<BranchDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    span: Option<Span>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EcDoc {
    id: u32,
    quantifier: String,
    path: PathDoc,
    occurrences: RepDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    span: Option<Span>,
}

/// Encodes a target as an interchange value.
pub fn ast_encode(target: &QueryTarget) -> serde_json::Value {
    serde_json::to_value(encode_target(target)).expect("AST encodes")
}

pub fn ast_encode_string(target: &QueryTarget) -> String {
    serde_json::to_string(&encode_target(target)).expect("AST encodes")
}

pub fn ast_decode(document: &serde_json::Value) -> Result<QueryTarget, AstDecodeError> {
    let doc = TargetDoc::deserialize(document).map_err(|e| AstDecodeError::MalformedAst(e.to_string()))?;
    decode_target(doc)
}

pub fn ast_decode_str(document: &str) -> Result<QueryTarget, AstDecodeError> {
    let doc: TargetDoc = serde_json::from_str(document).map_err(|e| AstDecodeError::MalformedAst(e.to_string()))?;
    decode_target(doc)
}

fn encode_target(t: &QueryTarget) -> TargetDoc {
    TargetDoc {
        core: match &t.core {
            Core::Node(n) => CoreDoc::Node { node: encode_node(n) },
            Core::Path(p) => CoreDoc::Path { path: encode_path(p) },
            Core::Subtree { node, branch } => CoreDoc::Subtree {
                node: encode_node(node),
                branch: encode_branch(branch),
            },
        },
        ec: t
            .ec
            .iter()
            .map(|c| EcDoc {
                id: c.id.0,
                quantifier: c.quantifier.keyword().to_string(),
                path: encode_path(&c.path),
                occurrences: encode_rep(c.occurrences),
                span: c.span,
            })
            .collect(),
    }
}

fn encode_rep(r: Repetition) -> RepDoc {
    RepDoc { min: r.min, max: r.max }
}

fn encode_node(n: &NodePattern) -> NodeDoc {
    let (kind, predicates) = match &n.kind {
        NodeKind::Custom(preds) => (
            KindDoc::Custom,
            Some(
                preds
                    .iter()
                    .map(|p| PredicateDoc {
                        attribute: p.attribute.clone(),
                        op: p.op,
                        rhs: match &p.rhs {
                            Operand::Literal(v) => OperandDoc::Literal { value: v.clone() },
                            Operand::Relative(k) => OperandDoc::Relative { offset: *k },
                            Operand::Absolute(k) => OperandDoc::Absolute { level: *k },
                        },
                    })
                    .collect(),
            ),
        ),
        NodeKind::Wildcard => (KindDoc::Wildcard, None),
        NodeKind::Root => (KindDoc::Root, None),
        NodeKind::Leaf => (KindDoc::Leaf, None),
    };
    NodeDoc {
        id: n.id.0,
        kind,
        predicates,
        negated: n.negated,
        alternative: n.alternative.as_deref().map(|a| Box::new(encode_node(a))),
        span: n.span,
    }
}

fn encode_path(p: &PathPattern) -> PathDoc {
    PathDoc {
        steps: p
            .steps
            .iter()
            .map(|s| StepDoc {
                node: encode_node(&s.node),
                repetition: encode_rep(s.rep),
            })
            .collect(),
    }
}

fn encode_branch(b: &BranchPattern) -> BranchDoc {
    BranchDoc {
        arms: b
            .arms
            .iter()
            .map(|a| ArmDoc {
                id: a.id.0,
                path: encode_path(&a.path),
                repetition: encode_rep(a.rep),
                branch: a.branch.as_ref().map(encode_branch),
                span: a.span,
            })
            .collect(),
    }
}

fn decode_target(doc: TargetDoc) -> Result<QueryTarget, AstDecodeError> {
    let core = match doc.core {
        CoreDoc::Node { node } => Core::Node(decode_node(node)?),
        CoreDoc::Path { path } => Core::Path(decode_path(path)?),
        CoreDoc::Subtree { node, branch } => Core::Subtree {
            node: decode_node(node)?,
            branch: decode_branch(branch)?,
        },
    };
    let ec = doc
        .ec
        .into_iter()
        .map(|c| {
            let quantifier = match c.quantifier.as_str() {
                "exists" => Quantifier::Exists,
                "forall" => Quantifier::Forall,
                other => return Err(AstDecodeError::UnknownQuantifier(other.to_string())),
            };
            Ok(EcClause {
                id: ElemId(c.id),
                quantifier,
                path: decode_path(c.path)?,
                occurrences: decode_rep(c.occurrences)?,
                span: c.span,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(QueryTarget { core, ec })
}

fn decode_rep(r: RepDoc) -> Result<Repetition, AstDecodeError> {
    match r.max {
        Some(max) if max < r.min => Err(AstDecodeError::BadRepetition { min: r.min, max }),
        max => Ok(Repetition::new(r.min, max)),
    }
}

fn decode_node(n: NodeDoc) -> Result<NodePattern, AstDecodeError> {
    let kind = match (n.kind, n.predicates) {
        (KindDoc::Custom, Some(predicates)) => {
            if predicates.is_empty() {
                return Err(AstDecodeError::MalformedAst(
                    "custom node needs at least one predicate".into(),
                ));
            }
            NodeKind::Custom(
                predicates
                    .into_iter()
                    .map(|p| Predicate {
                        attribute: p.attribute,
                        op: p.op,
                        rhs: match p.rhs {
                            OperandDoc::Literal { value } => Operand::Literal(value),
                            OperandDoc::Relative { offset } => Operand::Relative(offset),
                            OperandDoc::Absolute { level } => Operand::Absolute(level),
                        },
                    })
                    .collect(),
            )
        }
        (KindDoc::Custom, None) => return Err(AstDecodeError::MalformedAst("custom node needs predicates".into())),
        (_, Some(_)) => {
            return Err(AstDecodeError::MalformedAst(
                "only custom nodes carry predicates".into(),
            ))
        }
        (KindDoc::Wildcard, None) => NodeKind::Wildcard,
        (KindDoc::Root, None) => NodeKind::Root,
        (KindDoc::Leaf, None) => NodeKind::Leaf,
    };
    Ok(NodePattern {
        id: ElemId(n.id),
        kind,
        negated: n.negated,
        alternative: n.alternative.map(|a| decode_node(*a).map(Box::new)).transpose()?,
        span: n.span,
    })
}

fn decode_path(p: PathDoc) -> Result<PathPattern, AstDecodeError> {
    if p.steps.is_empty() {
        return Err(AstDecodeError::MalformedAst("path needs at least one step".into()));
    }
    Ok(PathPattern {
        steps: p
            .steps
            .into_iter()
            .map(|s| {
                Ok(PathStep {
                    node: decode_node(s.node)?,
                    rep: decode_rep(s.repetition)?,
                })
            })
            .collect::<Result<_, _>>()?,
    })
}

fn decode_branch(b: BranchDoc) -> Result<BranchPattern, AstDecodeError> {
    if b.arms.is_empty() {
        return Err(AstDecodeError::MalformedAst("branch needs at least one arm".into()));
    }
    Ok(BranchPattern {
        arms: b
            .arms
            .into_iter()
            .map(|a| {
                Ok(BranchArm {
                    id: ElemId(a.id),
                    path: decode_path(a.path)?,
                    rep: decode_rep(a.repetition)?,
                    branch: a.branch.map(decode_branch).transpose()?,
                    span: a.span,
                })
            })
            .collect::<Result<_, _>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use serde_json::json;

    #[test]
    fn round_trip_keeps_ids_and_spans() {
        let t = parse("(year=2019)[<(.){0,}>{0,}] - exists <(citation>=200)>{10,}").unwrap();
        let back = ast_decode(&ast_encode(&t)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn repeated_author_document() {
        let doc = json!({
            "core": {"kind": "path", "path": {"steps": [{
                "node": {"id": 1, "kind": "custom", "negated": false, "alternative": null,
                    "predicates": [{"attribute": "authors", "op": "eq",
                        "rhs": {"kind": "literal", "value": "Ben Shneiderman"}}]},
                "repetition": {"min": 3, "max": null}}]}},
            "ec": []
        });
        let t = ast_decode(&doc).unwrap();
        let Core::Path(p) = &t.core else { panic!() };
        assert_eq!(p.steps.len(), 1);
        assert_eq!(p.steps[0].rep, Repetition::at_least(3));
        assert!(ast_equal(&t, &parse(r#"(authors="Ben Shneiderman"){3,}"#).unwrap()));
        assert_eq!(ast_encode(&t), doc);
    }

    #[test]
    fn rejections() {
        let bad_rep = json!({"core": {"kind": "path", "path": {"steps": [{
            "node": {"id": 1, "kind": "wildcard"}, "repetition": {"min": 3, "max": 1}}]}}});
        assert_eq!(
            ast_decode(&bad_rep),
            Err(AstDecodeError::BadRepetition { min: 3, max: 1 })
        );

        let bad_q = json!({"core": {"kind": "node", "node": {"id": 1, "kind": "wildcard"}},
            "ec": [{"id": 2, "quantifier": "some", "occurrences": {"min": 1, "max": 1},
                "path": {"steps": [{"node": {"id": 3, "kind": "leaf"}, "repetition": {"min": 1, "max": 1}}]}}]});
        assert_eq!(
            ast_decode(&bad_q),
            Err(AstDecodeError::UnknownQuantifier("some".into()))
        );

        let unknown = json!({"core": {"kind": "node", "node": {"id": 1, "kind": "wildcard", "color": "red"}}});
        assert!(matches!(ast_decode(&unknown), Err(AstDecodeError::MalformedAst(_))));
        let extra_top = json!({"core": {"kind": "node", "node": {"id": 1, "kind": "wildcard"}}, "x": 1});
        assert!(matches!(ast_decode(&extra_top), Err(AstDecodeError::MalformedAst(_))));
        let no_steps = json!({"core": {"kind": "path", "path": {"steps": []}}});
        assert!(matches!(ast_decode(&no_steps), Err(AstDecodeError::MalformedAst(_))));
    }
}
