//! Request-level entry points shared by the CLI and the HTTP service.
//!
//! Each function returns the exact bytes both front ends emit, so the two
//! stay byte-identical by construction.

use serde_json::{json, Value};
use thiserror::Error;

use crate::ast::{validate, Diagnostic, QueryTarget};
use crate::interchange::{ast_decode, AstDecodeError};
use crate::matcher::Matcher;
use crate::parser::{parse, ParseError};
use crate::recommender::{recommend, recommendations_json, RecommendOptions};
use crate::similarity::{project, projection_json, Method};
use crate::stats::corpus_stats;
use crate::tree::{Corpus, Schema};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RequestError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ast(#[from] AstDecodeError),
    #[error("expression does not fit the corpus: {}", .0.iter().map(|d| format!("element {}: {}", d.elem_id, d.message)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("supply exactly one of an expression text and an AST document")]
    ExprSource,
}

impl RequestError {
    /// `{"error": kind, "message": ..., ...}` with the span and expected
    /// tokens for syntax errors.
    pub fn to_json(&self) -> Value {
        let message = self.to_string();
        match self {
            RequestError::Parse(e) => {
                let span = e.span();
                let mut v = json!({
                    "error": "parse_error",
                    "message": message,
                    "span": {"start": span.start, "end": span.end},
                });
                if let ParseError::Syntax { expected, found, .. } = e {
                    v["expected"] = json!(expected);
                    v["found"] = json!(found);
                }
                v
            }
            RequestError::Ast(_) => json!({"error": "malformed_ast", "message": message}),
            RequestError::Invalid(diags) => json!({
                "error": "invalid_expression",
                "message": message,
                "diagnostics": diags,
            }),
            RequestError::ExprSource => json!({"error": "bad_request", "message": message}),
        }
    }
}

/// Parses or decodes the expression and validates it against `schema`.
pub fn resolve_target(expr: Option<&str>, ast: Option<&Value>, schema: &Schema) -> Result<QueryTarget, RequestError> {
    let target = match (expr, ast) {
        (Some(text), None) => parse(text)?,
        (None, Some(doc)) => ast_decode(doc)?,
        _ => return Err(RequestError::ExprSource),
    };
    let diags = validate(&target, schema);
    if diags.is_empty() {
        Ok(target)
    } else {
        Err(RequestError::Invalid(diags))
    }
}

pub fn query_json(target: &QueryTarget, corpus: &Corpus) -> String {
    Matcher::new(target).match_corpus(corpus).to_json()
}

pub fn recommend_json(target: &QueryTarget, corpus: &Corpus, k: usize) -> String {
    let opts = RecommendOptions {
        k,
        ..RecommendOptions::default()
    };
    recommendations_json(&recommend(target, corpus, &opts))
}

pub fn project_json(corpus: &Corpus, method: Method, seed: u64) -> String {
    projection_json(&project(corpus, method, seed))
}

pub fn stats_json(corpus: &Corpus) -> String {
    corpus_stats(corpus).to_json()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::interchange::ast_encode;

    #[test]
    fn exactly_one_source() {
        let schema = Schema::new();
        let doc = ast_encode(&parse(".").unwrap());
        assert_eq!(resolve_target(None, None, &schema), Err(RequestError::ExprSource));
        assert_eq!(
            resolve_target(Some("."), Some(&doc), &schema),
            Err(RequestError::ExprSource)
        );
        assert!(resolve_target(None, Some(&doc), &schema).is_ok());
    }

    #[test]
    fn syntax_error_carries_span() {
        let err = resolve_target(Some("(("), None, &Schema::new()).unwrap_err();
        let v = err.to_json();
        assert_eq!(v["error"], "parse_error");
        assert!(v["span"]["start"].is_u64());
        assert!(v["expected"].is_array());
    }

    #[test]
    fn unknown_attribute_is_rejected() {
        let corpus = fixtures::citation_corpus();
        let err = resolve_target(Some("(colour=1)"), None, &corpus.attribute_schema).unwrap_err();
        assert!(matches!(err, RequestError::Invalid(_)));
        assert_eq!(err.to_json()["error"], "invalid_expression");
    }
}
