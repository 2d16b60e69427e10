//! Recursive-descent parser for the textual query syntax.
//!
//! The grammar is published in `docs/grammar.ebnf`. Element ids are handed
//! out in pre-order starting at 1, the same order [`QueryTarget::renumber`]
//! uses, so `parse(format(t))` reproduces the ids of a renumbered `t`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ast::*;
use crate::tree::AttributeValue;

/// Deepest bracket nesting the parser accepts.
pub const MAX_NESTING: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {span}: expected {}, found {found}", .expected.join(" or "))]
    Syntax {
        span: Span,
        expected: Vec<String>,
        found: String,
    },
    #[error("repetition at {span} has max {max} below min {min}")]
    Repetition { span: Span, min: u32, max: u32 },
    #[error("composition clause at {span} has no core pattern before it")]
    DanglingEc { span: Span },
    #[error("nesting at {span} is deeper than {MAX_NESTING} levels")]
    TooDeep { span: Span },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Syntax { span, .. }
            | ParseError::Repetition { span, .. }
            | ParseError::DanglingEc { span }
            | ParseError::TooDeep { span } => *span,
        }
    }
}

pub fn parse(text: &str) -> Result<QueryTarget, ParseError> {
    Parser {
        src: text,
        pos: 0,
        next_id: 1,
        depth: 0,
    }
    .target()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    next_id: u32,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn fresh_id(&mut self) -> ElemId {
        let id = ElemId(self.next_id);
        self.next_id += 1;
        id
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    /// Consumes `token` after optional whitespace.
    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn at(&mut self, token: &str) -> bool {
        self.skip_ws();
        self.rest().starts_with(token)
    }

    fn error<T>(&mut self, expected: &[&str]) -> PResult<T> {
        self.skip_ws();
        let (found, len) = match self.peek() {
            Some(c) => (format!("{c:?}"), c.len_utf8()),
            None => ("end of input".to_string(), 0),
        };
        Err(ParseError::Syntax {
            span: Span::new(self.pos, self.pos + len),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        })
    }

    fn expect(&mut self, token: &str) -> PResult<()> {
        if self.eat(token) {
            Ok(())
        } else {
            self.error(&[&format!("`{token}`")])
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            self.skip_ws();
            let end = (self.pos + self.peek().map_or(0, char::len_utf8)).min(self.src.len());
            return Err(ParseError::TooDeep {
                span: Span::new(self.pos, end),
            });
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn target(mut self) -> PResult<QueryTarget> {
        self.skip_ws();
        if self.at("-") || self.keyword_ahead().is_some() {
            let start = self.pos;
            return Err(ParseError::DanglingEc {
                span: Span::new(start, self.src.len()),
            });
        }
        let core = self.core()?;
        let mut ec = Vec::new();
        loop {
            self.skip_ws();
            if self.pos == self.src.len() {
                break;
            }
            if !self.eat("-") {
                return self.error(&["`-`", "`/`", "`|`", "`{`", "`[`", "end of input"]);
            }
            ec.push(self.ec_clause()?);
        }
        Ok(QueryTarget { core, ec })
    }

    fn keyword_ahead(&mut self) -> Option<Quantifier> {
        self.skip_ws();
        for q in [Quantifier::Exists, Quantifier::Forall] {
            let kw = q.keyword();
            if self.rest().starts_with(kw) && !self.rest()[kw.len()..].chars().next().is_some_and(is_ident_char) {
                return Some(q);
            }
        }
        None
    }

    fn core(&mut self) -> PResult<Core> {
        let (first, explicit) = self.step()?;
        let mut steps = vec![first];
        while self.eat("/") {
            steps.push(self.step()?.0);
        }
        if self.at("[") {
            if steps.len() > 1 || explicit {
                return self.error(&["`-`", "end of input"]);
            }
            let branch = self.branch()?;
            let node = steps.pop().expect("one step").node;
            return Ok(Core::Subtree { node, branch });
        }
        if steps.len() == 1 && !explicit {
            return Ok(Core::Node(steps.pop().expect("one step").node));
        }
        Ok(Core::Path(PathPattern { steps }))
    }

    fn ec_clause(&mut self) -> PResult<EcClause> {
        self.skip_ws();
        let start = self.pos;
        let Some(quantifier) = self.keyword_ahead() else {
            return self.error(&["`exists`", "`forall`"]);
        };
        self.pos += quantifier.keyword().len();
        let id = self.fresh_id();
        self.expect("<")?;
        let path = self.path_steps()?;
        self.expect(">")?;
        let occurrences = self.repetition()?.unwrap_or_default();
        Ok(EcClause {
            id,
            quantifier,
            path,
            occurrences,
            span: Some(Span::new(start, self.pos)),
        })
    }

    fn path_steps(&mut self) -> PResult<PathPattern> {
        let mut steps = vec![self.step()?.0];
        while self.eat("/") {
            steps.push(self.step()?.0);
        }
        Ok(PathPattern { steps })
    }

    /// A node with an optional repetition; the flag tells whether the
    /// repetition was written out.
    fn step(&mut self) -> PResult<(PathStep, bool)> {
        let node = self.node()?;
        let rep = self.repetition()?;
        Ok((
            PathStep {
                node,
                rep: rep.unwrap_or_default(),
            },
            rep.is_some(),
        ))
    }

    fn node(&mut self) -> PResult<NodePattern> {
        self.enter()?;
        self.skip_ws();
        let start = self.pos;
        let id = self.fresh_id();
        let negated = self.eat("!");
        let kind = if let Some(kind) = self.special() {
            kind
        } else if self.eat("(") {
            let kind = match self.special() {
                Some(kind) => kind,
                None => NodeKind::Custom(self.predicates()?),
            };
            self.expect(")")?;
            kind
        } else {
            return self.error(&["`(`", "`.`", "`^`", "`$`", "`!`"]);
        };
        let end = self.pos;
        let alternative = if self.eat("|") {
            Some(Box::new(self.node()?))
        } else {
            None
        };
        self.leave();
        Ok(NodePattern {
            id,
            kind,
            negated,
            alternative,
            span: Some(Span::new(start, end)),
        })
    }

    fn special(&mut self) -> Option<NodeKind> {
        if self.eat(".") || self.eat("•") {
            Some(NodeKind::Wildcard)
        } else if self.eat("^") || self.eat("∧") {
            Some(NodeKind::Root)
        } else if self.eat("$") {
            Some(NodeKind::Leaf)
        } else {
            None
        }
    }

    fn predicates(&mut self) -> PResult<Vec<Predicate>> {
        let mut preds = vec![self.predicate()?];
        while self.eat(",") {
            preds.push(self.predicate()?);
        }
        Ok(preds)
    }

    fn predicate(&mut self) -> PResult<Predicate> {
        let attribute = self.ident()?;
        let op = self.compare_op()?;
        let rhs = self.operand()?;
        Ok(Predicate { attribute, op, rhs })
    }

    fn ident(&mut self) -> PResult<String> {
        self.skip_ws();
        let rest = self.rest();
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return self.error(&["attribute name", "`.`", "`^`", "`$`"]),
        }
        let len = chars.find(|&(_, c)| !is_ident_char(c)).map_or(rest.len(), |(i, _)| i);
        self.pos += len;
        Ok(rest[..len].to_string())
    }

    fn compare_op(&mut self) -> PResult<CompareOp> {
        const OPS: [(&str, CompareOp); 8] = [
            (">=", CompareOp::Ge),
            ("<=", CompareOp::Le),
            ("≥", CompareOp::Ge),
            ("≤", CompareOp::Le),
            (">", CompareOp::Gt),
            ("<", CompareOp::Lt),
            ("=", CompareOp::Eq),
            ("∈", CompareOp::In),
        ];
        for (tok, op) in OPS {
            if self.eat(tok) {
                return Ok(op);
            }
        }
        if self.at("in") && !self.rest()[2..].chars().next().is_some_and(is_ident_char) {
            self.pos += 2;
            return Ok(CompareOp::In);
        }
        self.error(&["`>`", "`>=`", "`<`", "`<=`", "`=`", "`in`"])
    }

    fn operand(&mut self) -> PResult<Operand> {
        if self.eat("&") {
            return Ok(Operand::Relative(self.integer()?));
        }
        if self.eat("#") {
            return Ok(Operand::Absolute(self.integer()?));
        }
        self.skip_ws();
        match self.peek() {
            Some('"') => Ok(Operand::Literal(AttributeValue::Text(self.string()?))),
            Some('[') => {
                self.pos += 1;
                let mut items = BTreeSet::new();
                if !self.eat("]") {
                    items.insert(self.string()?);
                    while self.eat(",") {
                        items.insert(self.string()?);
                    }
                    self.expect("]")?;
                }
                Ok(Operand::Literal(AttributeValue::List(items)))
            }
            Some(c) if c == '-' || c.is_ascii_digit() => Ok(Operand::Literal(AttributeValue::Number(self.number()?))),
            _ => self.error(&["number", "string", "list", "`&`", "`#`"]),
        }
    }

    fn integer(&mut self) -> PResult<i64> {
        self.skip_ws();
        let start = self.pos;
        let rest = self.rest();
        let sign = usize::from(rest.starts_with('-'));
        let digits = rest[sign..]
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(rest.len() - sign);
        if digits == 0 {
            self.pos += sign;
            return self.error(&["integer"]);
        }
        let text = &rest[..sign + digits];
        match text.parse() {
            Ok(v) => {
                self.pos += text.len();
                Ok(v)
            }
            Err(_) => Err(ParseError::Syntax {
                span: Span::new(start, start + text.len()),
                expected: vec!["integer in range".into()],
                found: text.to_string(),
            }),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = start;
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > s
        };
        if i < bytes.len() && bytes[i] == b'-' {
            i += 1;
        }
        if !digits(&mut i) {
            self.pos = i;
            return self.error(&["digit"]);
        }
        if i < bytes.len() && bytes[i] == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
            i += 1;
            digits(&mut i);
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) {
                i = j;
            }
        }
        let text = &self.src[start..i];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = i;
                Ok(v)
            }
            _ => Err(ParseError::Syntax {
                span: Span::new(start, i),
                expected: vec!["finite number".into()],
                found: text.to_string(),
            }),
        }
    }

    fn string(&mut self) -> PResult<String> {
        self.skip_ws();
        if !self.rest().starts_with('"') {
            return self.error(&["string"]);
        }
        let start = self.pos;
        let mut out = String::new();
        let mut chars = self.rest()[1..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos = start + 1 + i + 1;
                    return Ok(out);
                }
                '\\' => {
                    let Some((j, esc)) = chars.next() else { break };
                    let here = start + 1 + j;
                    out.push(match esc {
                        '"' => '"',
                        '\\' => '\\',
                        '/' => '/',
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        'u' => {
                            let hex: String = chars.by_ref().take(4).map(|(_, c)| c).collect();
                            match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                                Some(c) if hex.len() == 4 => c,
                                _ => {
                                    return Err(ParseError::Syntax {
                                        span: Span::new(here, (here + 1 + hex.len()).min(self.src.len())),
                                        expected: vec!["four hex digits".into()],
                                        found: hex,
                                    })
                                }
                            }
                        }
                        other => {
                            return Err(ParseError::Syntax {
                                span: Span::new(here, here + other.len_utf8()),
                                expected: vec!["escape sequence".into()],
                                found: format!("{other:?}"),
                            })
                        }
                    });
                }
                c => out.push(c),
            }
        }
        self.pos = self.src.len();
        self.error(&["`\"`"])
    }

    /// `{m,n}`, `{m,}`, `{,n}`, `{m}`; `None` when absent.
    fn repetition(&mut self) -> PResult<Option<Repetition>> {
        self.skip_ws();
        let start = self.pos;
        if !self.eat("{") {
            return Ok(None);
        }
        let min = if self.at(",") { None } else { Some(self.count()?) };
        let rep = if self.eat(",") {
            let max = if self.at("}") { None } else { Some(self.count()?) };
            if min.is_none() && max.is_none() {
                return self.error(&["count"]);
            }
            Repetition::new(min.unwrap_or(0), max)
        } else {
            let n = min.expect("count parsed");
            Repetition::exactly(n)
        };
        self.expect("}")?;
        if let Some(max) = rep.max.filter(|&m| m < rep.min) {
            return Err(ParseError::Repetition {
                span: Span::new(start, self.pos),
                min: rep.min,
                max,
            });
        }
        Ok(Some(rep))
    }

    fn count(&mut self) -> PResult<u32> {
        self.skip_ws();
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(self.rest().len());
        if len == 0 {
            return self.error(&["count"]);
        }
        let text = &self.rest()[..len];
        match text.parse() {
            Ok(n) => {
                self.pos += len;
                Ok(n)
            }
            Err(_) => Err(ParseError::Syntax {
                span: Span::new(start, start + len),
                expected: vec!["count below 2^32".into()],
                found: text.to_string(),
            }),
        }
    }

    fn branch(&mut self) -> PResult<BranchPattern> {
        self.enter()?;
        self.expect("[")?;
        let mut arms = vec![self.arm()?];
        while self.eat(",") {
            arms.push(self.arm()?);
        }
        self.expect("]")?;
        self.leave();
        Ok(BranchPattern { arms })
    }

    fn arm(&mut self) -> PResult<BranchArm> {
        self.skip_ws();
        let start = self.pos;
        self.expect("<")?;
        let id = self.fresh_id();
        let path = self.path_steps()?;
        let branch = if self.at("[") { Some(self.branch()?) } else { None };
        self.expect(">")?;
        let rep = self.repetition()?.unwrap_or_default();
        Ok(BranchArm {
            id,
            path,
            rep,
            branch,
            span: Some(Span::new(start, self.pos)),
        })
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}
