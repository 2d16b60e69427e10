//! Tree regular expressions over multivariate hierarchical data.
//!
//! Load a [`Corpus`](tree::Corpus), parse an expression with
//! [`parser::parse`], and evaluate it with [`matcher::Matcher`]. The
//! [`recommender`] relaxes expressions that match too little; the
//! [`similarity`] module builds the structural overview.

pub mod api;
pub mod ast;
pub mod fixtures;
pub mod format;
pub mod interchange;
pub mod matcher;
pub mod oracle;
pub mod parser;
pub mod recommender;
pub mod similarity;
pub mod stats;
pub mod tree;

pub use ast::{ast_equal, validate, QueryTarget};
pub use format::format;
pub use matcher::{match_corpus, match_tree, MatchReport, MatchResult, Matcher};
pub use parser::{parse, ParseError};
pub use tree::{load_corpus, Corpus, MultiTree};
