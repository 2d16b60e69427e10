//! `treequery`: grep for trees.
//!
//! Every subcommand prints the library's JSON serialization on stdout and
//! diagnostics on stderr. Exit codes follow grep: 0 on success (a match for
//! `query`), 1 when `query` matches nothing, 2 on any error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use treequery::api::{self, RequestError, DEFAULT_K, DEFAULT_SEED};
use treequery::fixtures::{self, CASE_STUDY_EXPRESSIONS, COVERAGE_EXPRESSIONS, DL_CITER_WIDENINGS};
use treequery::matcher::MatchReport;
use treequery::similarity::Method;
use treequery::{load_corpus, Corpus, Matcher, QueryTarget};

#[derive(Parser)]
#[command(
    name = "treequery",
    version,
    about = "Query, relax and summarize tree corpora with tree regular expressions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match an expression against every tree of a corpus.
    Query {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        expr: ExprSource,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Relax an expression towards the trees it misses.
    Recommend {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        expr: ExprSource,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
    /// Project topology groups to 2D.
    Project {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "tsne", value_parser = parse_method)]
        method: Method,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Validate a corpus file and print its statistics.
    Check {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Write the synthetic citation corpus, example expressions and their
    /// expected counts.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ExprSource {
    /// Expression text.
    #[arg(long)]
    expr: Option<String>,
    /// File holding an AST interchange document.
    #[arg(long, value_name = "FILE")]
    ast: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

struct Failure(String);

impl From<RequestError> for Failure {
    fn from(e: RequestError) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Query { corpus, expr, format } => {
            let corpus = read_corpus(&corpus)?;
            let target = resolve(&expr, &corpus)?;
            let report = Matcher::new(&target).match_corpus(&corpus);
            for d in &report.diagnostics {
                eprintln!("warning: {}", serde_json::to_string(d).expect("diagnostic serializes"));
            }
            match format {
                Format::Json => emit(&report.to_json()),
                Format::Table => emit(&table(&report)),
            }
            Ok(ExitCode::from(if report.matched_count() > 0 { 0 } else { 1 }))
        }
        Command::Recommend { corpus, expr, k } => {
            let corpus = read_corpus(&corpus)?;
            let target = resolve(&expr, &corpus)?;
            emit(&api::recommend_json(&target, &corpus, k));
            Ok(ExitCode::SUCCESS)
        }
        Command::Project { corpus, method, seed } => {
            let corpus = read_corpus(&corpus)?;
            emit(&api::project_json(&corpus, method, seed));
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { corpus } => {
            let corpus = read_corpus(&corpus)?;
            emit(&api::stats_json(&corpus));
            Ok(ExitCode::SUCCESS)
        }
        Command::Fixtures { out } => {
            write_fixtures(&out).map_err(|e| Failure(format!("{}: {e}", out.display())))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    // a closed pipe is not worth a panic
    let _ = writeln!(out, "{text}");
}

fn read_corpus(path: &Path) -> Result<Corpus, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    load_corpus(&bytes).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn resolve(source: &ExprSource, corpus: &Corpus) -> Result<QueryTarget, Failure> {
    let ast = match &source.ast {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| Failure(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    api::resolve_target(source.expr.as_deref(), ast.as_ref(), &corpus.attribute_schema).map_err(|e| {
        match (&e, &source.expr) {
            (RequestError::Parse(p), Some(text)) => {
                let span = p.span();
                let width = text[span.start..span.end.max(span.start)].chars().count().max(1);
                let lead = text[..span.start].chars().count();
                Failure(format!("{e}\n  {text}\n  {}{}", " ".repeat(lead), "^".repeat(width)))
            }
            _ => e.into(),
        }
    })
}

fn table(report: &MatchReport) -> String {
    let mut lines = vec!["tree\troot\tbinding".to_string()];
    for (tree, results) in &report.trees {
        for r in results {
            let binding: Vec<String> = r
                .binding
                .iter()
                .map(|(elem, nodes)| format!("{elem}={}", nodes.join(",")))
                .collect();
            lines.push(format!("{tree}\t{}\t{}", r.match_root, binding.join(" ")));
        }
    }
    lines.join("\n")
}

fn write_fixtures(out: &Path) -> std::io::Result<()> {
    let exprs_dir = out.join("expressions");
    fs::create_dir_all(&exprs_dir)?;
    fs::write(out.join("corpus.json"), fixtures::citation_corpus().to_json())?;
    let mut expected = Vec::new();
    for (suite, set) in [
        ("case-study", &CASE_STUDY_EXPRESSIONS[..]),
        ("coverage", &COVERAGE_EXPRESSIONS[..]),
    ] {
        for f in set {
            fs::write(exprs_dir.join(format!("{}.hre", f.name)), format!("{}\n", f.text))?;
            expected.push(json!({
                "name": f.name,
                "suite": suite,
                "category": f.category,
                "expr": f.text,
                "trees": f.trees,
                "results": f.results,
            }));
        }
    }
    let widenings: Vec<_> = DL_CITER_WIDENINGS
        .iter()
        .map(|(expr, count)| json!({"expr": expr, "count": count}))
        .collect();
    let doc = json!({
        "expressions": expected,
        "recommendations": {"seed": CASE_STUDY_EXPRESSIONS[4].text, "widenings": widenings},
    });
    fs::write(out.join("expected.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    eprintln!(
        "wrote corpus.json, expected.json and {} expressions to {}",
        expected.len(),
        out.display()
    );
    Ok(())
}
