//! Primary acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p treequery-acceptance --test acceptance`. A name
//! fragment after `--` runs only the matching criteria.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::{json, Value};
use treequery::api;
use treequery::ast::{ast_equal, validate};
use treequery::fixtures::{
    self, FixtureExpr, TreeParams, CASE_STUDY_EXPRESSIONS, COVERAGE_EXPRESSIONS, DL_CITER_WIDENINGS,
};
use treequery::interchange::ast_encode;
use treequery::matcher::match_tree;
use treequery::oracle::oracle_match;
use treequery::recommender::{recommend, recommendations_json, relax_for_item, RecommendOptions};
use treequery::similarity::{
    group_trees, project, project_with, ted_oracle, tree_edit_distance, Method, ProjectionPoint, StructuralFeatures,
};
use treequery::{format, parse, Corpus, Matcher, MultiTree, QueryTarget};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
/// `(trees, results)` from the matcher and from the oracle.
type Counts = ((usize, usize), (usize, usize));

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Value of the insert/delete example pair, found by the exhaustive mapping
/// search when the fixture was built.
const EXAMPLE_EDIT_DISTANCE: usize = 1;

const CRITERIA: [Criterion; 9] = [
    ("oracle-equivalence", oracle_equivalence),
    ("branch-example-no-match", branch_example_no_match),
    ("case-study-expression-suite", case_study_expression_suite),
    ("category-coverage-suite", category_coverage_suite),
    ("recommender-laws", recommender_laws),
    ("parser-round-trip-and-fuzz", parser_round_trip_and_fuzz),
    ("edit-distance", edit_distance),
    ("projection", projection),
    ("service-equivalence", service_equivalence),
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for (name, _) in CRITERIA {
            println!("{name}: test");
        }
        return;
    }
    let filter = args.iter().find(|a| !a.starts_with('-'));
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for (name, criterion) in CRITERIA {
        if filter.is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} ({secs:.2}s)");
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn counts(target: &QueryTarget, corpus: &Corpus) -> Result<Counts, String> {
    let report = Matcher::new(target).match_corpus(corpus);
    let matcher = (report.matched_count(), report.trees.iter().map(|(_, r)| r.len()).sum());
    let mut oracle = (0, 0);
    for tree in &corpus.trees {
        let r = oracle_match(target, tree).map_err(|e| format!("{}: {e}", tree.tree_id))?;
        if !r.is_empty() {
            oracle.0 += 1;
            oracle.1 += r.len();
        }
    }
    Ok((matcher, oracle))
}

fn check_fixture_counts(exprs: &[FixtureExpr], corpus: &Corpus) -> Result<(), String> {
    for f in exprs {
        let target = parse(f.text).map_err(|e| format!("{}: {e}", f.name))?;
        let diags = validate(&target, &corpus.attribute_schema);
        ensure!(diags.is_empty(), "{} does not validate: {diags:?}", f.name);
        let (matcher, oracle) = counts(&target, corpus)?;
        ensure!(
            matcher == oracle,
            "{}: matcher {matcher:?} vs oracle {oracle:?}",
            f.name
        );
        ensure!(
            matcher == (f.trees, f.results),
            "{}: got {matcher:?}, fixture records {:?}",
            f.name,
            (f.trees, f.results)
        );
    }
    Ok(())
}

fn oracle_equivalence() -> Outcome {
    const PAIRS: usize = 2000;
    let start = Instant::now();
    let mut r = fixtures::rng(0xacce97);
    let params = TreeParams::default();
    let (mut nonempty, mut results) = (0, 0);
    for i in 0..PAIRS {
        let tree = fixtures::random_tree(&mut r, &format!("t{i}"), params);
        let target = fixtures::random_target(&mut r, 3);
        ensure!(
            tree.len() <= 40 && target.depth() <= 3,
            "generator out of bounds at pair {i}"
        );
        let got = match_tree(&target, &tree);
        let want = oracle_match(&target, &tree).map_err(|e| format!("pair {i}: {e}"))?;
        ensure!(
            got == want,
            "pair {i}: `{target}` on {}: matcher {got:?} vs oracle {want:?}",
            tree.tree_id
        );
        if !got.is_empty() {
            nonempty += 1;
            results += got.len();
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "{PAIRS} pairs identical, {nonempty} with matches ({results} results)"
    ))
}

fn branch_example_no_match() -> Outcome {
    let (text, tree) = fixtures::branch_example();
    let target = parse(text).map_err(|e| e.to_string())?;
    let corpus = Corpus::from_trees(vec![tree.clone()]).map_err(|e| e.to_string())?;
    ensure!(
        validate(&target, &corpus.attribute_schema).is_empty(),
        "expression does not validate"
    );
    let got = match_tree(&target, &tree);
    ensure!(got.is_empty(), "matcher found {got:?}");
    let want = oracle_match(&target, &tree).map_err(|e| e.to_string())?;
    ensure!(want.is_empty(), "oracle found {want:?}");
    // one qualifying path is present, so a single-path demand does match
    let single = parse(&text.replace(">{2,}]", ">{1,}]")).map_err(|e| e.to_string())?;
    ensure!(
        match_tree(&single, &tree).len() == 1,
        "single-path variant should match once"
    );
    Ok(format!("`{text}` has no match; the single-path variant matches once"))
}

fn case_study_expression_suite() -> Outcome {
    let corpus = fixtures::citation_corpus();
    check_fixture_counts(&CASE_STUDY_EXPRESSIONS, &corpus)?;

    let branch = parse(CASE_STUDY_EXPRESSIONS[1].text).unwrap();
    let report = Matcher::new(&branch).match_corpus(&corpus);
    let roots: Vec<&str> = report
        .trees
        .iter()
        .flat_map(|(_, r)| r.iter().map(|m| m.match_root.as_str()))
        .collect();
    ensure!(roots == ["shneiderman-hub-root"], "branch example roots {roots:?}");

    let chain = corpus.tree("shneiderman-chain").ok_or("chain fixture missing")?;
    let path = parse(CASE_STUDY_EXPRESSIONS[0].text).unwrap();
    let first = match_tree(&path, chain)
        .into_iter()
        .next()
        .ok_or("chain does not match")?;
    let bound = first.binding.values().next().map_or(0, Vec::len);
    ensure!(
        first.match_root == chain.node(chain.root()).id && bound == 4,
        "greedy chain binding {first:?}"
    );

    let summary: Vec<String> = CASE_STUDY_EXPRESSIONS
        .iter()
        .map(|f| format!("{}={}", f.name, f.trees))
        .collect();
    Ok(format!(
        "{} expressions oracle-confirmed: {}",
        CASE_STUDY_EXPRESSIONS.len(),
        summary.join(", ")
    ))
}

fn category_coverage_suite() -> Outcome {
    let corpus = fixtures::citation_corpus();
    ensure!(
        COVERAGE_EXPRESSIONS.len() >= 12,
        "only {} expressions",
        COVERAGE_EXPRESSIONS.len()
    );
    let covered: BTreeSet<&str> = COVERAGE_EXPRESSIONS.iter().map(|f| f.category).collect();
    for target in ["node", "path", "subtree", "tree"] {
        for kind in ["feature", "position"] {
            let cat = format!("{target}/{kind}");
            ensure!(covered.contains(cat.as_str()), "category {cat} not covered");
        }
    }
    check_fixture_counts(&COVERAGE_EXPRESSIONS, &corpus)?;
    let matching = COVERAGE_EXPRESSIONS.iter().filter(|f| f.trees > 0).count();
    Ok(format!(
        "{} expressions over 8 categories oracle-confirmed, {matching} with matches",
        COVERAGE_EXPRESSIONS.len()
    ))
}

fn matched_ids(target: &QueryTarget, corpus: &Corpus) -> BTreeSet<String> {
    Matcher::new(target)
        .match_corpus(corpus)
        .matched_tree_ids()
        .into_iter()
        .map(String::from)
        .collect()
}

fn recommender_laws() -> Outcome {
    const CASES: u64 = 200;
    let opts = RecommendOptions::default();
    let params = TreeParams {
        max_nodes: 20,
        max_degree: 4,
    };
    let (mut with_recs, mut total, mut relaxed) = (0, 0, 0);
    for case in 0..CASES {
        let corpus = fixtures::random_corpus(1000 + case, 6, params);
        let seed = fixtures::random_target(&mut fixtures::rng(case), 3);
        let base = matched_ids(&seed, &corpus);
        let recs = recommend(&seed, &corpus, &opts);
        for rec in &recs {
            let ids = matched_ids(&rec.expression, &corpus);
            ensure!(
                base.is_subset(&ids),
                "case {case}: `{}` loses trees of `{seed}`",
                rec.expression
            );
            let listed: BTreeSet<String> = rec.matched_tree_ids.iter().cloned().collect();
            ensure!(
                listed == ids && rec.match_count == ids.len(),
                "case {case}: stale count"
            );
            ensure!(
                !rec.edits.is_empty() && rec.edits.len() <= opts.max_edits,
                "case {case}: edit trace length"
            );
        }
        for (i, a) in recs.iter().enumerate() {
            for b in &recs[i + 1..] {
                ensure!(
                    !ast_equal(&a.expression, &b.expression),
                    "case {case}: duplicate `{}`",
                    a.expression
                );
            }
        }
        let again = recommend(&seed, &corpus, &opts);
        ensure!(
            recommendations_json(&recs) == recommendations_json(&again),
            "case {case}: ranking differs between runs"
        );
        // relaxed expressions match their own tree by the oracle
        for tree in corpus.trees.iter().filter(|t| !base.contains(&t.tree_id)) {
            if let Some((expr, _)) = relax_for_item(&seed, tree) {
                let r = oracle_match(&expr, tree).map_err(|e| e.to_string())?;
                ensure!(!r.is_empty(), "case {case}: `{expr}` does not match {}", tree.tree_id);
                relaxed += 1;
            }
        }
        with_recs += usize::from(!recs.is_empty());
        total += recs.len();
    }

    let corpus = fixtures::citation_corpus();
    let recs = recommend(&parse(CASE_STUDY_EXPRESSIONS[4].text).unwrap(), &corpus, &opts);
    for (text, count) in DL_CITER_WIDENINGS {
        let found = recs.iter().find(|r| format(&r.expression) == text);
        ensure!(
            found.is_some_and(|r| r.match_count == count),
            "widening {text} with count {count} not recommended"
        );
    }
    Ok(format!(
        "{CASES} cases, {with_recs} with recommendations ({total} total, {relaxed} per-tree relaxations oracle-checked); case-study widenings present"
    ))
}

fn round_trips(t: &QueryTarget) -> Result<(), String> {
    let text = format(t);
    let back = parse(&text).map_err(|e| format!("`{text}` does not reparse: {e}"))?;
    ensure!(ast_equal(t, &back), "`{text}` reparses to a different AST");
    ensure!(format(&back) == text, "`{text}` is not a fixpoint");
    Ok(())
}

fn parser_round_trip_and_fuzz() -> Outcome {
    let mut texts: Vec<&str> = CASE_STUDY_EXPRESSIONS
        .iter()
        .chain(&COVERAGE_EXPRESSIONS)
        .map(|f| f.text)
        .collect();
    texts.push(fixtures::branch_example().0);
    for text in &texts {
        round_trips(&parse(text).map_err(|e| format!("{text}: {e}"))?)?;
    }
    let mut r = fixtures::rng(0xf022);
    for _ in 0..200 {
        round_trips(&fixtures::random_target(&mut r, 3))?;
    }

    const FUZZ: usize = 100_000;
    const ALPHABET: &[u8] = b"()[]<>{},./|!^$&#-=<>\"' 0123456789abcxyz_exists forall in";
    let start = Instant::now();
    let mut accepted = 0;
    for i in 0..FUZZ {
        let bytes: Vec<u8> = match i % 3 {
            0 => (0..r.random_range(0..48)).map(|_| r.random()).collect(),
            1 => (0..r.random_range(0..48))
                .map(|_| ALPHABET[r.random_range(0..ALPHABET.len())])
                .collect(),
            _ => {
                let mut b = texts[r.random_range(0..texts.len())].as_bytes().to_vec();
                for _ in 0..r.random_range(1..4) {
                    let at = r.random_range(0..=b.len());
                    match r.random_range(0..3) {
                        0 => b.insert(at, ALPHABET[r.random_range(0..ALPHABET.len())]),
                        1 if at < b.len() => {
                            b.remove(at);
                        }
                        _ if at < b.len() => b[at] = ALPHABET[r.random_range(0..ALPHABET.len())],
                        _ => {}
                    }
                }
                b
            }
        };
        let text = String::from_utf8_lossy(&bytes);
        let parsed = panic::catch_unwind(|| parse(&text)).map_err(|_| format!("parser panicked on {text:?}"))?;
        if let Ok(t) = parsed {
            accepted += 1;
            round_trips(&t).map_err(|e| format!("fuzz input {text:?}: {e}"))?;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "fuzzing took {elapsed:?}");
    Ok(format!(
        "{} fixtures and 200 random ASTs are fixpoints; {FUZZ} fuzz inputs without a crash ({accepted} parsed) in {:.1}s",
        texts.len(),
        elapsed.as_secs_f64()
    ))
}

fn edit_distance() -> Outcome {
    let mut r = fixtures::rng(0x7ed);
    let params = TreeParams {
        max_nodes: 30,
        max_degree: 4,
    };
    let d = |a: &MultiTree, b: &MultiTree| tree_edit_distance(a, b).map_err(|e| e.to_string());
    for i in 0..500 {
        let [a, b, c] = ["a", "b", "c"].map(|n| fixtures::random_tree(&mut r, n, params));
        ensure!(d(&a, &a)? == 0, "triple {i}: d(a,a) != 0");
        let (ab, ba, bc, ac) = (d(&a, &b)?, d(&b, &a)?, d(&b, &c)?, d(&a, &c)?);
        ensure!(ab == ba, "triple {i}: asymmetric {ab} vs {ba}");
        ensure!(ac <= ab + bc, "triple {i}: triangle violated {ac} > {ab} + {bc}");
    }
    let small = fixtures::random_shapes(0x8, 1000, 8);
    for pair in small.chunks(2) {
        let (got, want) = (
            d(&pair[0], &pair[1])?,
            ted_oracle(&pair[0], &pair[1]).map_err(|e| e.to_string())?,
        );
        ensure!(
            got == want,
            "{} vs {}: {got} vs oracle {want}",
            pair[0].tree_id,
            pair[1].tree_id
        );
    }
    let (narrow, wide) = fixtures::edit_distance_example();
    let oracle = ted_oracle(&narrow, &wide).map_err(|e| e.to_string())?;
    let got = d(&narrow, &wide)?;
    ensure!(
        oracle == EXAMPLE_EDIT_DISTANCE && got == oracle,
        "example pair: {got}, oracle {oracle}"
    );
    Ok(format!(
        "laws on 500 triples; 500 pairs of <=8 nodes equal the exhaustive oracle; example pair distance {got}"
    ))
}

fn bits(points: &[ProjectionPoint]) -> Vec<(u64, u64)> {
    points.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect()
}

fn projection() -> Outcome {
    let (trees, labels) = fixtures::clustered_trees(3, 20);
    let groups = group_trees(&trees);
    let label_of = |g: &treequery::similarity::TopologyGroup| {
        labels[trees.iter().position(|t| t.tree_id == g.member_tree_ids[0]).unwrap()]
    };
    let mut ratios = Vec::new();
    for method in [Method::Tsne, Method::Pca] {
        let a = project_with(&groups, &StructuralFeatures, method, 11);
        let b = project_with(&groups, &StructuralFeatures, method, 11);
        ensure!(bits(&a) == bits(&b), "{method:?} is not bit-identical across runs");
        ensure!(
            a.iter().all(|p| p.x.is_finite() && p.y.is_finite() && p.n >= 1),
            "{method:?} bad point"
        );
        let (mut intra, mut inter) = ((0.0, 0u32), (0.0, 0u32));
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                let dist = (a[i].x - a[j].x).hypot(a[i].y - a[j].y);
                let slot = if label_of(&groups[i]) == label_of(&groups[j]) {
                    &mut intra
                } else {
                    &mut inter
                };
                slot.0 += dist;
                slot.1 += 1;
            }
        }
        let ratio = (intra.0 / f64::from(intra.1)) / (inter.0 / f64::from(inter.1));
        ensure!(ratio < 0.8, "{method:?} intra/inter ratio {ratio:.3}");
        ratios.push(ratio);
    }

    let corpus = Corpus::from_trees(fixtures::random_shapes(0x500, 900, 40)).map_err(|e| e.to_string())?;
    let all = project(&corpus, Method::Pca, 0);
    ensure!(
        all.iter().map(|p| p.n).sum::<usize>() == corpus.trees.len(),
        "cardinalities do not sum to the corpus"
    );
    let groups = group_trees(&corpus.trees);
    ensure!(groups.len() >= 500, "only {} distinct topologies", groups.len());
    let start = Instant::now();
    let points = project_with(&groups[..500], &StructuralFeatures, Method::Tsne, 0);
    let elapsed = start.elapsed();
    ensure!(
        points.len() == 500 && elapsed < Duration::from_secs(30),
        "500 groups took {elapsed:?}"
    );
    Ok(format!(
        "bit-identical reruns; cluster ratio t-SNE {:.3}, PCA {:.3}; 500 groups in {:.2}s",
        ratios[0],
        ratios[1],
        elapsed.as_secs_f64()
    ))
}

fn service_equivalence() -> Outcome {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
            .await
            .map_err(|e| e.to_string())?;
        let base = format!("http://{}", listener.local_addr().map_err(|e| e.to_string())?);
        tokio::spawn(treequery_service::serve(listener, treequery_service::Config::default()));
        let client = reqwest::Client::new();
        let corpus = fixtures::citation_corpus();
        let mut checked = 0;

        let send = |req: reqwest::RequestBuilder| async move {
            let resp = req.send().await.map_err(|e| e.to_string())?;
            let status = resp.status();
            let body = resp.bytes().await.map_err(|e| e.to_string())?;
            Ok::<_, String>((status, body.to_vec()))
        };

        let (status, body) = send(client.post(format!("{base}/corpus")).body(corpus.to_json())).await?;
        ensure!(status.is_success(), "upload failed with {status}");
        let id = treequery_service::snapshot_id(&corpus);
        let expected = format!(r#"{{"snapshot_id":"{id}","stats":{}}}"#, api::stats_json(&corpus));
        ensure!(body == expected.as_bytes(), "upload response differs");
        checked += 1;

        let all: Vec<&FixtureExpr> = CASE_STUDY_EXPRESSIONS.iter().chain(&COVERAGE_EXPRESSIONS).collect();
        for f in &all {
            let target = parse(f.text).unwrap();
            let expected = api::query_json(&target, &corpus);
            for req in [
                json!({"snapshot_id": id, "expr": f.text}),
                json!({"snapshot_id": id, "ast": ast_encode(&target)}),
            ] {
                let (status, body) = send(client.post(format!("{base}/query")).body(req.to_string())).await?;
                ensure!(
                    status.is_success() && body == expected.as_bytes(),
                    "/query differs for {}",
                    f.name
                );
                checked += 1;
            }
            let (status, body) = send(
                client
                    .post(format!("{base}/recommend"))
                    .body(json!({"snapshot_id": id, "expr": f.text, "k": 10}).to_string()),
            )
            .await?;
            ensure!(
                status.is_success() && body == api::recommend_json(&target, &corpus, 10).as_bytes(),
                "/recommend differs for {}",
                f.name
            );
            checked += 1;
        }

        for (method, name) in [(Method::Tsne, "tsne"), (Method::Pca, "pca")] {
            for seed in [0u64, 1] {
                let url = format!("{base}/projection?snapshot_id={id}&method={name}&seed={seed}");
                let (status, body) = send(client.get(url)).await?;
                ensure!(
                    status.is_success() && body == api::project_json(&corpus, method, seed).as_bytes(),
                    "/projection differs for {name} seed {seed}"
                );
                checked += 1;
            }
        }
        let (status, body) = send(client.get(format!("{base}/stats?snapshot_id={id}"))).await?;
        ensure!(
            status.is_success() && body == api::stats_json(&corpus).as_bytes(),
            "/stats differs"
        );
        checked += 1;

        let (status, body) = send(
            client
                .post(format!("{base}/query"))
                .body(json!({"snapshot_id": id, "expr": "(("}).to_string()),
        )
        .await?;
        let err: Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
        ensure!(
            status.as_u16() == 400 && err["span"].is_object(),
            "syntax error response {status} {err}"
        );
        checked += 1;

        Ok(format!("{checked} requests byte-identical to in-process calls"))
    })
}
