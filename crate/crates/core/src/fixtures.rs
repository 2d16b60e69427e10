//! Deterministic generators for test corpora and query sets.
//!
//! Everything here is seeded with ChaCha so that fixture files, expected
//! counts, and projections are reproducible across platforms.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::ast::*;
use crate::parser::parse;
use crate::tree::{AttributeKind, AttributeValue, Corpus, CorpusDoc, MultiTree, NodeDoc, TreeDoc};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// shapes

/// Parent indices of a random tree with `n` nodes (entry 0 is the root).
/// Each node attaches either to the previous node (growing chains) or to a
/// uniformly chosen earlier node with spare capacity.
pub fn random_shape(rng: &mut impl Rng, n: usize, max_degree: usize) -> Vec<Option<usize>> {
    let mut parent = vec![None];
    let mut degree = vec![0usize];
    for v in 1..n {
        let open: Vec<usize> = (0..v).filter(|&u| degree[u] < max_degree).collect();
        let p = if rng.random_bool(0.3) && degree[v - 1] < max_degree {
            v - 1
        } else {
            *open.choose(rng).expect("max_degree >= 1 leaves a free slot")
        };
        parent.push(Some(p));
        degree.push(0);
        degree[p] += 1;
    }
    parent
}

/// Builds nested documents from a parent array; node `k` gets `make(k)`.
pub fn doc_from_parents(parents: &[Option<usize>], mut make: impl FnMut(usize) -> NodeDoc) -> NodeDoc {
    let mut docs: Vec<Option<NodeDoc>> = (0..parents.len()).map(|k| Some(make(k))).collect();
    // children are created after their parents, so fold from the back
    let mut kids: Vec<Vec<NodeDoc>> = vec![Vec::new(); parents.len()];
    for k in (1..parents.len()).rev() {
        let mut doc = docs[k].take().unwrap();
        doc.children = std::mem::take(&mut kids[k]);
        doc.children.reverse();
        kids[parents[k].unwrap()].push(doc);
    }
    let mut root = docs[0].take().unwrap();
    root.children = std::mem::take(&mut kids[0]);
    root.children.reverse();
    root
}

/// Attribute-free tree from a parent array.
pub fn bare_tree(tree_id: &str, parents: &[Option<usize>]) -> MultiTree {
    let doc = doc_from_parents(parents, |k| NodeDoc::leaf(format!("{tree_id}-n{k}")));
    MultiTree::from_doc(tree_id, &doc).expect("generated ids are unique")
}

// ---------------------------------------------------------------------------
// random attributed trees

/// Attributes emitted by [`random_tree_doc`]: `a` numeric (0..=3),
/// `b` categorical text over x/y/z, `tags` a set over p/q/r.
pub const RANDOM_ATTRIBUTES: [(&str, AttributeKind); 3] = [
    ("a", AttributeKind::Numeric),
    ("b", AttributeKind::Categorical),
    ("tags", AttributeKind::Categorical),
];

const B_VALUES: [&str; 3] = ["x", "y", "z"];
const TAG_VALUES: [&str; 3] = ["p", "q", "r"];

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_nodes: usize,
    pub max_degree: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_nodes: 40,
            max_degree: 4,
        }
    }
}

/// Node ids are `{tree_id}-n{k}` with `k` in creation order.
pub fn random_tree_doc(rng: &mut impl Rng, tree_id: &str, params: TreeParams) -> NodeDoc {
    let n = rng.random_range(1..=params.max_nodes);
    let parents = random_shape(rng, n, params.max_degree);
    doc_from_parents(&parents, |k| {
        let mut doc = NodeDoc::leaf(format!("{tree_id}-n{k}"));
        if rng.random_bool(0.85) {
            doc = doc.with_attr("a", AttributeValue::Number(rng.random_range(0..=3) as f64));
        }
        if rng.random_bool(0.85) {
            doc = doc.with_attr("b", AttributeValue::Text(B_VALUES.choose(rng).unwrap().to_string()));
        }
        if rng.random_bool(0.7) {
            let tags: BTreeSet<String> = TAG_VALUES
                .iter()
                .filter(|_| rng.random_bool(0.4))
                .map(|s| s.to_string())
                .collect();
            doc = doc.with_attr("tags", AttributeValue::List(tags));
        }
        doc
    })
}

pub fn random_tree(rng: &mut impl Rng, tree_id: &str, params: TreeParams) -> MultiTree {
    MultiTree::from_doc(tree_id, &random_tree_doc(rng, tree_id, params)).expect("generated ids are unique")
}

/// Ground truth recorded while emitting a random corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub trees: usize,
    pub nodes: usize,
    pub attributes: BTreeSet<String>,
}

pub fn random_corpus_doc(seed: u64, trees: usize, params: TreeParams) -> (CorpusDoc, Tally) {
    let mut r = rng(seed);
    let mut tally = Tally {
        trees,
        nodes: 0,
        attributes: BTreeSet::new(),
    };
    let mut docs = Vec::with_capacity(trees);
    for t in 0..trees {
        let tree_id = format!("t{t}");
        let root = random_tree_doc(&mut r, &tree_id, params);
        let mut stack = vec![&root];
        while let Some(d) = stack.pop() {
            tally.nodes += 1;
            tally.attributes.extend(d.attributes.keys().cloned());
            stack.extend(&d.children);
        }
        docs.push(TreeDoc { tree_id, root });
    }
    (CorpusDoc { trees: docs }, tally)
}

pub fn random_corpus(seed: u64, trees: usize, params: TreeParams) -> Corpus {
    Corpus::from_doc(&random_corpus_doc(seed, trees, params).0).expect("generated corpus is valid")
}

// ---------------------------------------------------------------------------
// random queries

/// Random valid target over the [`RANDOM_ATTRIBUTES`] schema with
/// `target.depth() <= max_depth`. Element ids are assigned in pre-order.
pub fn random_target(rng: &mut impl Rng, max_depth: usize) -> QueryTarget {
    let mut g = Gen { rng };
    let core = match g.rng.random_range(0..10) {
        0..=3 if max_depth >= 2 => Core::Subtree {
            node: g.node(false, true),
            branch: g.branch(max_depth - 1),
        },
        0..=5 => Core::Node(g.node(true, true)),
        _ => Core::Path(g.path(true, 3)),
    };
    let clauses = if g.rng.random_bool(0.3) {
        g.rng.random_range(1..=2)
    } else {
        0
    };
    let ec = (0..clauses)
        .map(|_| EcClause {
            id: ElemId(0),
            quantifier: if g.rng.random_bool(0.5) {
                Quantifier::Exists
            } else {
                Quantifier::Forall
            },
            path: g.path(true, 2),
            occurrences: *[
                Repetition::at_least(1),
                Repetition::at_least(2),
                Repetition::new(0, Some(2)),
                Repetition::new(1, Some(3)),
                Repetition::exactly(1),
                Repetition::at_least(0),
            ]
            .choose(g.rng)
            .unwrap(),
            span: None,
        })
        .collect();
    let mut target = QueryTarget { core, ec };
    target.renumber();
    target
}

struct Gen<'r, R> {
    rng: &'r mut R,
}

const STEP_REPS: [Repetition; 8] = [
    Repetition::ONCE,
    Repetition::ONCE,
    Repetition { min: 0, max: Some(1) },
    Repetition { min: 1, max: Some(2) },
    Repetition { min: 0, max: None },
    Repetition { min: 1, max: None },
    Repetition { min: 2, max: None },
    Repetition { min: 2, max: Some(2) },
];

const ARM_REPS: [Repetition; 7] = [
    Repetition::ONCE,
    Repetition { min: 0, max: Some(1) },
    Repetition { min: 1, max: Some(2) },
    Repetition { min: 0, max: None },
    Repetition { min: 1, max: None },
    Repetition { min: 2, max: None },
    Repetition { min: 2, max: Some(3) },
];

impl<R: Rng> Gen<'_, R> {
    fn predicate(&mut self) -> Predicate {
        let lit = |v: AttributeValue| Operand::Literal(v);
        let ops = [
            CompareOp::Gt,
            CompareOp::Ge,
            CompareOp::Lt,
            CompareOp::Le,
            CompareOp::Eq,
        ];
        let (attribute, op, rhs) = match self.rng.random_range(0..9) {
            0 | 1 => (
                "a",
                *ops.choose(self.rng).unwrap(),
                lit(AttributeValue::Number(self.rng.random_range(0..=3) as f64)),
            ),
            2 => ("a", *ops.choose(self.rng).unwrap(), Operand::Relative(-1)),
            3 => ("degree", CompareOp::Eq, Operand::Absolute(1)),
            4 => (
                "b",
                CompareOp::Eq,
                lit(AttributeValue::Text(B_VALUES.choose(self.rng).unwrap().to_string())),
            ),
            5 => (
                "b",
                CompareOp::In,
                lit(AttributeValue::List(["x".to_string(), "y".to_string()].into())),
            ),
            6 => (
                "tags",
                CompareOp::Eq,
                lit(AttributeValue::Text(TAG_VALUES.choose(self.rng).unwrap().to_string())),
            ),
            7 => (
                "tags",
                CompareOp::In,
                lit(AttributeValue::List(["p".to_string(), "q".to_string()].into())),
            ),
            _ => (
                *["degree", "depth", "height", "size"].choose(self.rng).unwrap(),
                *ops.choose(self.rng).unwrap(),
                lit(AttributeValue::Number(self.rng.random_range(0..=3) as f64)),
            ),
        };
        Predicate {
            attribute: attribute.to_string(),
            op,
            rhs,
        }
    }

    fn atom(&mut self, leaf_ok: bool) -> NodePattern {
        let kind = match self.rng.random_range(0..20) {
            0..=6 => NodeKind::Wildcard,
            7 | 8 if leaf_ok => NodeKind::Leaf,
            _ => NodeKind::Custom((0..self.rng.random_range(1..=2)).map(|_| self.predicate()).collect()),
        };
        let negated = matches!(kind, NodeKind::Custom(_)) && self.rng.random_bool(0.15);
        NodePattern {
            negated,
            ..NodePattern::new(ElemId(0), kind)
        }
    }

    fn node(&mut self, root_ok: bool, leaf_ok: bool) -> NodePattern {
        if root_ok && self.rng.random_bool(0.08) {
            return NodePattern::new(ElemId(0), NodeKind::Root);
        }
        let mut n = self.atom(leaf_ok);
        if self.rng.random_bool(0.12) {
            n.alternative = Some(Box::new(self.atom(leaf_ok)));
        }
        n
    }

    fn path(&mut self, root_ok: bool, max_steps: usize) -> PathPattern {
        let len = self.rng.random_range(1..=max_steps);
        let steps = (0..len)
            .map(|i| {
                let node = self.node(root_ok && i == 0, i + 1 == len);
                let rep = if node.is_plain(&NodeKind::Root) {
                    Repetition::ONCE
                } else {
                    *STEP_REPS.choose(self.rng).unwrap()
                };
                PathStep { node, rep }
            })
            .collect();
        PathPattern { steps }
    }

    /// `levels` counts this branch: 1 means no nested branches below it.
    fn branch(&mut self, levels: usize) -> BranchPattern {
        let arms = (0..self.rng.random_range(1..=3))
            .map(|_| {
                let nested = levels > 1 && self.rng.random_bool(0.3);
                let mut path = self.path(false, 2);
                if nested {
                    // a nested branch hangs off the last step, which must not be `$`
                    let last = path.steps.last_mut().unwrap();
                    if last.node.alternatives().any(|a| a.kind == NodeKind::Leaf) {
                        last.node = NodePattern::wildcard(ElemId(0));
                    }
                }
                BranchArm {
                    id: ElemId(0),
                    path,
                    rep: *ARM_REPS.choose(self.rng).unwrap(),
                    branch: nested.then(|| self.branch(levels - 1)),
                    span: None,
                }
            })
            .collect();
        BranchPattern { arms }
    }
}

// ---------------------------------------------------------------------------
// citation fixture

pub const CITATION_SEED: u64 = 20_240_917;
pub const SHNEIDERMAN: &str = "Ben Shneiderman";

const AUTHORS: [&str; 10] = [
    "Ada Lindqvist",
    "Bruno Okafor",
    "Chiara Vos",
    "Dmitri Haas",
    "Elif Moreau",
    "Farah Ibsen",
    "Goran Tanaka",
    "Hana Quist",
    "Ivo Brandt",
    "Juno Pereira",
];
const KEYWORDS: [&str; 8] = [
    "graph",
    "deep learning",
    "tree",
    "immersive",
    "text",
    "evaluation",
    "network",
    "color",
];
const VENUES: [&str; 4] = ["VIS", "TVCG", "EuroVis", "PacificVis"];

struct Paper {
    authors: Vec<String>,
    year: u32,
    citation: u32,
    keywords: Vec<String>,
    venue: String,
}

impl Paper {
    fn random(rng: &mut impl Rng, year: u32) -> Paper {
        let n_authors = rng.random_range(1..=3);
        let n_keywords = rng.random_range(1..=3);
        let mut authors: Vec<String> = AUTHORS.choose_multiple(rng, n_authors).map(|s| s.to_string()).collect();
        if rng.random_bool(0.03) {
            authors[0] = SHNEIDERMAN.to_string();
        }
        let citation = LogNormal::<f64>::new(2.8, 1.4).unwrap().sample(rng).floor().min(5000.0) as u32;
        Paper {
            authors,
            year,
            citation,
            keywords: KEYWORDS
                .choose_multiple(rng, n_keywords)
                .map(|s| s.to_string())
                .collect(),
            venue: VENUES.choose(rng).unwrap().to_string(),
        }
    }

    fn doc(&self, id: String) -> NodeDoc {
        NodeDoc::leaf(id.clone())
            .with_attr("title", AttributeValue::Text(format!("Paper {id}")))
            .with_attr("authors", AttributeValue::List(self.authors.iter().cloned().collect()))
            .with_attr("year", AttributeValue::Number(self.year.into()))
            .with_attr("citation", AttributeValue::Number(self.citation.into()))
            .with_attr(
                "keywords",
                AttributeValue::List(self.keywords.iter().cloned().collect()),
            )
            .with_attr("venue", AttributeValue::Text(self.venue.clone()))
    }
}

fn random_citation_tree(rng: &mut impl Rng, tree_id: &str) -> NodeDoc {
    let n = (LogNormal::<f64>::new(1.6, 0.9).unwrap().sample(rng).round() as usize).clamp(1, 40);
    let parents = random_shape(rng, n, 6);
    let mut years = vec![rng.random_range(2014..=2020)];
    for p in parents.iter().skip(1) {
        let py: u32 = years[p.unwrap()];
        years.push((py + rng.random_range(0..=2)).min(2023));
    }
    let papers: Vec<Paper> = years.iter().map(|&y| Paper::random(rng, y)).collect();
    doc_from_parents(&parents, |k| papers[k].doc(format!("{tree_id}-p{k}")))
}

/// Planted trees: each is (tree id, root paper tweaks, children).
fn planted(rng: &mut impl Rng) -> Vec<TreeDoc> {
    let mut out = Vec::new();
    let paper = Paper::random;

    // one Shneiderman node with exactly three highly cited citers
    {
        let id = "shneiderman-hub";
        let mut root = paper(rng, 2015);
        root.authors = vec![SHNEIDERMAN.to_string(), "Karin Adeyemi".to_string()];
        let mut kids = Vec::new();
        for (k, c) in [420, 260, 211, 35, 12].into_iter().enumerate() {
            let mut p = paper(rng, 2016 + k as u32 % 3);
            p.citation = c;
            p.authors.retain(|a| a != SHNEIDERMAN);
            if p.authors.is_empty() {
                p.authors.push("Hana Quist".into());
            }
            kids.push(p.doc(format!("{id}-c{k}")));
        }
        out.push(TreeDoc {
            tree_id: id.into(),
            root: root.doc(format!("{id}-root")).with_children(kids),
        });
    }
    // a chain of four Shneiderman papers
    {
        let id = "shneiderman-chain";
        let mut doc: Option<NodeDoc> = None;
        for k in (0..4).rev() {
            let mut p = paper(rng, 2014 + k as u32);
            p.authors = vec![SHNEIDERMAN.to_string()];
            let mut d = p.doc(format!("{id}-p{k}"));
            if let Some(child) = doc.take() {
                d = d.with_children(vec![child]);
            }
            doc = Some(d);
        }
        out.push(TreeDoc {
            tree_id: id.into(),
            root: doc.unwrap(),
        });
    }
    // graph papers cited by k deep-learning papers
    for (i, k) in [1usize, 1, 1, 2, 2, 3, 5, 6].into_iter().enumerate() {
        let id = format!("graph-dl-{i}");
        let mut root = paper(rng, 2016);
        root.keywords = vec!["graph".into(), "network".into()];
        root.citation = 40 + 10 * i as u32;
        let mut kids = Vec::new();
        for j in 0..k + 2 {
            let mut p = paper(rng, 2018 + (j as u32 % 3));
            p.keywords.retain(|w| w != "deep learning");
            if j < k {
                p.keywords.push("deep learning".into());
            }
            kids.push(p.doc(format!("{id}-c{j}")));
        }
        out.push(TreeDoc {
            tree_id: id.clone(),
            root: root.doc(format!("{id}-root")).with_children(kids),
        });
    }
    // 2019 papers with many highly cited descendants
    for (i, highly) in [10usize, 12, 9].into_iter().enumerate() {
        let id = format!("influential-2019-{i}");
        let mut root = paper(rng, 2019);
        root.citation = 900;
        let mut kids = Vec::new();
        for j in 0..highly + 3 {
            let mut p = paper(rng, 2019 + (j as u32 % 3));
            p.citation = if j < highly { 200 + 17 * j as u32 } else { 20 };
            kids.push(p.doc(format!("{id}-c{j}")));
        }
        out.push(TreeDoc {
            tree_id: id.clone(),
            root: root.doc(format!("{id}-root")).with_children(kids),
        });
    }
    out
}

/// Synthetic citation trees: 110 random trees plus planted examples, all at
/// most 40 nodes. A child node is a paper citing its parent.
pub fn citation_corpus_doc() -> CorpusDoc {
    let mut r = rng(CITATION_SEED);
    let mut trees: Vec<TreeDoc> = (0..110)
        .map(|t| {
            let id = format!("paper-{t:03}");
            TreeDoc {
                root: random_citation_tree(&mut r, &id),
                tree_id: id,
            }
        })
        .collect();
    let mut extra = planted(&mut r);
    // interleave planted trees so they are not all at the end
    for (k, t) in extra.drain(..).enumerate() {
        trees.insert(7 + k * 9, t);
    }
    CorpusDoc { trees }
}

pub fn citation_corpus() -> Corpus {
    Corpus::from_doc(&citation_corpus_doc()).expect("fixture corpus is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureExpr {
    pub name: &'static str,
    /// Target category (node/path/subtree/tree) and constraint kind
    /// (feature/position).
    pub category: &'static str,
    pub text: &'static str,
    /// Trees matched on the citation fixture, confirmed by the oracle.
    pub trees: usize,
    /// Total match results on the citation fixture.
    pub results: usize,
}

/// Worked examples from the grammar description and the case study.
pub const CASE_STUDY_EXPRESSIONS: [FixtureExpr; 7] = [
    FixtureExpr {
        name: "shneiderman-path",
        category: "path/feature",
        text: r#"(authors="Ben Shneiderman"){3,}"#,
        trees: 1,
        results: 2,
    },
    FixtureExpr {
        name: "shneiderman-branch",
        category: "subtree/feature",
        text: r#"(authors="Ben Shneiderman")[<(citation>=200)>{3,}]"#,
        trees: 1,
        results: 1,
    },
    FixtureExpr {
        name: "influential-2019",
        category: "tree/feature",
        text: "(year=2019)[<(.){0,}>{0,}] - exists <(citation>=200)>{10,}",
        trees: 3,
        results: 3,
    },
    FixtureExpr {
        name: "graph-topic",
        category: "node/feature",
        text: r#"(keywords="graph")"#,
        trees: 98,
        results: 229,
    },
    FixtureExpr {
        name: "dl-citers",
        category: "subtree/feature",
        text: r#"(keywords="graph")[<(keywords="deep learning")>{5,}]"#,
        trees: 3,
        results: 3,
    },
    FixtureExpr {
        name: "active-graph",
        category: "subtree/feature",
        text: r#"(keywords="graph")[<(keywords="deep learning")>{1,}] - exists <(year>=2019)>{5,}"#,
        trees: 15,
        results: 16,
    },
    FixtureExpr {
        name: "impact-graph",
        category: "subtree/feature",
        text: r#"(keywords="graph",citation>10)[<(keywords="deep learning")>{1,},<(citation>=200)>{1,}]"#,
        trees: 4,
        results: 4,
    },
];

/// Recommendations for the `dl-citers` seed on the citation fixture that
/// widen the citer arm, with their corpus counts.
pub const DL_CITER_WIDENINGS: [(&str, usize); 2] = [
    (r#"(keywords="graph")[<(keywords="deep learning")>{1,}]"#, 45),
    (r#"(keywords="graph")[<(keywords="deep learning")>{2,}]"#, 9),
];

/// One or more expressions per target category and constraint kind.
pub const COVERAGE_EXPRESSIONS: [FixtureExpr; 16] = [
    FixtureExpr {
        name: "node-attribute",
        category: "node/feature",
        text: r#"(citation>=200,venue in ["EuroVis","VIS"])"#,
        trees: 18,
        results: 31,
    },
    FixtureExpr {
        name: "node-negation",
        category: "node/feature",
        text: r#"!(keywords in ["graph","tree","network"])"#,
        trees: 103,
        results: 344,
    },
    FixtureExpr {
        name: "node-level",
        category: "node/position",
        text: "(depth=3,degree>=2)",
        trees: 26,
        results: 36,
    },
    FixtureExpr {
        name: "node-degree-as-parent",
        category: "node/position",
        text: "(degree=&-1,degree>0)",
        trees: 64,
        results: 154,
    },
    FixtureExpr {
        name: "path-topic-chain",
        category: "path/feature",
        text: r#"(keywords="graph")/(keywords="deep learning"){1,}"#,
        trees: 45,
        results: 57,
    },
    FixtureExpr {
        name: "path-falling-citations",
        category: "path/feature",
        text: "(citation>=50)/(citation<=&-1){2,}",
        trees: 29,
        results: 44,
    },
    FixtureExpr {
        name: "path-root-to-leaf",
        category: "path/position",
        text: "^/.{2}/$",
        trees: 42,
        results: 42,
    },
    FixtureExpr {
        name: "path-deep-descent",
        category: "path/position",
        text: "^/.{3,}",
        trees: 58,
        results: 58,
    },
    FixtureExpr {
        name: "subtree-venue-citers",
        category: "subtree/feature",
        text: r#"(venue="VIS")[<(venue="VIS")>{2,},<!(venue="VIS")>{1,}]"#,
        trees: 2,
        results: 2,
    },
    FixtureExpr {
        name: "subtree-alternation",
        category: "subtree/feature",
        text: r#"(year<=2015)[<(keywords="text")|(keywords="color")>{1,}]"#,
        trees: 14,
        results: 23,
    },
    FixtureExpr {
        name: "subtree-fanout",
        category: "subtree/position",
        text: "(depth=2)[<$>{2,}]",
        trees: 10,
        results: 10,
    },
    FixtureExpr {
        name: "subtree-nested",
        category: "subtree/position",
        text: "(degree=#1)[<.[<.>{2,}]>{1,}]",
        trees: 44,
        results: 58,
    },
    FixtureExpr {
        name: "tree-active-topic",
        category: "tree/feature",
        text: r#"^ - exists <(keywords="deep learning")>{3,}"#,
        trees: 33,
        results: 33,
    },
    FixtureExpr {
        name: "tree-recent-everywhere",
        category: "tree/feature",
        text: "^ - forall <(year>=2017)>{1,}",
        trees: 100,
        results: 100,
    },
    FixtureExpr {
        name: "tree-shallow",
        category: "tree/position",
        text: "^[<.>{4,}] - forall <.>{2}",
        trees: 9,
        results: 9,
    },
    FixtureExpr {
        name: "tree-two-levels-down",
        category: "tree/position",
        text: "^ - exists <./.>{5,}",
        trees: 57,
        results: 57,
    },
];

// ---------------------------------------------------------------------------
// worked example fixtures

/// The branch example: node A with two B-C paths, one with four C nodes and
/// one with two, against an expression demanding two paths whose C run
/// exceeds three. Returns (expression text, tree).
pub fn branch_example() -> (&'static str, MultiTree) {
    let named = |id: &str, name: &str| NodeDoc::leaf(id).with_attr("name", AttributeValue::Text(name.into()));
    let c_chain = |prefix: &str, n: usize| {
        let mut doc: Option<NodeDoc> = None;
        for k in (0..n).rev() {
            let mut d = named(&format!("{prefix}{k}"), "C");
            if let Some(child) = doc.take() {
                d = d.with_children(vec![child]);
            }
            doc = Some(d);
        }
        doc.unwrap()
    };
    let tree = named("A", "A").with_children(vec![
        named("B1", "B").with_children(vec![c_chain("C1-", 4)]),
        named("B2", "B").with_children(vec![c_chain("C2-", 2)]),
    ]);
    (
        r#"(name="A")[<(name="B")/(name="C"){4,}>{2,}]"#,
        MultiTree::from_doc("example-branch", &tree).unwrap(),
    )
}

/// The insert/delete example: a root over one node over four leaves versus a
/// root directly over four leaves.
pub fn edit_distance_example() -> (MultiTree, MultiTree) {
    let narrow = bare_tree("narrow", &[None, Some(0), Some(1), Some(1), Some(1), Some(1)]);
    let wide = bare_tree("wide", &[None, Some(0), Some(0), Some(0), Some(0)]);
    (narrow, wide)
}

// ---------------------------------------------------------------------------
// structural fixtures for the overview

/// Three template topologies (deep chain-like, star, balanced binary), each
/// perturbed by adding or removing a few leaves. Returns trees and their
/// template labels.
pub fn clustered_trees(seed: u64, per_cluster: usize) -> (Vec<MultiTree>, Vec<usize>) {
    let mut r = rng(seed);
    let chain: Vec<Option<usize>> = (0..10usize).map(|k| k.checked_sub(1)).collect();
    let star: Vec<Option<usize>> = std::iter::once(None).chain((0..12).map(|_| Some(0))).collect();
    let binary: Vec<Option<usize>> = (0..15).map(|k: usize| k.checked_sub(1).map(|p| p / 2)).collect();
    let templates = [chain, star, binary];
    let mut trees = Vec::new();
    let mut labels = Vec::new();
    for (label, template) in templates.iter().enumerate() {
        for i in 0..per_cluster {
            let mut parents = template.clone();
            for _ in 0..r.random_range(1..=3) {
                if r.random_bool(0.5) && parents.len() > 3 {
                    // drop a leaf (a node nobody points at)
                    let leaves: Vec<usize> = (1..parents.len()).filter(|&v| !parents.contains(&Some(v))).collect();
                    let v = *leaves.choose(&mut r).unwrap();
                    parents.remove(v);
                    for p in parents.iter_mut().flatten() {
                        if *p > v {
                            *p -= 1;
                        }
                    }
                } else {
                    let p = r.random_range(0..parents.len());
                    parents.push(Some(p));
                }
            }
            trees.push(bare_tree(&format!("c{label}-{i}"), &parents));
            labels.push(label);
        }
    }
    (trees, labels)
}

/// Random unattributed trees of 2..=max_nodes nodes, shuffled ids.
pub fn random_shapes(seed: u64, count: usize, max_nodes: usize) -> Vec<MultiTree> {
    let mut r = rng(seed);
    let mut out: Vec<MultiTree> = (0..count)
        .map(|i| {
            let n = r.random_range(2..=max_nodes);
            let max_degree = r.random_range(1..=5);
            bare_tree(&format!("s{i}"), &random_shape(&mut r, n, max_degree))
        })
        .collect();
    out.shuffle(&mut r);
    out
}

/// Fixture expressions as parsed targets (panics on a broken fixture).
pub fn parsed(exprs: &[FixtureExpr]) -> Vec<(FixtureExpr, QueryTarget)> {
    exprs
        .iter()
        .map(|e| (*e, parse(e.text).unwrap_or_else(|err| panic!("{}: {err}", e.name))))
        .collect()
}
