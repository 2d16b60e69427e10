//! Query evaluation.
//!
//! Paths are matched by a depth-first search over "stop here" / "take child
//! j" decisions. Bounded repetitions try to stop first (lazy); unbounded ones
//! try to extend first (greedy). The first successful leaf of that search is
//! the binding. Branches are resolved by walking the children in order and
//! committing, per child, to the best-ranked decision that still leaves a
//! feasible completion; feasibility is a bipartite matching check, so the
//! result equals the lexicographically first valid assignment.

mod ec;
mod eval;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::ast::{BranchArm, BranchPattern, Core, EcClause, ElemId, NodeKind, NodePattern, PathStep, QueryTarget};
use crate::tree::{Corpus, MultiTree, NodeIdx};

pub use ec::{clause_count, count_exists, forall_counts};
pub use eval::{compare_values, eval_node, eval_node_with};

/// Element id to matched tree nodes (arena indices), in match order.
pub type Binding = BTreeMap<ElemId, Vec<NodeIdx>>;

/// Default number of search steps allowed per tree.
pub const DEFAULT_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchDiagnostic {
    RefOutOfRange { elem_id: ElemId, node_id: String },
    BudgetExceeded { tree_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub tree_id: String,
    pub match_root: String,
    pub binding: BTreeMap<ElemId, Vec<String>>,
    pub ec_satisfied: bool,
}

impl MatchResult {
    fn new(tree: &MultiTree, root: NodeIdx, binding: &Binding) -> Self {
        MatchResult {
            tree_id: tree.tree_id.clone(),
            match_root: tree.node(root).id.clone(),
            binding: binding
                .iter()
                .map(|(k, v)| (*k, v.iter().map(|&i| tree.node(i).id.clone()).collect()))
                .collect(),
            ec_satisfied: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TreeMatches {
    pub results: Vec<MatchResult>,
    pub diagnostics: Vec<MatchDiagnostic>,
}

/// Per-tree results in corpus order. Serializes as
/// `{"matched": [...], "results": {tree_id: [{"root", "binding"}]}}`;
/// diagnostics are reported separately.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchReport {
    pub trees: Vec<(String, Vec<MatchResult>)>,
    pub diagnostics: Vec<MatchDiagnostic>,
}

impl MatchReport {
    pub fn matched_tree_ids(&self) -> Vec<&str> {
        self.trees
            .iter()
            .filter(|(_, r)| !r.is_empty())
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn matched_count(&self) -> usize {
        self.trees.iter().filter(|(_, r)| !r.is_empty()).count()
    }

    pub fn results_for(&self, tree_id: &str) -> &[MatchResult] {
        self.trees
            .iter()
            .find(|(id, _)| id == tree_id)
            .map_or(&[], |(_, r)| r.as_slice())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

impl Serialize for MatchReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        struct Results<'a>(&'a [(String, Vec<MatchResult>)]);
        struct Entry<'a>(&'a MatchResult);
        impl Serialize for Results<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut map = s.serialize_map(None)?;
                for (id, results) in self.0.iter().filter(|(_, r)| !r.is_empty()) {
                    let entries: Vec<Entry> = results.iter().map(Entry).collect();
                    map.serialize_entry(id, &entries)?;
                }
                map.end()
            }
        }
        impl Serialize for Entry<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut st = s.serialize_struct("Result", 2)?;
                st.serialize_field("root", &self.0.match_root)?;
                st.serialize_field("binding", &self.0.binding)?;
                st.end()
            }
        }
        let mut st = s.serialize_struct("MatchReport", 2)?;
        st.serialize_field("matched", &self.matched_tree_ids())?;
        st.serialize_field("results", &Results(&self.trees))?;
        st.end()
    }
}

/// Where a non-matching tree got closest to matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Failure {
    pub elem: ElemId,
    pub site: FailureSite,
    /// Count actually achieved (repetition sites) or 0.
    pub observed: u32,
    /// Missing count (or excess, for upper-bound violations).
    pub shortfall: u32,
    /// Position of `elem` in AST pre-order.
    pub ordinal: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureSite {
    /// Core node pattern rejected the start node.
    Node,
    /// A core path step could not reach its minimum.
    Step,
    /// A branch arm could not get enough children.
    Arm,
    /// A composition clause count fell outside its bounds.
    Ec,
}

impl Failure {
    fn outranks(&self, other: &Failure) -> bool {
        (self.ordinal, std::cmp::Reverse(self.shortfall)) > (other.ordinal, std::cmp::Reverse(other.shortfall))
    }
}

/// Reusable matcher for one query.
#[derive(Debug, Clone)]
pub struct Matcher<'q> {
    target: &'q QueryTarget,
    budget: u64,
    ordinals: HashMap<ElemId, usize>,
}

impl<'q> Matcher<'q> {
    pub fn new(target: &'q QueryTarget) -> Self {
        let ordinals = target
            .elem_ids()
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect();
        Matcher {
            target,
            budget: DEFAULT_BUDGET,
            ordinals,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn match_tree(&self, tree: &MultiTree) -> TreeMatches {
        let mut search = Search::new(self, tree, false);
        let mut results = Vec::new();
        for start in self.starts(tree) {
            if let Some(binding) = search.match_at(start) {
                results.push(MatchResult::new(tree, start, &binding));
            }
            if search.exhausted {
                break;
            }
        }
        TreeMatches {
            results,
            diagnostics: search.finish(),
        }
    }

    pub fn match_corpus(&self, corpus: &Corpus) -> MatchReport {
        let mut report = MatchReport::default();
        for tree in &corpus.trees {
            let m = self.match_tree(tree);
            report.diagnostics.extend(m.diagnostics);
            report.trees.push((tree.tree_id.clone(), m.results));
        }
        report
    }

    /// Whether any start node matches (stops at the first).
    pub fn matches(&self, tree: &MultiTree) -> bool {
        let mut search = Search::new(self, tree, false);
        self.starts(tree).any(|s| search.match_at(s).is_some())
    }

    /// `None` when the tree matches; otherwise the deepest failing element
    /// over all start nodes, ties going to the smaller shortfall and then to
    /// the earliest start.
    pub fn diagnose(&self, tree: &MultiTree) -> Option<Failure> {
        let mut search = Search::new(self, tree, true);
        for start in self.starts(tree) {
            if search.match_at(start).is_some() {
                return None;
            }
        }
        search.best
    }

    fn starts(&self, tree: &MultiTree) -> std::ops::Range<NodeIdx> {
        if tree.is_empty() {
            0..0
        } else if anchored(self.target) {
            0..1
        } else {
            0..tree.len()
        }
    }
}

/// Whether the core pattern can only start at the tree root.
fn anchored(target: &QueryTarget) -> bool {
    let first = match &target.core {
        Core::Node(n) | Core::Subtree { node: n, .. } => n,
        Core::Path(p) if p.steps[0].rep.min > 0 => &p.steps[0].node,
        Core::Path(_) => return false,
    };
    first.is_plain(&NodeKind::Root)
}

pub fn match_tree(target: &QueryTarget, tree: &MultiTree) -> Vec<MatchResult> {
    Matcher::new(target).match_tree(tree).results
}

pub fn match_corpus(target: &QueryTarget, corpus: &Corpus) -> MatchReport {
    Matcher::new(target).match_corpus(corpus)
}

/// First path binding starting at `start` (at least one node is consumed).
pub fn match_path(path: &crate::ast::PathPattern, start: NodeIdx, tree: &MultiTree) -> Option<Binding> {
    let dummy = QueryTarget {
        core: Core::Path(path.clone()),
        ec: Vec::new(),
    };
    let matcher = Matcher::new(&dummy);
    let mut search = Search::new(&matcher, tree, false);
    let Core::Path(path) = &dummy.core else { unreachable!() };
    search.path_binding(&path.steps, start, Tail::Free, false)
}

/// Branch binding at `node`: arm ids map to the assigned children.
pub fn match_branch(branch: &BranchPattern, node: NodeIdx, tree: &MultiTree) -> Option<Binding> {
    let dummy = QueryTarget {
        core: Core::Subtree {
            node: NodePattern::wildcard(ElemId(0)),
            branch: branch.clone(),
        },
        ec: Vec::new(),
    };
    let matcher = Matcher::new(&dummy);
    let mut search = Search::new(&matcher, tree, false);
    let Core::Subtree { branch, .. } = &dummy.core else {
        unreachable!()
    };
    search.branch(branch, node)
}

pub fn eval_ec(clauses: &[EcClause], match_root: NodeIdx, tree: &MultiTree) -> bool {
    let mut diags = Vec::new();
    clauses.iter().all(|c| clause_count(c, match_root, tree, &mut diags).0)
}

#[derive(Clone, Copy)]
enum Tail<'q> {
    Free,
    Branch(&'q BranchPattern),
}

struct PathCtx<'q> {
    steps: &'q [PathStep],
    start: NodeIdx,
    tail: Tail<'q>,
    track: bool,
    chain: Vec<NodeIdx>,
    counts: Vec<u32>,
    failed: HashSet<(usize, u32, Option<NodeIdx>)>,
    tail_binding: Binding,
}

struct Search<'m, 'q, 't> {
    matcher: &'m Matcher<'q>,
    tree: &'t MultiTree,
    ticks: u64,
    exhausted: bool,
    diags: Vec<MatchDiagnostic>,
    branch_memo: HashMap<(usize, NodeIdx), Option<Binding>>,
    arm_memo: HashMap<(usize, NodeIdx), Option<Binding>>,
    tracking: bool,
    best: Option<Failure>,
}

impl<'m, 'q, 't> Search<'m, 'q, 't> {
    fn new(matcher: &'m Matcher<'q>, tree: &'t MultiTree, tracking: bool) -> Self {
        Search {
            matcher,
            tree,
            ticks: 0,
            exhausted: false,
            diags: Vec::new(),
            branch_memo: HashMap::new(),
            arm_memo: HashMap::new(),
            tracking,
            best: None,
        }
    }

    fn finish(mut self) -> Vec<MatchDiagnostic> {
        let mut seen = HashSet::new();
        self.diags.retain(|d| seen.insert(d.clone()));
        self.diags
    }

    fn tick(&mut self) -> bool {
        if self.exhausted {
            return false;
        }
        self.ticks += 1;
        if self.ticks > self.matcher.budget {
            self.exhausted = true;
            self.diags.push(MatchDiagnostic::BudgetExceeded {
                tree_id: self.tree.tree_id.clone(),
            });
            return false;
        }
        true
    }

    fn note(&mut self, elem: ElemId, site: FailureSite, observed: u32, shortfall: u32) {
        if !self.tracking {
            return;
        }
        let f = Failure {
            elem,
            site,
            observed,
            shortfall,
            ordinal: self.matcher.ordinals.get(&elem).copied().unwrap_or(usize::MAX),
        };
        if self.best.is_none_or(|b| f.outranks(&b)) {
            self.best = Some(f);
        }
    }

    fn eval(&mut self, pattern: &NodePattern, node: NodeIdx) -> bool {
        eval_node_with(pattern, self.tree, node, &mut self.diags)
    }

    /// Core match then composition filter at one start node.
    fn match_at(&mut self, start: NodeIdx) -> Option<Binding> {
        let target = self.matcher.target;
        let binding = match &target.core {
            Core::Node(n) => {
                if !self.eval(n, start) {
                    self.note(n.id, FailureSite::Node, 0, 1);
                    return None;
                }
                Binding::from([(n.id, vec![start])])
            }
            Core::Path(p) => self.path_binding(&p.steps, start, Tail::Free, true)?,
            Core::Subtree { node, branch } => {
                if !self.eval(node, start) {
                    self.note(node.id, FailureSite::Node, 0, 1);
                    return None;
                }
                let mut binding = self.branch(branch, start)?;
                binding.insert(node.id, vec![start]);
                binding
            }
        };
        for clause in &target.ec {
            let (ok, n) = clause_count(clause, start, self.tree, &mut self.diags);
            if !ok {
                let n = n.min(u64::from(u32::MAX)) as u32;
                let short = if n < clause.occurrences.min {
                    clause.occurrences.min - n
                } else {
                    n - clause.occurrences.max.unwrap_or(n)
                };
                self.note(clause.id, FailureSite::Ec, n, short);
                return None;
            }
        }
        Some(binding)
    }

    fn path_binding(&mut self, steps: &'q [PathStep], start: NodeIdx, tail: Tail<'q>, track: bool) -> Option<Binding> {
        let mut cx = PathCtx {
            steps,
            start,
            tail,
            track: track && self.tracking,
            chain: Vec::new(),
            counts: vec![0; steps.len()],
            failed: HashSet::new(),
            tail_binding: Binding::new(),
        };
        if !self.dfs(&mut cx, 0, 0, None) {
            return None;
        }
        let mut binding = std::mem::take(&mut cx.tail_binding);
        let mut at = 0;
        for (step, &k) in steps.iter().zip(&cx.counts) {
            let seg = &cx.chain[at..at + k as usize];
            binding.entry(step.node.id).or_default().extend_from_slice(seg);
            at += k as usize;
        }
        Some(binding)
    }

    fn dfs(&mut self, cx: &mut PathCtx<'q>, i: usize, k: u32, last: Option<NodeIdx>) -> bool {
        if !self.tick() {
            return false;
        }
        if i == cx.steps.len() {
            let Some(v) = last else {
                if cx.track {
                    self.note(cx.steps[0].node.id, FailureSite::Step, 0, 1);
                }
                return false;
            };
            return match cx.tail {
                Tail::Free => true,
                Tail::Branch(b) => match self.branch(b, v) {
                    Some(bind) => {
                        cx.tail_binding = bind;
                        true
                    }
                    None => false,
                },
            };
        }
        let step = &cx.steps[i];
        let rep = step.rep;
        let key = (i, if rep.is_unbounded() { k.min(rep.min) } else { k }, last);
        if cx.failed.contains(&key) {
            return false;
        }
        let can_stop = k >= rep.min;
        let greedy = rep.is_unbounded();
        if !greedy && can_stop && self.stop(cx, i, k, last) {
            return true;
        }
        if rep.allows_more(k) {
            let tree = self.tree;
            let start = [cx.start];
            let cands: &[NodeIdx] = match last {
                None => &start,
                Some(v) => tree.children(v),
            };
            let mut any = false;
            for &c in cands {
                if !self.eval(&step.node, c) {
                    continue;
                }
                any = true;
                cx.chain.push(c);
                if self.dfs(cx, i, k + 1, Some(c)) {
                    return true;
                }
                cx.chain.pop();
            }
            if !any && !can_stop && cx.track {
                self.note(step.node.id, FailureSite::Step, k, rep.min - k);
            }
        }
        if greedy && can_stop && self.stop(cx, i, k, last) {
            return true;
        }
        if !self.exhausted {
            cx.failed.insert(key);
        }
        false
    }

    fn stop(&mut self, cx: &mut PathCtx<'q>, i: usize, k: u32, last: Option<NodeIdx>) -> bool {
        cx.counts[i] = k;
        self.dfs(cx, i + 1, 0, last)
    }

    fn arm_instance(&mut self, arm: &'q BranchArm, child: NodeIdx) -> Option<Binding> {
        let key = (arm as *const BranchArm as usize, child);
        if let Some(hit) = self.arm_memo.get(&key) {
            return hit.clone();
        }
        let tail = arm.branch.as_ref().map_or(Tail::Free, Tail::Branch);
        let hit = self.path_binding(&arm.path.steps, child, tail, false);
        if !self.exhausted {
            self.arm_memo.insert(key, hit.clone());
        }
        hit
    }

    fn branch(&mut self, branch: &'q BranchPattern, node: NodeIdx) -> Option<Binding> {
        let key = (branch as *const BranchPattern as usize, node);
        if let Some(hit) = self.branch_memo.get(&key) {
            return hit.clone();
        }
        let hit = self.branch_uncached(branch, node);
        if !self.exhausted {
            self.branch_memo.insert(key, hit.clone());
        }
        hit
    }

    fn branch_uncached(&mut self, branch: &'q BranchPattern, node: NodeIdx) -> Option<Binding> {
        let tree = self.tree;
        let kids = tree.children(node);
        let arms = &branch.arms;
        let mins: Vec<u32> = arms.iter().map(|a| a.rep.min).collect();
        let min_total: u64 = mins.iter().map(|&m| u64::from(m)).sum();
        if min_total > kids.len() as u64 && !self.tracking {
            return None;
        }
        let mut inst: Vec<Vec<Option<Binding>>> = Vec::with_capacity(arms.len());
        for arm in arms {
            let mut row = Vec::with_capacity(kids.len());
            for &c in kids {
                row.push(self.arm_instance(arm, c));
            }
            inst.push(row);
        }
        if self.exhausted {
            return None;
        }
        let avail: Vec<Vec<bool>> = inst.iter().map(|r| r.iter().map(Option::is_some).collect()).collect();
        let mut counts = vec![0u32; arms.len()];
        if let Err(flow) = feasible(&avail, 0, &mins, &counts) {
            if let Some(a) = (0..arms.len()).find(|&a| flow[a] < mins[a]) {
                self.note(arms[a].id, FailureSite::Arm, flow[a], mins[a] - flow[a]);
            }
            return None;
        }
        let m = arms.len();
        let mut assign: Vec<Option<usize>> = vec![None; kids.len()];
        for j in 0..kids.len() {
            if !self.tick() {
                return None;
            }
            // Candidates in rank order: arms still below min (or unbounded),
            // then leaving the child out, then bounded arms at or past min.
            let mut order: Vec<Option<usize>> = Vec::with_capacity(2 * m + 1);
            order.extend(
                (0..m)
                    .filter(|&a| counts[a] < mins[a] || arms[a].rep.is_unbounded())
                    .map(Some),
            );
            order.push(None);
            order.extend(
                (0..m)
                    .filter(|&a| counts[a] >= mins[a] && !arms[a].rep.is_unbounded())
                    .map(Some),
            );
            let mut chosen = false;
            for d in order {
                match d {
                    Some(a) => {
                        if !avail[a][j] || !arms[a].rep.allows_more(counts[a]) {
                            continue;
                        }
                        counts[a] += 1;
                        if feasible(&avail, j + 1, &mins, &counts).is_ok() {
                            assign[j] = Some(a);
                            chosen = true;
                            break;
                        }
                        counts[a] -= 1;
                    }
                    None => {
                        if feasible(&avail, j + 1, &mins, &counts).is_ok() {
                            chosen = true;
                            break;
                        }
                    }
                }
            }
            debug_assert!(chosen, "feasibility was checked before");
        }
        let mut binding = Binding::new();
        for arm in arms {
            binding.insert(arm.id, Vec::new());
        }
        for (j, a) in assign.iter().enumerate() {
            if let Some(a) = *a {
                binding.get_mut(&arms[a].id).unwrap().push(kids[j]);
                let sub = inst[a][j].as_ref().expect("assigned arm has an instance");
                for (id, nodes) in sub {
                    binding.entry(*id).or_default().extend_from_slice(nodes);
                }
            }
        }
        Some(binding)
    }
}

/// Whether children `from..` can cover every arm's remaining minimum.
/// On failure returns the per-arm flow of a maximum assignment.
fn feasible(avail: &[Vec<bool>], from: usize, mins: &[u32], counts: &[u32]) -> Result<(), Vec<u32>> {
    let m = avail.len();
    let d = avail.first().map_or(0, Vec::len);
    let deficit: Vec<u32> = (0..m).map(|a| mins[a].saturating_sub(counts[a])).collect();
    let need: u64 = deficit.iter().map(|&x| u64::from(x)).sum();
    if need == 0 {
        return Ok(());
    }
    let mut owner: Vec<Option<usize>> = vec![None; d];
    let mut flow = vec![0u32; m];

    fn augment(a: usize, avail: &[Vec<bool>], from: usize, owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for j in from..owner.len() {
            if avail[a][j] && !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|b| augment(b, avail, from, owner, seen)) {
                    owner[j] = Some(a);
                    return true;
                }
            }
        }
        false
    }

    let mut total = 0u64;
    for a in 0..m {
        for _ in 0..deficit[a] {
            let mut seen = vec![false; d];
            if augment(a, avail, from, &mut owner, &mut seen) {
                flow[a] += 1;
                total += 1;
            } else {
                break;
            }
        }
    }
    if total == need {
        Ok(())
    } else {
        Err(flow.iter().zip(counts).map(|(f, c)| f + c).collect())
    }
}
