//! Exhaustive reference matcher.
//!
//! Enumerates every downward chain and every partition of it into steps,
//! every child-to-arm assignment, and every composition instance, then picks
//! the candidate with the lexicographically smallest decision-rank sequence.
//! Shares nothing with [`crate::matcher`] beyond node evaluation.

use std::collections::HashMap;

use thiserror::Error;

use crate::ast::{BranchArm, BranchPattern, Core, EcClause, PathStep, Quantifier, QueryTarget, Repetition};
use crate::matcher::{eval_node, Binding, MatchResult};
use crate::tree::{MultiTree, NodeIdx};

pub const ORACLE_MAX_NODES: usize = 40;

/// Upper bound on complete child assignments enumerated at one node.
pub const ORACLE_MAX_ASSIGNMENTS: u64 = 1 << 22;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("tree has {size} nodes; the oracle handles at most {bound}")]
    SizeBoundExceeded { size: usize, bound: usize },
    #[error("branch at node {node_id} has too many child assignments to enumerate")]
    TooManyAssignments { node_id: String },
}

pub fn oracle_match(target: &QueryTarget, tree: &MultiTree) -> Result<Vec<MatchResult>, OracleError> {
    if tree.len() > ORACLE_MAX_NODES {
        return Err(OracleError::SizeBoundExceeded {
            size: tree.len(),
            bound: ORACLE_MAX_NODES,
        });
    }
    let mut o = Oracle {
        tree,
        arms: HashMap::new(),
        branches: HashMap::new(),
    };
    let mut out = Vec::new();
    for start in 0..tree.len() {
        let core = match &target.core {
            Core::Node(n) => eval_node(n, tree, start).then(|| Binding::from([(n.id, vec![start])])),
            Core::Path(p) => o.best_path(&p.steps, start, None)?.map(|c| c.binding),
            Core::Subtree { node, branch } => {
                if eval_node(node, tree, start) {
                    o.branch(branch, start)?.map(|mut b| {
                        b.insert(node.id, vec![start]);
                        b
                    })
                } else {
                    None
                }
            }
        };
        let Some(binding) = core else { continue };
        if target.ec.iter().all(|c| ec_holds(c, start, tree)) {
            out.push(to_result(tree, start, &binding));
        }
    }
    Ok(out)
}

fn to_result(tree: &MultiTree, root: NodeIdx, binding: &Binding) -> MatchResult {
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

struct Candidate {
    ranks: Vec<u64>,
    binding: Binding,
}

struct Oracle<'t> {
    tree: &'t MultiTree,
    arms: HashMap<(*const BranchArm, NodeIdx), Option<Binding>>,
    branches: HashMap<(*const BranchPattern, NodeIdx), Option<Binding>>,
}

/// All downward chains starting at `start`, shortest first along each branch.
fn chains_from(tree: &MultiTree, start: NodeIdx) -> Vec<Vec<NodeIdx>> {
    let mut out = Vec::new();
    let mut stack = vec![vec![start]];
    while let Some(chain) = stack.pop() {
        let last = *chain.last().unwrap();
        for &c in tree.children(last) {
            let mut next = chain.clone();
            next.push(c);
            stack.push(next);
        }
        out.push(chain);
    }
    out
}

/// Every way to split `len` nodes over the steps within their bounds.
fn partitions(steps: &[PathStep], len: usize) -> Vec<Vec<u32>> {
    fn go(steps: &[PathStep], left: usize, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let Some((first, rest)) = steps.split_first() else {
            if left == 0 {
                out.push(acc.clone());
            }
            return;
        };
        for k in 0..=left {
            if first.rep.contains(k as u32) {
                acc.push(k as u32);
                go(rest, left - k, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(steps, len, &mut Vec::new(), &mut out);
    out
}

fn conforms(steps: &[PathStep], chain: &[NodeIdx], counts: &[u32], tree: &MultiTree) -> bool {
    let mut at = 0;
    for (step, &k) in steps.iter().zip(counts) {
        for &v in &chain[at..at + k as usize] {
            if !eval_node(&step.node, tree, v) {
                return false;
            }
        }
        at += k as usize;
    }
    true
}

fn path_ranks(steps: &[PathStep], chain: &[NodeIdx], counts: &[u32], tree: &MultiTree) -> Vec<u64> {
    let mut ranks = Vec::new();
    let mut at = 0;
    let mut last: Option<NodeIdx> = None;
    for (step, &k) in steps.iter().zip(counts) {
        let greedy = step.rep.max.is_none();
        for _ in 0..k {
            let v = chain[at];
            let j = match last {
                None => 0,
                Some(p) => tree.children(p).iter().position(|&c| c == v).unwrap() as u64,
            };
            ranks.push(if greedy { j } else { j + 1 });
            last = Some(v);
            at += 1;
        }
        ranks.push(if greedy { u64::MAX } else { 0 });
    }
    ranks
}

impl Oracle<'_> {
    fn best_path(
        &mut self,
        steps: &[PathStep],
        start: NodeIdx,
        tail: Option<&BranchPattern>,
    ) -> Result<Option<Candidate>, OracleError> {
        let tree = self.tree;
        let mut best: Option<Candidate> = None;
        for chain in chains_from(tree, start) {
            for counts in partitions(steps, chain.len()) {
                if !conforms(steps, &chain, &counts, tree) {
                    continue;
                }
                let tail_binding = match tail {
                    None => Binding::new(),
                    Some(b) => match self.branch(b, *chain.last().unwrap())? {
                        Some(tb) => tb,
                        None => continue,
                    },
                };
                let ranks = path_ranks(steps, &chain, &counts, tree);
                if best.as_ref().is_some_and(|b| b.ranks <= ranks) {
                    continue;
                }
                let mut binding = tail_binding;
                let mut at = 0;
                for (step, &k) in steps.iter().zip(&counts) {
                    binding
                        .entry(step.node.id)
                        .or_default()
                        .extend_from_slice(&chain[at..at + k as usize]);
                    at += k as usize;
                }
                best = Some(Candidate { ranks, binding });
            }
        }
        Ok(best)
    }

    fn arm(&mut self, arm: &BranchArm, child: NodeIdx) -> Result<Option<Binding>, OracleError> {
        let key = (arm as *const BranchArm, child);
        if let Some(hit) = self.arms.get(&key) {
            return Ok(hit.clone());
        }
        let hit = self
            .best_path(&arm.path.steps, child, arm.branch.as_ref())?
            .map(|c| c.binding);
        self.arms.insert(key, hit.clone());
        Ok(hit)
    }

    fn branch(&mut self, branch: &BranchPattern, node: NodeIdx) -> Result<Option<Binding>, OracleError> {
        let key = (branch as *const BranchPattern, node);
        if let Some(hit) = self.branches.get(&key) {
            return Ok(hit.clone());
        }
        let hit = self.branch_uncached(branch, node)?;
        self.branches.insert(key, hit.clone());
        Ok(hit)
    }

    fn branch_uncached(&mut self, branch: &BranchPattern, node: NodeIdx) -> Result<Option<Binding>, OracleError> {
        let kids = self.tree.children(node).to_vec();
        let arms = &branch.arms;
        // options[j]: None plus every arm with an instance at child j
        let mut inst: Vec<Vec<Option<Binding>>> = Vec::new();
        for arm in arms {
            let mut row = Vec::new();
            for &c in &kids {
                row.push(self.arm(arm, c)?);
            }
            inst.push(row);
        }
        let options: Vec<Vec<Option<usize>>> = (0..kids.len())
            .map(|j| {
                std::iter::once(None)
                    .chain((0..arms.len()).filter(|&a| inst[a][j].is_some()).map(Some))
                    .collect()
            })
            .collect();
        let total: u64 = options
            .iter()
            .try_fold(1u64, |acc, o| acc.checked_mul(o.len() as u64))
            .unwrap_or(u64::MAX);
        if total > ORACLE_MAX_ASSIGNMENTS {
            return Err(OracleError::TooManyAssignments {
                node_id: self.tree.node(node).id.clone(),
            });
        }
        let reps: Vec<Repetition> = arms.iter().map(|a| a.rep).collect();
        let mut best: Option<(Vec<u64>, Vec<Option<usize>>)> = None;
        let mut pick = vec![0usize; kids.len()];
        loop {
            let assignment: Vec<Option<usize>> = pick.iter().enumerate().map(|(j, &p)| options[j][p]).collect();
            let mut counts = vec![0u32; arms.len()];
            for a in assignment.iter().flatten() {
                counts[*a] += 1;
            }
            if counts.iter().zip(&reps).all(|(&c, r)| r.contains(c)) {
                let ranks = assignment_ranks(&assignment, &reps);
                if best.as_ref().is_none_or(|(b, _)| ranks < *b) {
                    best = Some((ranks, assignment));
                }
            }
            // odometer increment
            let mut j = 0;
            loop {
                if j == pick.len() {
                    return Ok(best.map(|(_, assignment)| {
                        let mut binding: Binding = arms.iter().map(|a| (a.id, Vec::new())).collect();
                        for (j, a) in assignment.iter().enumerate() {
                            if let Some(a) = *a {
                                binding.get_mut(&arms[a].id).unwrap().push(kids[j]);
                                for (id, nodes) in inst[a][j].as_ref().unwrap() {
                                    binding.entry(*id).or_default().extend_from_slice(nodes);
                                }
                            }
                        }
                        binding
                    }));
                }
                pick[j] += 1;
                if pick[j] < options[j].len() {
                    break;
                }
                pick[j] = 0;
                j += 1;
            }
        }
    }
}

/// Rank of each per-child decision given the counts so far: arms below their
/// minimum or without a maximum come first (in arm order), then leaving the
/// child unassigned, then the remaining arms.
fn assignment_ranks(assignment: &[Option<usize>], reps: &[Repetition]) -> Vec<u64> {
    let m = reps.len() as u64;
    let mut counts = vec![0u32; reps.len()];
    let mut ranks = Vec::with_capacity(assignment.len());
    for d in assignment {
        ranks.push(match *d {
            None => m,
            Some(a) => {
                let eager = counts[a] < reps[a].min || reps[a].max.is_none();
                counts[a] += 1;
                if eager {
                    a as u64
                } else {
                    m + 1 + a as u64
                }
            }
        });
    }
    ranks
}

/// Whether the chain matches the steps under some partition.
fn chain_matches(steps: &[PathStep], chain: &[NodeIdx], tree: &MultiTree) -> bool {
    partitions(steps, chain.len())
        .iter()
        .any(|counts| conforms(steps, chain, counts, tree))
}

fn ec_holds(clause: &EcClause, root: NodeIdx, tree: &MultiTree) -> bool {
    let steps = &clause.path.steps;
    match clause.quantifier {
        Quantifier::Exists => {
            let n = tree
                .subtree(root)
                .flat_map(|start| chains_from(tree, start))
                .filter(|chain| chain_matches(steps, chain, tree))
                .count();
            clause.occurrences.contains(n as u32)
        }
        Quantifier::Forall => root_to_leaf_paths(tree, root)
            .iter()
            .all(|path| clause.occurrences.contains(max_disjoint(steps, path, tree))),
    }
}

fn root_to_leaf_paths(tree: &MultiTree, root: NodeIdx) -> Vec<Vec<NodeIdx>> {
    chains_from(tree, root)
        .into_iter()
        .filter(|c| tree.children(*c.last().unwrap()).is_empty())
        .collect()
}

/// Maximum number of pairwise disjoint matching segments, by dynamic
/// programming over segment start positions.
fn max_disjoint(steps: &[PathStep], path: &[NodeIdx], tree: &MultiTree) -> u32 {
    let len = path.len();
    let mut best = vec![0u32; len + 1];
    for a in (0..len).rev() {
        let mut b_best = best[a + 1];
        for b in a..len {
            if chain_matches(steps, &path[a..=b], tree) {
                b_best = b_best.max(1 + best[b + 1]);
            }
        }
        best[a] = b_best;
    }
    best[0]
}
