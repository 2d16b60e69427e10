//! Element-composition counting.
//!
//! Both quantifiers run the clause path as a small NFA whose states are
//! `(step, count)` pairs, with counts of unbounded steps saturated at the
//! step minimum.

use crate::ast::{EcClause, PathStep, Quantifier};
use crate::tree::{MultiTree, NodeIdx};

use super::{eval::eval_node_with, MatchDiagnostic};

type States = Vec<(usize, u32)>;

struct Nfa<'a> {
    steps: &'a [PathStep],
    tree: &'a MultiTree,
}

impl Nfa<'_> {
    fn accept(&self) -> (usize, u32) {
        (self.steps.len(), 0)
    }

    fn close(&self, mut set: States) -> States {
        let mut i = 0;
        while i < set.len() {
            let (s, k) = set[i];
            if s < self.steps.len() && k >= self.steps[s].rep.min && !set.contains(&(s + 1, 0)) {
                set.push((s + 1, 0));
            }
            i += 1;
        }
        set.sort_unstable();
        set
    }

    fn initial(&self) -> States {
        self.close(vec![(0, 0)])
    }

    fn advance(&self, from: &States, node: NodeIdx, diags: &mut Vec<MatchDiagnostic>) -> States {
        let mut verdicts: Vec<Option<bool>> = vec![None; self.steps.len()];
        let mut next = States::new();
        for &(s, k) in from {
            if s == self.steps.len() || !self.steps[s].rep.allows_more(k) {
                continue;
            }
            let ok = *verdicts[s].get_or_insert_with(|| eval_node_with(&self.steps[s].node, self.tree, node, diags));
            if ok {
                let rep = self.steps[s].rep;
                let k = if rep.is_unbounded() {
                    (k + 1).min(rep.min)
                } else {
                    k + 1
                };
                if !next.contains(&(s, k)) {
                    next.push((s, k));
                }
            }
        }
        self.close(next)
    }

    fn accepts(&self, set: &States) -> bool {
        set.binary_search(&self.accept()).is_ok()
    }
}

fn union(a: &States, b: &States) -> States {
    let mut out: States = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Number of distinct downward chains inside `subtree(root)` that match
/// `steps` under some partition.
pub fn count_exists(steps: &[PathStep], root: NodeIdx, tree: &MultiTree, diags: &mut Vec<MatchDiagnostic>) -> u64 {
    let nfa = Nfa { steps, tree };
    let init = nfa.initial();
    let mut total = 0;
    for start in tree.subtree(root) {
        let mut stack = vec![(start, init.clone())];
        while let Some((v, before)) = stack.pop() {
            let after = nfa.advance(&before, v, diags);
            if after.is_empty() {
                continue;
            }
            if nfa.accepts(&after) {
                total += 1;
            }
            for &c in tree.children(v) {
                stack.push((c, after.clone()));
            }
        }
    }
    total
}

/// For each root-to-leaf path of `subtree(root)` (in pre-order of leaves),
/// the maximum number of non-overlapping matching segments.
pub fn forall_counts(
    steps: &[PathStep],
    root: NodeIdx,
    tree: &MultiTree,
    diags: &mut Vec<MatchDiagnostic>,
) -> Vec<u64> {
    let nfa = Nfa { steps, tree };
    let init = nfa.initial();
    let mut out = Vec::new();
    // Greedy by earliest segment end: once a segment closes, every run that
    // started at or before it is dropped.
    let mut stack = vec![(root, States::new(), 0u64)];
    while let Some((v, pending, count)) = stack.pop() {
        let after = nfa.advance(&union(&pending, &init), v, diags);
        let (carry, count) = if nfa.accepts(&after) {
            (States::new(), count + 1)
        } else {
            (after, count)
        };
        let kids = tree.children(v);
        if kids.is_empty() {
            out.push(count);
        }
        for &c in kids.iter().rev() {
            stack.push((c, carry.clone(), count));
        }
    }
    out
}

/// Occurrence count checked against the clause bounds. For `forall`, the
/// reported count is the per-path count furthest outside the bounds (or the
/// first one when all fit).
pub fn clause_count(
    clause: &EcClause,
    root: NodeIdx,
    tree: &MultiTree,
    diags: &mut Vec<MatchDiagnostic>,
) -> (bool, u64) {
    let rep = clause.occurrences;
    let fits = |n: u64| n >= u64::from(rep.min) && rep.max.is_none_or(|m| n <= u64::from(m));
    match clause.quantifier {
        Quantifier::Exists => {
            let n = count_exists(&clause.path.steps, root, tree, diags);
            (fits(n), n)
        }
        Quantifier::Forall => {
            let counts = forall_counts(&clause.path.steps, root, tree, diags);
            let lo = counts.iter().copied().min().unwrap_or(0);
            let hi = counts.iter().copied().max().unwrap_or(0);
            if fits(lo) && fits(hi) {
                (true, lo)
            } else if !fits(lo) {
                (false, lo)
            } else {
                (false, hi)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::tree::{AttributeValue, NodeDoc};

    fn clause(text: &str) -> EcClause {
        parse(&format!(". - {text}")).unwrap().ec.remove(0)
    }

    fn cited(id: &str, c: f64) -> NodeDoc {
        NodeDoc::leaf(id).with_attr("citation", AttributeValue::Number(c))
    }

    #[test]
    fn exists_counts_qualifying_nodes() {
        let kids: Vec<_> = (0..12)
            .map(|i| cited(&format!("p{i}"), if i < 10 { 250.0 } else { 5.0 }))
            .collect();
        let t = MultiTree::from_doc("t", &cited("root", 1.0).with_children(kids)).unwrap();
        let mut d = Vec::new();
        let c = clause("exists <(citation>=200)>{10,}");
        assert_eq!(clause_count(&c, 0, &t, &mut d), (true, 10));
        let c = clause("exists <(citation>=200)>{11,}");
        assert_eq!(clause_count(&c, 0, &t, &mut d), (false, 10));
    }

    #[test]
    fn exists_counts_distinct_chains() {
        // chain a-b-c: `.{1,}` matches every downward chain: 3+2+1
        let doc = NodeDoc::leaf("a").with_children(vec![NodeDoc::leaf("b").with_children(vec![NodeDoc::leaf("c")])]);
        let t = MultiTree::from_doc("t", &doc).unwrap();
        let mut d = Vec::new();
        assert_eq!(count_exists(&clause("exists <.{1,}>").path.steps, 0, &t, &mut d), 6);
        assert_eq!(count_exists(&clause("exists <./.>").path.steps, 0, &t, &mut d), 2);
        assert_eq!(count_exists(&clause("exists <./.>").path.steps, 1, &t, &mut d), 1);
        assert_eq!(count_exists(&clause("exists <.{0,}>").path.steps, 0, &t, &mut d), 6);
    }

    #[test]
    fn exists_zero_lower_bound_always_holds() {
        let t = MultiTree::from_doc("t", &NodeDoc::leaf("a")).unwrap();
        let c = clause("exists <(x=1)>{0,}");
        assert!(clause_count(&c, 0, &t, &mut Vec::new()).0);
    }

    #[test]
    fn forall_counts_disjoint_segments() {
        // a-b-c-d chain plus a second leaf under a
        let doc = NodeDoc::leaf("a").with_children(vec![
            NodeDoc::leaf("b").with_children(vec![NodeDoc::leaf("c").with_children(vec![NodeDoc::leaf("d")])]),
            NodeDoc::leaf("e"),
        ]);
        let t = MultiTree::from_doc("t", &doc).unwrap();
        let mut d = Vec::new();
        assert_eq!(
            forall_counts(&clause("forall <./.>").path.steps, 0, &t, &mut d),
            vec![2, 1]
        );
        assert_eq!(
            forall_counts(&clause("forall <.>").path.steps, 0, &t, &mut d),
            vec![4, 2]
        );
        assert_eq!(
            forall_counts(&clause("forall <$>").path.steps, 0, &t, &mut d),
            vec![1, 1]
        );
        let c = clause("forall <./.>{2,}");
        assert_eq!(clause_count(&c, 0, &t, &mut d), (false, 1));
        let c = clause("forall <.>{,3}");
        assert_eq!(clause_count(&c, 0, &t, &mut d), (false, 4));
    }
}
