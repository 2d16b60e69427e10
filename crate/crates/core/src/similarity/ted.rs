//! Unit-cost ordered tree edit distance on unlabeled trees.

use thiserror::Error;

use crate::tree::{MultiTree, NodeIdx};

pub const DEFAULT_TED_BOUND: usize = 200;

/// Trees larger than this are refused by the mapping oracle.
pub const ORACLE_BOUND: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TedError {
    #[error("tree of {size} nodes exceeds the edit-distance bound of {bound}")]
    SizeBoundExceeded { size: usize, bound: usize },
}

pub fn tree_edit_distance(a: &MultiTree, b: &MultiTree) -> Result<usize, TedError> {
    tree_edit_distance_bounded(a, b, DEFAULT_TED_BOUND)
}

/// Insert and delete cost 1; every node carries the same label, so
/// relabelling is free.
pub fn tree_edit_distance_bounded(a: &MultiTree, b: &MultiTree, bound: usize) -> Result<usize, TedError> {
    for t in [a, b] {
        if t.len() > bound {
            return Err(TedError::SizeBoundExceeded { size: t.len(), bound });
        }
    }
    let pa = PostOrder::new(a);
    let pb = PostOrder::new(b);
    let (n, m) = (pa.lmld.len(), pb.lmld.len());
    let mut td = vec![vec![0usize; m]; n];
    for &i in &pa.keyroots {
        for &j in &pb.keyroots {
            let (li, lj) = (pa.lmld[i], pb.lmld[j]);
            let rows = i - li + 2;
            let cols = j - lj + 2;
            let mut fd = vec![vec![0usize; cols]; rows];
            for (x, row) in fd.iter_mut().enumerate() {
                row[0] = x;
            }
            for (y, cell) in fd[0].iter_mut().enumerate() {
                *cell = y;
            }
            for x in 1..rows {
                let i1 = li + x - 1;
                for y in 1..cols {
                    let j1 = lj + y - 1;
                    let edit = (fd[x - 1][y] + 1).min(fd[x][y - 1] + 1);
                    if pa.lmld[i1] == li && pb.lmld[j1] == lj {
                        fd[x][y] = edit.min(fd[x - 1][y - 1]);
                        td[i1][j1] = fd[x][y];
                    } else {
                        let (px, py) = (pa.lmld[i1] - li, pb.lmld[j1] - lj);
                        fd[x][y] = edit.min(fd[px][py] + td[i1][j1]);
                    }
                }
            }
        }
    }
    Ok(td[n - 1][m - 1])
}

struct PostOrder {
    /// Leftmost leaf descendant, by post-order index.
    lmld: Vec<usize>,
    keyroots: Vec<usize>,
}

impl PostOrder {
    fn new(tree: &MultiTree) -> Self {
        let mut order = Vec::with_capacity(tree.len());
        let mut stack: Vec<(NodeIdx, bool)> = vec![(tree.root(), false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                order.push(v);
            } else {
                stack.push((v, true));
                for &c in tree.children(v).iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        let mut post = vec![0; tree.len()];
        for (k, &v) in order.iter().enumerate() {
            post[v] = k;
        }
        let lmld: Vec<usize> = order
            .iter()
            .map(|&v| {
                let mut u = v;
                while let Some(&c) = tree.children(u).first() {
                    u = c;
                }
                post[u]
            })
            .collect();
        // the highest node for each distinct leftmost leaf
        let mut keyroots: Vec<usize> = (0..lmld.len())
            .filter(|&k| !(k + 1..lmld.len()).any(|h| lmld[h] == lmld[k]))
            .collect();
        keyroots.sort_unstable();
        PostOrder { lmld, keyroots }
    }
}

/// Exhaustive reference: the largest ordered, ancestry-preserving one-to-one
/// node mapping `M` gives the cheapest edit script, `|a| + |b| - 2|M|`.
/// Searches every mapping, so only small trees are accepted.
pub fn ted_oracle(a: &MultiTree, b: &MultiTree) -> Result<usize, TedError> {
    for t in [a, b] {
        if t.len() > ORACLE_BOUND {
            return Err(TedError::SizeBoundExceeded {
                size: t.len(),
                bound: ORACLE_BOUND,
            });
        }
    }
    let anc_a = ancestry(a);
    let anc_b = ancestry(b);
    let mut best = 0;
    let mut pairs = Vec::new();
    extend(0, &anc_a, &anc_b, &mut pairs, &mut best);
    Ok(a.len() + b.len() - 2 * best)
}

fn ancestry(t: &MultiTree) -> Vec<Vec<bool>> {
    let n = t.len();
    let mut anc = vec![vec![false; n]; n];
    for (v, row) in anc.iter_mut().enumerate() {
        for d in t.subtree(v).skip(1) {
            row[d] = true;
        }
    }
    anc
}

/// Pre-order of a pair decides left-of once ancestry is known, so a mapping
/// is valid iff its images increase in pre-order and ancestry agrees
/// pairwise.
fn extend(a: usize, anc_a: &[Vec<bool>], anc_b: &[Vec<bool>], pairs: &mut Vec<(usize, usize)>, best: &mut usize) {
    *best = (*best).max(pairs.len());
    if a == anc_a.len() {
        return;
    }
    let first_b = pairs.last().map_or(0, |&(_, b)| b + 1);
    for b in first_b..anc_b.len() {
        if pairs.iter().all(|&(x, y)| anc_a[x][a] == anc_b[y][b]) {
            pairs.push((a, b));
            extend(a + 1, anc_a, anc_b, pairs, best);
            pairs.pop();
        }
    }
    extend(a + 1, anc_a, anc_b, pairs, best);
}
