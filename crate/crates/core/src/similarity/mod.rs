//! Structural overview: topology grouping, edit distance, feature vectors
//! and 2D projection of topology groups.

mod project;
mod ted;

pub use project::{project, project_with, projection_json, Method, ProjectionPoint, TSNE_ITERATIONS};
pub use ted::{ted_oracle, tree_edit_distance, tree_edit_distance_bounded, TedError, DEFAULT_TED_BOUND};

use std::collections::HashMap;

use crate::tree::{Corpus, MultiTree};

/// Canonical encoding of an unordered rooted tree.
pub type TopologyKey = String;

/// AHU encoding: each node is `(` + its children's encodings, sorted, + `)`.
pub fn topology_key(tree: &MultiTree) -> TopologyKey {
    let mut codes: Vec<Option<String>> = vec![None; tree.len()];
    for v in (0..tree.len()).rev() {
        let mut kids: Vec<String> = tree
            .children(v)
            .iter()
            .map(|&c| codes[c].take().expect("children encoded first"))
            .collect();
        kids.sort_unstable();
        let mut code = String::with_capacity(2 + kids.iter().map(String::len).sum::<usize>());
        code.push('(');
        kids.iter().for_each(|k| code.push_str(k));
        code.push(')');
        codes[v] = Some(code);
    }
    codes[0].take().unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyGroup {
    pub key: TopologyKey,
    pub member_tree_ids: Vec<String>,
    /// First member in corpus order.
    pub representative: MultiTree,
}

/// Groups trees by topology key, in order of first appearance.
pub fn group(corpus: &Corpus) -> Vec<TopologyGroup> {
    group_trees(&corpus.trees)
}

pub fn group_trees(trees: &[MultiTree]) -> Vec<TopologyGroup> {
    let mut slot: HashMap<TopologyKey, usize> = HashMap::new();
    let mut groups: Vec<TopologyGroup> = Vec::new();
    for tree in trees {
        let key = topology_key(tree);
        match slot.get(&key) {
            Some(&i) => groups[i].member_tree_ids.push(tree.tree_id.clone()),
            None => {
                slot.insert(key.clone(), groups.len());
                groups.push(TopologyGroup {
                    key,
                    member_tree_ids: vec![tree.tree_id.clone()],
                    representative: tree.clone(),
                });
            }
        }
    }
    groups
}

pub const LEVELS: usize = 8;
pub const DEGREE_BUCKETS: usize = 9;
pub const FEATURE_LEN: usize = 5 + LEVELS + DEGREE_BUCKETS;

/// `[size, height, width, leaves, mean branching, levels 1..=8, degree
/// histogram 0..=7 and 8+]`
pub type FeatureVector = [f64; FEATURE_LEN];

pub fn features(tree: &MultiTree) -> FeatureVector {
    let mut out = [0.0; FEATURE_LEN];
    let root = tree.node(tree.root()).inherent;
    out[0] = f64::from(root.size);
    out[1] = f64::from(root.height);
    out[2] = f64::from(root.width);
    let mut leaves = 0usize;
    let mut internal_degree = 0usize;
    for n in tree.nodes() {
        let d = n.inherent.degree as usize;
        if d == 0 {
            leaves += 1;
        }
        internal_degree += d;
        let level = n.inherent.depth as usize;
        if level <= LEVELS {
            out[5 + level - 1] += 1.0;
        }
        out[5 + LEVELS + d.min(DEGREE_BUCKETS - 1)] += 1.0;
    }
    out[3] = leaves as f64;
    let internal = tree.len() - leaves;
    out[4] = if internal == 0 {
        0.0
    } else {
        internal_degree as f64 / internal as f64
    };
    out
}

/// Maps a tree to a fixed-length embedding for projection.
pub trait Embedding {
    fn embed(&self, tree: &MultiTree) -> Vec<f64>;
}

/// The structural feature vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct StructuralFeatures;

impl Embedding for StructuralFeatures {
    fn embed(&self, tree: &MultiTree) -> Vec<f64> {
        features(tree).to_vec()
    }
}
