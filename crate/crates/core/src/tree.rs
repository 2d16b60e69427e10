//! Corpus data model.
//!
//! Trees are stored as pre-order arenas: index 0 is the root, every child has
//! a larger index than its parent, and a subtree occupies a contiguous range
//! `[v, v + size)`. Most algorithms in the crate rely on that layout.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node inside its [`MultiTree`] arena.
pub type NodeIdx = usize;

/// Names of the computed attributes. They may not appear in ingested data.
pub const INHERENT_ATTRIBUTES: [&str; 5] = ["depth", "size", "height", "width", "degree"];

/// Maximum JSON nesting accepted by [`load_corpus`]. Each tree level costs two
/// nesting levels (node object plus `children` array).
pub const MAX_DOCUMENT_NESTING: usize = 1024;

pub fn is_inherent(name: &str) -> bool {
    INHERENT_ATTRIBUTES.contains(&name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Number(f64),
    Text(String),
    List(BTreeSet<String>),
}

impl AttributeValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            AttributeValue::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn kind(&self) -> AttributeKind {
        match self {
            AttributeValue::Number(_) => AttributeKind::Numeric,
            AttributeValue::Text(_) | AttributeValue::List(_) => AttributeKind::Categorical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InherentAttrs {
    pub depth: u32,
    pub size: u32,
    pub height: u32,
    pub width: u32,
    pub degree: u32,
}

impl InherentAttrs {
    pub fn get(&self, name: &str) -> Option<u32> {
        Some(match name {
            "depth" => self.depth,
            "size" => self.size,
            "height" => self.height,
            "width" => self.width,
            "degree" => self.degree,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: String,
    pub attributes: BTreeMap<String, AttributeValue>,
    pub children: Vec<NodeIdx>,
    pub parent: Option<NodeIdx>,
    pub inherent: InherentAttrs,
}

impl TreeNode {
    /// Reads an ingested attribute or an inherent one (as a number).
    pub fn attribute(&self, name: &str) -> Option<AttributeValue> {
        match self.inherent.get(name) {
            Some(v) => Some(AttributeValue::Number(f64::from(v))),
            None => self.attributes.get(name).cloned(),
        }
    }

    pub fn numeric(&self, name: &str) -> Option<f64> {
        match self.inherent.get(name) {
            Some(v) => Some(f64::from(v)),
            None => self.attributes.get(name).and_then(AttributeValue::as_number),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Serialized node shape shared by the corpus file format and the fixture
/// generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttributeValue>,
    #[serde(default)]
    pub children: Vec<NodeDoc>,
}

impl NodeDoc {
    pub fn leaf(id: impl Into<String>) -> Self {
        NodeDoc {
            id: id.into(),
            attributes: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn with_children(mut self, children: Vec<NodeDoc>) -> Self {
        self.children = children;
        self
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: AttributeValue) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDoc {
    pub tree_id: String,
    pub root: NodeDoc,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusDoc {
    pub trees: Vec<TreeDoc>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("malformed corpus document: {0}")]
    MalformedDocument(String),
    #[error("duplicate node id {node_id:?} (tree {tree_id:?})")]
    DuplicateNodeId { tree_id: String, node_id: String },
    #[error("duplicate tree id {0:?}")]
    DuplicateTreeId(String),
    #[error("attribute {0:?} is used both as numeric and categorical")]
    MixedAttributeKind(String),
    #[error("attribute name {name:?} is reserved (node {node_id:?})")]
    ReservedAttribute { name: String, node_id: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTree {
    pub tree_id: String,
    nodes: Vec<TreeNode>,
    node_index: HashMap<String, NodeIdx>,
}

impl MultiTree {
    /// Builds a tree from its document form. Inherent attributes are computed.
    pub fn from_doc(tree_id: impl Into<String>, root: &NodeDoc) -> Result<Self, CorpusError> {
        let tree_id = tree_id.into();
        let mut nodes: Vec<TreeNode> = Vec::new();
        let mut node_index = HashMap::new();
        // explicit stack keeps deep chains off the call stack
        let mut stack: Vec<(&NodeDoc, Option<NodeIdx>)> = vec![(root, None)];
        while let Some((doc, parent)) = stack.pop() {
            let idx = nodes.len();
            if node_index.insert(doc.id.clone(), idx).is_some() {
                return Err(CorpusError::DuplicateNodeId {
                    tree_id,
                    node_id: doc.id.clone(),
                });
            }
            if let Some(name) = doc.attributes.keys().find(|n| is_inherent(n)) {
                return Err(CorpusError::ReservedAttribute {
                    name: name.clone(),
                    node_id: doc.id.clone(),
                });
            }
            if let Some(p) = parent {
                nodes[p].children.push(idx);
            }
            nodes.push(TreeNode {
                id: doc.id.clone(),
                attributes: doc.attributes.clone(),
                children: Vec::with_capacity(doc.children.len()),
                parent,
                inherent: InherentAttrs::default(),
            });
            for child in doc.children.iter().rev() {
                stack.push((child, Some(idx)));
            }
        }
        let mut tree = MultiTree {
            tree_id,
            nodes,
            node_index,
        };
        tree.compute_inherent();
        Ok(tree)
    }

    pub fn root(&self) -> NodeIdx {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, idx: NodeIdx) -> &TreeNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn children(&self, idx: NodeIdx) -> &[NodeIdx] {
        &self.nodes[idx].children
    }

    pub fn parent(&self, idx: NodeIdx) -> Option<NodeIdx> {
        self.nodes[idx].parent
    }

    pub fn lookup(&self, id: &str) -> Option<NodeIdx> {
        self.node_index.get(id).copied()
    }

    /// Pre-order indices of the subtree rooted at `idx`.
    pub fn subtree(&self, idx: NodeIdx) -> std::ops::Range<NodeIdx> {
        idx..idx + self.nodes[idx].inherent.size as usize
    }

    /// Ancestor `up` levels above `idx` (`up = 0` is the node itself).
    pub fn ancestor(&self, mut idx: NodeIdx, up: u32) -> Option<NodeIdx> {
        for _ in 0..up {
            idx = self.nodes[idx].parent?;
        }
        Some(idx)
    }

    /// Recomputes depth, size, height, width and degree for every node.
    pub fn compute_inherent(&mut self) {
        let n = self.nodes.len();
        for v in 0..n {
            let depth = match self.nodes[v].parent {
                Some(p) => self.nodes[p].inherent.depth + 1,
                None => 1,
            };
            let node = &mut self.nodes[v];
            node.inherent.depth = depth;
            node.inherent.degree = node.children.len() as u32;
        }
        // per-level node counts of each subtree, folded bottom-up
        let mut levels: Vec<Option<Vec<u32>>> = vec![None; n];
        for v in (0..n).rev() {
            let mut counts = vec![1u32];
            let mut size = 1u32;
            for &c in &self.nodes[v].children {
                size += self.nodes[c].inherent.size;
                let child = levels[c].take().expect("child levels computed before parent");
                if counts.len() < child.len() + 1 {
                    counts.resize(child.len() + 1, 0);
                }
                for (i, k) in child.iter().enumerate() {
                    counts[i + 1] += k;
                }
            }
            let node = &mut self.nodes[v];
            node.inherent.size = size;
            node.inherent.height = counts.len() as u32;
            node.inherent.width = counts.iter().copied().max().unwrap_or(1);
            levels[v] = Some(counts);
        }
    }

    pub fn to_doc(&self) -> TreeDoc {
        fn build(tree: &MultiTree, v: NodeIdx) -> NodeDoc {
            let node = tree.node(v);
            NodeDoc {
                id: node.id.clone(),
                attributes: node.attributes.clone(),
                children: node.children.iter().map(|&c| build(tree, c)).collect(),
            }
        }
        TreeDoc {
            tree_id: self.tree_id.clone(),
            root: build(self, 0),
        }
    }

    /// Ordered child-index shape, used by structural comparisons.
    pub fn shape(&self) -> Vec<Vec<NodeIdx>> {
        self.nodes.iter().map(|n| n.children.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeSchema {
    Numeric { min: f64, max: f64 },
    Categorical { values: BTreeSet<String> },
}

impl AttributeSchema {
    pub fn kind(&self) -> AttributeKind {
        match self {
            AttributeSchema::Numeric { .. } => AttributeKind::Numeric,
            AttributeSchema::Categorical { .. } => AttributeKind::Categorical,
        }
    }
}

pub type Schema = BTreeMap<String, AttributeSchema>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub trees: Vec<MultiTree>,
    pub attribute_schema: Schema,
}

impl Corpus {
    pub fn from_doc(doc: &CorpusDoc) -> Result<Self, CorpusError> {
        let mut trees = Vec::with_capacity(doc.trees.len());
        let mut tree_ids = HashSet::new();
        let mut node_ids: HashSet<&str> = HashSet::new();
        for t in &doc.trees {
            if !tree_ids.insert(t.tree_id.as_str()) {
                return Err(CorpusError::DuplicateTreeId(t.tree_id.clone()));
            }
            let tree = MultiTree::from_doc(t.tree_id.clone(), &t.root)?;
            trees.push(tree);
        }
        for (t, tree) in doc.trees.iter().zip(&trees) {
            for node in tree.nodes() {
                if !node_ids.insert(node.id.as_str()) {
                    return Err(CorpusError::DuplicateNodeId {
                        tree_id: t.tree_id.clone(),
                        node_id: node.id.clone(),
                    });
                }
            }
        }
        let attribute_schema = infer_schema(&trees)?;
        Ok(Corpus {
            trees,
            attribute_schema,
        })
    }

    pub fn from_trees(trees: Vec<MultiTree>) -> Result<Self, CorpusError> {
        Corpus::from_doc(&CorpusDoc {
            trees: trees.iter().map(MultiTree::to_doc).collect(),
        })
    }

    pub fn to_doc(&self) -> CorpusDoc {
        CorpusDoc {
            trees: self.trees.iter().map(MultiTree::to_doc).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("corpus serializes")
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(MultiTree::len).sum()
    }

    pub fn tree(&self, tree_id: &str) -> Option<&MultiTree> {
        self.trees.iter().find(|t| t.tree_id == tree_id)
    }
}

fn infer_schema(trees: &[MultiTree]) -> Result<Schema, CorpusError> {
    let mut schema = Schema::new();
    for node in trees.iter().flat_map(|t| t.nodes()) {
        for (name, value) in &node.attributes {
            let entry = schema.entry(name.clone()).or_insert_with(|| match value {
                AttributeValue::Number(n) => AttributeSchema::Numeric { min: *n, max: *n },
                _ => AttributeSchema::Categorical {
                    values: BTreeSet::new(),
                },
            });
            match (entry, value) {
                (AttributeSchema::Numeric { min, max }, AttributeValue::Number(n)) => {
                    *min = min.min(*n);
                    *max = max.max(*n);
                }
                (AttributeSchema::Categorical { values }, AttributeValue::Text(s)) => {
                    values.insert(s.clone());
                }
                (AttributeSchema::Categorical { values }, AttributeValue::List(items)) => {
                    values.extend(items.iter().cloned());
                }
                _ => return Err(CorpusError::MixedAttributeKind(name.clone())),
            }
        }
    }
    Ok(schema)
}

/// Parses a corpus document and computes inherent attributes for every node.
pub fn load_corpus(document: &[u8]) -> Result<Corpus, CorpusError> {
    check_nesting(document)?;
    let mut de = serde_json::Deserializer::from_slice(document);
    de.disable_recursion_limit();
    let doc = CorpusDoc::deserialize(&mut de)
        .and_then(|doc| de.end().map(|_| doc))
        .map_err(|e| CorpusError::MalformedDocument(e.to_string()))?;
    Corpus::from_doc(&doc)
}

fn check_nesting(document: &[u8]) -> Result<(), CorpusError> {
    let (mut depth, mut in_string, mut escaped) = (0usize, false, false);
    for &b in document {
        if in_string {
            match (escaped, b) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => {
                depth += 1;
                if depth > MAX_DOCUMENT_NESTING {
                    return Err(CorpusError::MalformedDocument(format!(
                        "nesting deeper than {MAX_DOCUMENT_NESTING} levels"
                    )));
                }
            }
            b'}' | b']' => depth = depth.saturating_sub(1),
            _ => {}
        }
    }
    Ok(())
}
