//! Corpus summary used by the distribution panel and `check`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::tree::{AttributeSchema, Corpus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bin {
    pub value: u32,
    pub count: u32,
}

/// Per-tree distribution of one root-level inherent attribute.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Distribution {
    pub min: Option<u32>,
    pub max: Option<u32>,
    pub histogram: Vec<Bin>,
}

impl Distribution {
    fn from_values(values: impl IntoIterator<Item = u32>) -> Self {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for v in values {
            *counts.entry(v).or_default() += 1;
        }
        Distribution {
            min: counts.keys().next().copied(),
            max: counts.keys().next_back().copied(),
            histogram: counts.into_iter().map(|(value, count)| Bin { value, count }).collect(),
        }
    }

    pub fn total(&self) -> u32 {
        self.histogram.iter().map(|b| b.count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub tree_count: usize,
    pub node_count: usize,
    pub attributes: BTreeMap<String, AttributeSchema>,
    pub size: Distribution,
    pub height: Distribution,
    pub width: Distribution,
}

impl CorpusStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let roots = || corpus.trees.iter().map(|t| t.node(t.root()).inherent);
    CorpusStats {
        tree_count: corpus.trees.len(),
        node_count: corpus.node_count(),
        attributes: corpus.attribute_schema.clone(),
        size: Distribution::from_values(roots().map(|i| i.size)),
        height: Distribution::from_values(roots().map(|i| i.height)),
        width: Distribution::from_values(roots().map(|i| i.width)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::load_corpus;

    #[test]
    fn empty_corpus() {
        let s = corpus_stats(&Corpus::default());
        assert_eq!(s.tree_count, 0);
        assert_eq!(s.node_count, 0);
        assert_eq!(s.size, Distribution::default());
        assert!(s.attributes.is_empty());
    }

    #[test]
    fn single_tree_min_equals_max() {
        let c = load_corpus(br#"{"trees":[{"tree_id":"t","root":{"id":"a","children":[{"id":"b"},{"id":"c"}]}}]}"#)
            .unwrap();
        let s = corpus_stats(&c);
        for d in [&s.size, &s.height, &s.width] {
            assert_eq!(d.min, d.max);
            assert_eq!(d.total(), 1);
        }
        assert_eq!(s.size.min, Some(3));
    }
}
