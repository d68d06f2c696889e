//! A fitted tree together with the pruned cut that defines its clusters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prune::{cut_to_k, default_kmax_range, select_k, PruneSequence, PrunedModel, Selection};
use crate::tree::{TreeDocument, TreeModel};

/// Format version of the combined model document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// How the number of clusters is chosen after fitting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KChoice {
    /// Elbow voting over the default `K_max` range.
    Auto,
    /// Elbow voting over an explicit inclusive `K_max` range.
    Vote { kmax_min: usize, kmax_max: usize },
    /// A fixed number of clusters.
    Fixed(usize),
}

/// Record of how the cut was chosen, for the selection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub k: usize,
    /// `"vote"`, `"fixed"`, or `"full"` (tree too shallow to vote).
    pub method: String,
    pub ss_curve: Vec<f64>,
    pub pruned_order: Vec<usize>,
    pub selection: Option<Selection>,
}

/// Fitted tree plus cluster labelling.
///
/// Labels are `0..K` in ascending id order of the pruned model's leaves; a
/// point's label is found by frozen routing to a full-tree leaf and then
/// climbing to the pruned leaf above it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringModel {
    tree: TreeModel,
    clusters: Vec<usize>,
    /// Indexed by `full_leaf − first_leaf`.
    label_of_leaf: Vec<usize>,
}

impl ClusteringModel {
    /// Prunes `tree` and picks the cut according to `choice`.
    pub fn from_tree(tree: TreeModel, choice: &KChoice) -> Result<(Self, SelectionSummary)> {
        let seq = PruneSequence::from_tree(&tree);
        let (pruned, method, selection) = match *choice {
            KChoice::Fixed(k) => (cut_to_k(&seq, k)?, "fixed", None),
            KChoice::Vote { kmax_min, kmax_max } => {
                if kmax_min > kmax_max {
                    return Err(Error::Config(format!("K_max range {kmax_min}..{kmax_max} is empty")));
                }
                let range: Vec<usize> = (kmax_min..=kmax_max).collect();
                let sel = select_k(&seq, &range)?;
                (cut_to_k(&seq, sel.k)?, "vote", Some(sel))
            }
            KChoice::Auto => match default_kmax_range(seq.max_leaves()) {
                Some(range) => {
                    let range: Vec<usize> = range.collect();
                    let sel = select_k(&seq, &range)?;
                    (cut_to_k(&seq, sel.k)?, "vote", Some(sel))
                }
                None => (cut_to_k(&seq, seq.max_leaves())?, "full", None),
            },
        };
        let summary = SelectionSummary {
            k: pruned.n_leaves(),
            method: method.to_string(),
            ss_curve: seq.ss_curve().to_vec(),
            pruned_order: seq.pruned_order().to_vec(),
            selection,
        };
        Ok((Self::with_clusters(tree, pruned.leaves)?, summary))
    }

    /// Pairs a tree with an explicit leaf set, which must partition the tree.
    pub fn with_clusters(tree: TreeModel, clusters: Vec<usize>) -> Result<Self> {
        let first_leaf = tree.n_leaves();
        let mut sorted = clusters.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != clusters.len() || sorted != clusters {
            return Err(Error::InvalidInput("cluster leaves must be strictly ascending".into()));
        }
        if clusters.iter().any(|&j| j == 0 || j > tree.n_nodes()) {
            return Err(Error::InvalidInput("cluster leaf id outside the tree".into()));
        }
        let mut label_of_leaf = vec![usize::MAX; first_leaf];
        for (label, &j) in clusters.iter().enumerate() {
            // full-tree leaves below j form the contiguous id range [j·2^s, (j+1)·2^s)
            let mut lo = j;
            let mut hi = j + 1;
            while lo < first_leaf {
                lo *= 2;
                hi *= 2;
            }
            for leaf in lo..hi {
                let slot = &mut label_of_leaf[leaf - first_leaf];
                if *slot != usize::MAX {
                    return Err(Error::InvalidInput(format!("cluster leaves overlap below node {j}")));
                }
                *slot = label;
            }
        }
        if label_of_leaf.contains(&usize::MAX) {
            return Err(Error::InvalidInput("cluster leaves do not cover the tree".into()));
        }
        Ok(Self {
            tree,
            clusters,
            label_of_leaf,
        })
    }

    pub fn tree(&self) -> &TreeModel {
        &self.tree
    }

    pub fn into_tree(self) -> TreeModel {
        self.tree
    }

    /// Pruned-model leaf ids, ascending; label `i` is `clusters()[i]`.
    pub fn clusters(&self) -> &[usize] {
        &self.clusters
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// The pruned model this labelling corresponds to.
    pub fn pruned(&self) -> PrunedModel {
        let ss = self.tree.node_ss();
        let mut kept = std::collections::BTreeSet::new();
        for &j in &self.clusters {
            let mut a = j;
            while a >= 1 && kept.insert(a) {
                a /= 2;
            }
        }
        PrunedModel::from_kept(kept, &ss)
    }

    /// Cluster label of a full-tree leaf.
    pub fn label_of(&self, leaf: usize) -> usize {
        self.label_of_leaf[leaf - self.tree.n_leaves()]
    }

    /// Cluster label of `x` under frozen routing.
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        Ok(self.label_of(self.tree.assign(x)?))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            tree: TreeDocument::from(&self.tree),
            clusters: self.clusters.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Self::with_clusters(TreeModel::try_from(doc.tree)?, doc.clusters)
    }
}

/// On-disk layout of a [`ClusteringModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub tree: TreeDocument,
    /// Leaf ids of the pruned model, ascending.
    pub clusters: Vec<usize>,
}
