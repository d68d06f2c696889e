//! Offline pruning of a fitted tree and selection of the number of clusters.
//!
//! Pruning is a view over per-node sums of squares: nothing here mutates a
//! tree. Starting from the full tree, each step collapses the pre-terminal
//! node whose merge adds the least within-cluster sum of squares, which
//! yields one nested model per leaf count from `2^(D−1)` down to 1.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::f64::consts::FRAC_PI_2;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{NodeValues, TreeModel};

/// A subtree containing the root in which every kept internal node keeps
/// both children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedModel {
    pub kept: BTreeSet<usize>,
    /// Leaves of the subtree, ascending by id.
    pub leaves: Vec<usize>,
    pub total_ss: f64,
}

impl PrunedModel {
    /// The unpruned tree of the given depth.
    pub fn full(depth: u32, ss: &NodeValues) -> Result<Self> {
        let n_nodes = check_layout(depth, ss)?;
        let kept: BTreeSet<usize> = (1..=n_nodes).collect();
        Ok(Self::from_kept(kept, ss))
    }

    /// Builds a model from its kept set, deriving leaves and `total_ss`.
    pub fn from_kept(kept: BTreeSet<usize>, ss: &NodeValues) -> Self {
        let leaves: Vec<usize> = kept.iter().copied().filter(|&j| !kept.contains(&(2 * j))).collect();
        let total_ss = leaves.iter().map(|&j| ss.get(j)).sum();
        Self { kept, leaves, total_ss }
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Kept nodes whose two children are both leaves of this model.
    pub fn pre_terminal(&self) -> impl Iterator<Item = usize> + '_ {
        self.kept
            .iter()
            .copied()
            .filter(|&j| self.leaves.binary_search(&(2 * j)).is_ok() && self.leaves.binary_search(&(2 * j + 1)).is_ok())
    }

    /// The kept ancestor-or-self of `node` that is a leaf of this model.
    pub fn leaf_covering(&self, mut node: usize) -> usize {
        while node > 1 && !self.kept.contains(&node) {
            node /= 2;
        }
        node
    }
}

/// `SS(j) − SS(2j) − SS(2j+1)`: the increase in total SS from merging `j`'s children.
pub fn merge_cost(ss: &NodeValues, j: usize) -> f64 {
    ss.get(j) - (ss.get(2 * j) + ss.get(2 * j + 1))
}

fn check_layout(depth: u32, ss: &NodeValues) -> Result<usize> {
    if !(2..=crate::tree::MAX_DEPTH).contains(&depth) {
        return Err(Error::InvalidInput(format!("cannot prune a tree of depth {depth}")));
    }
    let n_nodes = (1usize << depth) - 1;
    if ss.len() != n_nodes {
        return Err(Error::InvalidInput(format!(
            "depth {depth} needs {n_nodes} node values, got {}",
            ss.len()
        )));
    }
    Ok(n_nodes)
}

/// One greedy pruning step: collapses the cheapest pre-terminal node (ties to
/// the smallest id) and returns the new model with that node's id.
pub fn prune_step(model: &PrunedModel, ss: &NodeValues) -> Result<(PrunedModel, usize)> {
    if model.n_leaves() < 2 {
        return Err(Error::InvalidInput("a single-leaf model cannot be pruned".into()));
    }
    let mut best: Option<(f64, usize)> = None;
    for j in model.pre_terminal() {
        let cost = merge_cost(ss, j);
        // pre_terminal yields ascending ids, so strict < keeps the smaller id on ties
        if best.is_none_or(|(c, _)| cost.total_cmp(&c) == Ordering::Less) {
            best = Some((cost, j));
        }
    }
    let (_, j) = best.ok_or_else(|| Error::InvalidInput("model has no pre-terminal node".into()))?;
    let mut kept = model.kept.clone();
    kept.remove(&(2 * j));
    kept.remove(&(2 * j + 1));
    Ok((PrunedModel::from_kept(kept, ss), j))
}

/// Heap entry ordered so that the max-heap pops the smallest cost, then the smallest id.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    id: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.id.cmp(&self.id))
    }
}

/// The nested models `H_L, H_{L−1}, …, H_1` produced by greedy pruning.
///
/// Only the pruning order is stored; [`PruneSequence::model`] rebuilds any
/// member on demand so that deep trees do not need `O(L²)` storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSequence {
    depth: u32,
    ss: Vec<f64>,
    /// Node collapsed at each step, in order.
    pruned: Vec<usize>,
    /// `ss_curve[K − 1]` is the total SS of the model with `K` leaves.
    ss_curve: Vec<f64>,
}

impl PruneSequence {
    pub fn from_tree(tree: &TreeModel) -> Self {
        Self::from_ss(tree.depth(), &tree.node_ss()).expect("a tree always has a consistent layout")
    }

    pub fn from_ss(depth: u32, ss: &NodeValues) -> Result<Self> {
        let n_nodes = check_layout(depth, ss)?;
        let n_leaves = n_nodes.div_ceil(2);
        let first_leaf = n_leaves;
        let mut is_leaf = vec![false; n_nodes + 1];
        is_leaf[first_leaf..=n_nodes].iter_mut().for_each(|l| *l = true);

        let mut heap: BinaryHeap<Candidate> = (first_leaf / 2..first_leaf)
            .map(|id| Candidate {
                cost: merge_cost(ss, id),
                id,
            })
            .collect();
        let mut total: f64 = (first_leaf..=n_nodes).map(|j| ss.get(j)).sum();
        let mut curve_desc = Vec::with_capacity(n_leaves);
        curve_desc.push(total);
        let mut pruned = Vec::with_capacity(n_leaves - 1);
        while let Some(Candidate { cost, id }) = heap.pop() {
            is_leaf[id] = true;
            total += cost;
            curve_desc.push(total);
            pruned.push(id);
            let parent = id / 2;
            if parent >= 1 && is_leaf[id ^ 1] {
                heap.push(Candidate {
                    cost: merge_cost(ss, parent),
                    id: parent,
                });
            }
        }
        debug_assert_eq!(curve_desc.len(), n_leaves);
        curve_desc.reverse();
        Ok(Self {
            depth,
            ss: ss.0.clone(),
            pruned,
            ss_curve: curve_desc,
        })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Leaf count of the unpruned model.
    pub fn max_leaves(&self) -> usize {
        self.ss_curve.len()
    }

    /// Nodes collapsed in order, from the full model downwards.
    pub fn pruned_order(&self) -> &[usize] {
        &self.pruned
    }

    /// Total SS indexed by `K − 1`.
    pub fn ss_curve(&self) -> &[f64] {
        &self.ss_curve
    }

    /// Total SS of the model with `k` leaves.
    pub fn ss_at(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.ss_curve.get(i).copied())
    }

    /// The member with exactly `k` leaves.
    pub fn model(&self, k: usize) -> Result<PrunedModel> {
        let max = self.max_leaves();
        if k == 0 || k > max {
            return Err(Error::InvalidInput(format!("k must be in 1..={max}, got {k}")));
        }
        let ss = NodeValues(self.ss.clone());
        let mut kept: BTreeSet<usize> = (1..=self.ss.len()).collect();
        for &j in &self.pruned[..max - k] {
            kept.remove(&(2 * j));
            kept.remove(&(2 * j + 1));
        }
        Ok(PrunedModel::from_kept(kept, &ss))
    }
}

/// Arctan elbow score of `K` against `K_max`; lower means a sharper elbow.
///
/// `curve[K − 1]` is the total SS of the `K`-leaf model. When the curve is
/// flat between `K = 1` and `K`, the first ratio is taken as `+∞` (so the
/// first term is `π/2`). A curve flat between 1 and `K_max` has no elbow and
/// is reported as [`Error::DegenerateCurve`].
pub fn elbow_score(k: usize, kmax: usize, curve: &[f64]) -> Result<f64> {
    if kmax < 3 || kmax > curve.len() {
        return Err(Error::InvalidInput(format!(
            "K_max must be in 3..={}, got {kmax}",
            curve.len()
        )));
    }
    if k < 2 || k > kmax - 1 {
        return Err(Error::InvalidInput(format!("K must be in 2..={}, got {k}", kmax - 1)));
    }
    let ss1 = curve[0];
    let ssk = curve[k - 1];
    let ssm = curve[kmax - 1];
    let span = ss1 - ssm;
    if span == 0.0 {
        return Err(Error::DegenerateCurve(format!(
            "total SS is identical at K=1 and K_max={kmax}"
        )));
    }
    let (k, kmax) = (k as f64, kmax as f64);
    let head = ss1 - ssk;
    let first = if head == 0.0 {
        FRAC_PI_2
    } else {
        ((k - 1.0) / (kmax - 1.0) * (span / head)).atan()
    };
    let second = ((kmax - 1.0) / (kmax - k) * ((ssk - ssm) / span)).atan();
    Ok(first + second)
}

/// Elbow scores closer than this are ties. Scores lie in `[0, π]`, and
/// mathematically equal scores can differ by a few ulps after rounding.
pub const ELBOW_TIE_TOLERANCE: f64 = 1e-12;

/// Outcome of elbow voting over a range of `K_max` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub k: usize,
    /// `(K_max, picked K)` for every `K_max` voted on.
    pub picks: Vec<(usize, usize)>,
    /// Number of `K_max` values whose curve was flat (they vote for `K = 1`).
    pub degenerate: usize,
}

/// `argmin_K` of the elbow score for one `K_max`; ties (within
/// [`ELBOW_TIE_TOLERANCE`]) go to the smaller `K`.
/// A degenerate curve picks `K = 1`.
pub fn pick_for_kmax(kmax: usize, curve: &[f64]) -> Result<(usize, bool)> {
    let mut best: Option<(f64, usize)> = None;
    for k in 2..kmax {
        let score = match elbow_score(k, kmax, curve) {
            Ok(s) => s,
            Err(Error::DegenerateCurve(_)) => return Ok((1, true)),
            Err(e) => return Err(e),
        };
        if best.is_none_or(|(b, _)| score < b - ELBOW_TIE_TOLERANCE) {
            best = Some((score, k));
        }
    }
    best.map(|(_, k)| (k, false))
        .ok_or_else(|| Error::InvalidInput(format!("no candidate K for K_max={kmax}")))
}

/// Votes over `kmax_range` and returns the most frequent pick (ties to the
/// smaller `K`).
pub fn select_k(seq: &PruneSequence, kmax_range: &[usize]) -> Result<Selection> {
    select_k_on_curve(seq.ss_curve(), kmax_range)
}

/// As [`select_k`], on a bare SS curve indexed by `K − 1`.
pub fn select_k_on_curve(curve: &[f64], kmax_range: &[usize]) -> Result<Selection> {
    if kmax_range.is_empty() {
        return Err(Error::Config("the K_max range is empty".into()));
    }
    if let Some(&bad) = kmax_range.iter().find(|&&m| m < 3 || m > curve.len()) {
        return Err(Error::Config(format!("K_max={bad} is outside 3..={}", curve.len())));
    }
    let mut picks = Vec::with_capacity(kmax_range.len());
    let mut degenerate = 0;
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for &kmax in kmax_range {
        let (k, flat) = pick_for_kmax(kmax, curve)?;
        degenerate += usize::from(flat);
        picks.push((kmax, k));
        *votes.entry(k).or_default() += 1;
    }
    // BTreeMap iterates ascending K; strict > keeps the smaller K on ties
    let mut k = 0;
    let mut top = 0;
    for (&cand, &n) in &votes {
        if n > top {
            top = n;
            k = cand;
        }
    }
    Ok(Selection { k, picks, degenerate })
}

/// Default voting range `[4, L]` for a tree with `L` leaves, or `None` when
/// `L < 4`.
pub fn default_kmax_range(max_leaves: usize) -> Option<RangeInclusive<usize>> {
    (max_leaves >= 4).then_some(4..=max_leaves)
}

/// The member of `seq` with exactly `k` leaves.
pub fn cut_to_k(seq: &PruneSequence, k: usize) -> Result<PrunedModel> {
    seq.model(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(v: &[f64]) -> NodeValues {
        NodeValues(v.to_vec())
    }

    #[test]
    fn single_pre_terminal_node() {
        let ss = values(&[10.0, 3.0, 4.0]);
        let full = PrunedModel::full(2, &ss).unwrap();
        assert_eq!(full.leaves, vec![2, 3]);
        assert_eq!(full.total_ss, 7.0);
        let (next, j) = prune_step(&full, &ss).unwrap();
        assert_eq!(j, 1);
        assert_eq!(next.leaves, vec![1]);
        assert_eq!(next.total_ss - full.total_ss, 3.0);
        assert!(prune_step(&next, &ss).is_err());
    }

    #[test]
    fn cheaper_merge_goes_first() {
        // SS(2) − SS(4) − SS(5) = 1, SS(3) − SS(6) − SS(7) = 2
        let ss = values(&[50.0, 5.0, 8.0, 2.0, 2.0, 3.0, 3.0]);
        let full = PrunedModel::full(3, &ss).unwrap();
        assert_eq!(prune_step(&full, &ss).unwrap().1, 2);
        // equal increases: tie goes to node 2
        let ss = values(&[50.0, 6.0, 8.0, 2.0, 2.0, 3.0, 3.0]);
        assert_eq!(prune_step(&full, &ss).unwrap().1, 2);
    }

    #[test]
    fn sequence_structure() {
        let seq = PruneSequence::from_ss(2, &values(&[10.0, 3.0, 4.0])).unwrap();
        assert_eq!(seq.max_leaves(), 2);
        assert_eq!(seq.ss_curve(), &[10.0, 7.0]);
        assert_eq!(seq.model(2).unwrap().n_leaves(), 2);
        assert_eq!(seq.model(1).unwrap().leaves, vec![1]);

        let ss = values(&[50.0, 5.0, 8.0, 2.0, 2.0, 3.0, 3.0]);
        let seq = PruneSequence::from_ss(3, &ss).unwrap();
        assert_eq!(seq.pruned_order(), &[2, 3, 1]);
        assert_eq!(seq.ss_curve(), &[50.0, 13.0, 11.0, 10.0]);
        let m3 = cut_to_k(&seq, 3).unwrap();
        assert_eq!(m3.leaves, vec![2, 6, 7]);
        assert_eq!(cut_to_k(&seq, 4).unwrap(), PrunedModel::full(3, &ss).unwrap());
        assert!(cut_to_k(&seq, 0).is_err());
        assert!(cut_to_k(&seq, 5).is_err());
        assert_eq!(m3.leaf_covering(4), 2);
        assert_eq!(m3.leaf_covering(7), 7);
    }

    #[test]
    fn layout_errors() {
        assert!(PruneSequence::from_ss(3, &values(&[1.0, 2.0, 3.0])).is_err());
        assert!(PrunedModel::full(1, &values(&[1.0])).is_err());
    }

    #[test]
    fn elbow_piecewise_linear_knee() {
        let curve = [100.0, 10.0, 9.0, 8.0, 7.0, 6.0, 5.0];
        let (k, flat) = pick_for_kmax(7, &curve).unwrap();
        assert_eq!((k, flat), (2, false));
    }

    #[test]
    fn elbow_zero_numerator_and_flat_head() {
        let curve = [100.0, 40.0, 20.0, 20.0, 20.0];
        // SS(K*) = SS(Kmax) makes the second term vanish
        let s = elbow_score(3, 5, &curve).unwrap();
        let first = ((2.0f64 / 4.0) * (80.0 / 80.0)).atan();
        assert!((s - first).abs() < 1e-15);
        // flat head: first term is pi/2
        let curve = [100.0, 100.0, 50.0, 0.0];
        let s = elbow_score(2, 4, &curve).unwrap();
        let second = (3.0f64 / 2.0 * (100.0 / 100.0)).atan();
        assert!((s - FRAC_PI_2 - second).abs() < 1e-15);
    }

    #[test]
    fn linear_curve_ties_go_to_smallest_k() {
        let curve: Vec<f64> = (0..7).map(|i| 100.0 - 10.0 * i as f64).collect();
        let scores: Vec<f64> = (2..7).map(|k| elbow_score(k, 7, &curve).unwrap()).collect();
        assert!(scores.iter().all(|s| (s - FRAC_PI_2).abs() < 1e-12));
        assert_eq!(pick_for_kmax(7, &curve).unwrap(), (2, false));
    }

    #[test]
    fn degenerate_curve() {
        let curve = [5.0, 5.0, 5.0, 5.0];
        assert!(matches!(elbow_score(2, 4, &curve), Err(Error::DegenerateCurve(_))));
        let sel = select_k_on_curve(&curve, &[3, 4]).unwrap();
        assert_eq!(sel.k, 1);
        assert_eq!(sel.degenerate, 2);
    }

    #[test]
    fn argument_checks() {
        let curve = [10.0, 5.0, 3.0, 2.0];
        assert!(elbow_score(1, 4, &curve).is_err());
        assert!(elbow_score(4, 4, &curve).is_err());
        assert!(elbow_score(2, 5, &curve).is_err());
        assert!(matches!(select_k_on_curve(&curve, &[]), Err(Error::Config(_))));
        assert!(matches!(select_k_on_curve(&curve, &[2]), Err(Error::Config(_))));
    }

    #[test]
    fn voting_mode_and_single_kmax() {
        let curve = [100.0, 10.0, 9.0, 8.0, 7.0, 6.0, 5.0];
        let sel = select_k_on_curve(&curve, &[7]).unwrap();
        assert_eq!(sel.k, pick_for_kmax(7, &curve).unwrap().0);
        assert_eq!(sel.picks, vec![(7, 2)]);
    }

    #[test]
    fn default_range() {
        assert_eq!(default_kmax_range(2), None);
        assert_eq!(default_kmax_range(4), Some(4..=4));
        assert_eq!(default_kmax_range(128), Some(4..=128));
    }
}
