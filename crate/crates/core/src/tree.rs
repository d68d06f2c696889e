//! Complete bisecting tree of minimum-density hyperplanes.
//!
//! Nodes use 1-based heap indexing: the root is 1 and node `i` has children
//! `2i` and `2i + 1`. A tree of depth `D` holds `2^D − 1` nodes, of which the
//! last `2^(D−1)` are leaves.
//!
//! [`TreeModel::observe`] is the fitting pass: each observation walks from
//! the root to a leaf, updating every node it visits (count, running mean,
//! projected moments, sum of squares) and taking one optimizer step at every
//! internal node past its warm-up. [`TreeModel::assign`] is the frozen second
//! pass.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::optimizer::{dot, mdh_step, Hyperplane, LearnConfig};
use crate::stats::{MeanAccumulator, ScalarMoments, SumSquaresAccumulator};

/// Format version written into serialized trees.
pub const TREE_FORMAT_VERSION: u32 = 1;

/// Largest supported depth; keeps `2^D − 1` node arrays reasonable.
pub const MAX_DEPTH: u32 = 24;

/// State of one tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    id: usize,
    hyperplane: Hyperplane,
    /// Running mean and within-node sum of squares, updated together.
    ss_acc: SumSquaresAccumulator,
    proj_moments: ScalarMoments,
}

impl NodeState {
    fn fresh(id: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(node_seed(seed, id));
        Self {
            id,
            hyperplane: Hyperplane::random(dim, &mut rng),
            ss_acc: SumSquaresAccumulator::new(dim),
            proj_moments: ScalarMoments::new(),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn hyperplane(&self) -> &Hyperplane {
        &self.hyperplane
    }

    pub fn count(&self) -> u64 {
        self.ss_acc.count()
    }

    pub fn mean(&self) -> &MeanAccumulator {
        self.ss_acc.centroid()
    }

    pub fn proj_moments(&self) -> &ScalarMoments {
        &self.proj_moments
    }

    pub fn ss(&self) -> f64 {
        self.ss_acc.ss()
    }

    /// `vᵀ(x − μ̂)`.
    #[inline]
    fn centered_projection(&self, x: &[f64]) -> f64 {
        self.hyperplane
            .v()
            .iter()
            .zip(x)
            .zip(self.ss_acc.mean())
            .map(|((v, xi), m)| v * (xi - m))
            .sum()
    }
}

/// SplitMix64 finalizer over `seed` and `id`, giving each node its own stream.
fn node_seed(seed: u64, id: usize) -> u64 {
    let mut z = seed ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counters for events that did not change the model the usual way.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitEvents {
    /// `v` updates skipped because `v − γ₁u` vanished.
    pub degenerate_steps: u64,
}

#[derive(Debug, Clone)]
pub struct TreeModel {
    depth: u32,
    dim: usize,
    config: LearnConfig,
    nodes: Vec<NodeState>,
    total_count: u64,
    events: FitEvents,
    scratch: Vec<f64>,
}

impl TreeModel {
    /// Builds a fresh tree; `depth >= 2`, `dim >= 1`, admissible schedule.
    pub fn new(depth: u32, dim: usize, config: LearnConfig) -> Result<Self> {
        if !(2..=MAX_DEPTH).contains(&depth) {
            return Err(Error::InvalidInput(format!(
                "tree depth must be in 2..={MAX_DEPTH}, got {depth}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        config.validate()?;
        let n_nodes = (1usize << depth) - 1;
        let nodes = (1..=n_nodes).map(|id| NodeState::fresh(id, dim, config.seed)).collect();
        Ok(Self {
            depth,
            dim,
            config,
            nodes,
            total_count: 0,
            events: FitEvents::default(),
            scratch: vec![0.0; dim],
        })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &LearnConfig {
        &self.config
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn events(&self) -> FitEvents {
        self.events
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        1 << (self.depth - 1)
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    /// Node by heap id (1-based).
    pub fn node(&self, id: usize) -> Option<&NodeState> {
        id.checked_sub(1).and_then(|i| self.nodes.get(i))
    }

    pub fn is_internal(&self, id: usize) -> bool {
        2 * id < self.nodes.len()
    }

    /// Leaf ids in ascending order.
    pub fn leaf_ids(&self) -> std::ops::RangeInclusive<usize> {
        self.n_leaves()..=self.nodes.len()
    }

    /// Routes `x` from the root, updating every visited node, and returns
    /// the leaf reached.
    pub fn observe(&mut self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observation contains a non-finite value".into()));
        }
        let mut id = 1;
        loop {
            let internal = self.is_internal(id);
            let node = &mut self.nodes[id - 1];
            // the mean is updated before centering
            node.ss_acc.update(x)?;
            for ((c, xi), m) in self.scratch.iter_mut().zip(x).zip(node.ss_acc.mean()) {
                *c = xi - m;
            }
            let p = node.hyperplane.project(&self.scratch);
            node.proj_moments.update(p);
            if !internal {
                break;
            }
            let t = node.ss_acc.count();
            if t > self.config.warmup {
                let sigma = node.proj_moments.std_dev().unwrap_or(0.0);
                let report = mdh_step(&mut node.hyperplane, &self.scratch, t, sigma, &self.config)?;
                if report.outcome == crate::optimizer::StepOutcome::Degenerate {
                    self.events.degenerate_steps += 1;
                }
            }
            let side = dot(node.hyperplane.v(), &self.scratch);
            id = if side < node.hyperplane.b() { 2 * id } else { 2 * id + 1 };
        }
        self.total_count += 1;
        Ok(id)
    }

    /// Frozen routing: the leaf `x` reaches without touching any state.
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim, x.len())?;
        let mut id = 1;
        while self.is_internal(id) {
            let node = &self.nodes[id - 1];
            id = if node.centered_projection(x) < node.hyperplane.b() {
                2 * id
            } else {
                2 * id + 1
            };
        }
        Ok(id)
    }

    /// `SS(j)` for every node, indexed by id.
    pub fn node_ss(&self) -> NodeValues {
        NodeValues(self.nodes.iter().map(NodeState::ss).collect())
    }

    /// Conservation check: `count(i) = count(2i) + count(2i+1)` at every internal node.
    pub fn is_count_consistent(&self) -> bool {
        let root_ok = self.nodes[0].count() == self.total_count;
        root_ok
            && (1..=self.nodes.len())
                .filter(|&i| self.is_internal(i))
                .all(|i| self.nodes[i - 1].count() == self.nodes[2 * i - 1].count() + self.nodes[2 * i].count())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TreeDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDocument = serde_json::from_str(text)?;
        Self::try_from(doc)
    }
}

/// Equality over model state; the scratch buffer is ignored.
impl PartialEq for TreeModel {
    fn eq(&self, other: &Self) -> bool {
        self.depth == other.depth
            && self.dim == other.dim
            && self.config == other.config
            && self.total_count == other.total_count
            && self.events == other.events
            && self.nodes == other.nodes
    }
}

/// Per-node scalar values indexed by 1-based heap id.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeValues(pub Vec<f64>);

impl NodeValues {
    pub fn get(&self, id: usize) -> f64 {
        self.0[id - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().enumerate().map(|(i, &v)| (i + 1, v))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjMomentsRecord {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub v: Vec<f64>,
    pub b: f64,
    pub count: u64,
    pub mean: Vec<f64>,
    pub proj_moments: ProjMomentsRecord,
    pub ss: f64,
}

/// Serialized form of a [`TreeModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeDocument {
    pub format_version: u32,
    pub depth: u32,
    pub dim: usize,
    pub config: LearnConfig,
    pub total_count: u64,
    #[serde(default)]
    pub events: FitEvents,
    pub nodes: Vec<NodeRecord>,
}

impl From<&TreeModel> for TreeDocument {
    fn from(t: &TreeModel) -> Self {
        Self {
            format_version: TREE_FORMAT_VERSION,
            depth: t.depth,
            dim: t.dim,
            config: t.config.clone(),
            total_count: t.total_count,
            events: t.events,
            nodes: t
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    v: n.hyperplane.v().to_vec(),
                    b: n.hyperplane.b(),
                    count: n.count(),
                    mean: n.ss_acc.mean().to_vec(),
                    proj_moments: ProjMomentsRecord {
                        count: n.proj_moments.count,
                        mean: n.proj_moments.mean,
                        m2: n.proj_moments.m2,
                    },
                    ss: n.ss(),
                })
                .collect(),
        }
    }
}

impl TryFrom<TreeDocument> for TreeModel {
    type Error = Error;

    fn try_from(doc: TreeDocument) -> Result<Self> {
        if doc.format_version != TREE_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported tree format version {}",
                doc.format_version
            )));
        }
        let mut tree = TreeModel::new(doc.depth, doc.dim, doc.config)?;
        if doc.nodes.len() != tree.nodes.len() {
            return Err(Error::InvalidInput(format!(
                "tree of depth {} needs {} nodes, document has {}",
                doc.depth,
                tree.nodes.len(),
                doc.nodes.len()
            )));
        }
        for (slot, rec) in tree.nodes.iter_mut().zip(doc.nodes) {
            if rec.id != slot.id {
                return Err(Error::InvalidInput(format!(
                    "node records out of order: expected id {}, found {}",
                    slot.id, rec.id
                )));
            }
            check_dim(doc.dim, rec.v.len())?;
            check_dim(doc.dim, rec.mean.len())?;
            slot.hyperplane = Hyperplane::from_raw(rec.v, rec.b);
            slot.ss_acc = SumSquaresAccumulator::from_parts(MeanAccumulator::from_parts(rec.count, rec.mean), rec.ss);
            slot.proj_moments = ScalarMoments {
                count: rec.proj_moments.count,
                mean: rec.proj_moments.mean,
                m2: rec.proj_moments.m2,
            };
        }
        tree.total_count = doc.total_count;
        tree.events = doc.events;
        Ok(tree)
    }
}
