//! Streaming clustering with minimum-density hyperplanes.
//!
//! A complete bisecting tree is fitted in one pass: every internal node keeps
//! a hyperplane that is moved by stochastic gradient descent on a
//! kernel-smoothed estimate of the density along its normal. After the pass
//! the tree is pruned greedily by within-node sum of squares and the number
//! of clusters is picked with an arctan elbow rule voted over several
//! maximum model sizes.
//!
//! The [`oracle`] module evaluates the exact projected density of a Gaussian
//! mixture and its gradients, which the test suite and the `diagnose`
//! command use as ground truth.

pub mod diagnostics;
pub mod error;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod oracle;
pub mod prune;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use model::{ClusteringModel, KChoice};
pub use optimizer::{Hyperplane, LearnConfig};
pub use oracle::GaussianMixture;
pub use prune::{PruneSequence, PrunedModel, Selection};
pub use tree::TreeModel;
