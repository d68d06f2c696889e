//! Python bindings for `mdh-core`.
//!
//! The module is called `mdh`. It exposes the streaming tree with its pruning
//! steps, plus the Gaussian-mixture oracle and the external metrics.
//! Vectors cross the boundary as Python lists of floats. Core errors are
//! raised as `ValueError` (or `OSError` for I/O), with the message prefixed
//! by the error category in brackets.

use mdh_core::optimizer;
use mdh_core::prune::{self, PruneSequence as CoreSequence};
use mdh_core::tree::NodeValues;
use mdh_core::{
    metrics, ClusteringModel as CoreModel, Error, GaussianMixture as CoreMixture, KChoice, TreeModel as CoreTree,
};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    let msg = format!("[{}] {e}", e.category());
    match e {
        Error::Io(_) => PyOSError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for mdh_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Optimizer and tree settings. Defaults match the command-line tool.
#[pyclass(name = "LearnConfig", module = "mdh", get_all, set_all)]
#[derive(Debug)]
struct PyLearnConfig {
    c: f64,
    alpha_factor: f64,
    q: f64,
    r: f64,
    gbar1_scale: f64,
    gbar2: f64,
    eta: f64,
    h_floor: f64,
    warmup: u64,
    seed: u64,
}

impl PyLearnConfig {
    fn core(&self) -> optimizer::LearnConfig {
        optimizer::LearnConfig {
            c: self.c,
            alpha_factor: self.alpha_factor,
            q: self.q,
            r: self.r,
            gbar1_scale: self.gbar1_scale,
            gbar2: self.gbar2,
            eta: self.eta,
            h_floor: self.h_floor,
            warmup: self.warmup,
            seed: self.seed,
        }
    }

    fn from_core(c: &optimizer::LearnConfig) -> Self {
        Self {
            c: c.c,
            alpha_factor: c.alpha_factor,
            q: c.q,
            r: c.r,
            gbar1_scale: c.gbar1_scale,
            gbar2: c.gbar2,
            eta: c.eta,
            h_floor: c.h_floor,
            warmup: c.warmup,
            seed: c.seed,
        }
    }
}

fn config_or_default(cfg: Option<PyRef<'_, PyLearnConfig>>) -> optimizer::LearnConfig {
    cfg.map_or_else(optimizer::LearnConfig::default, |c| c.core())
}

#[pymethods]
impl PyLearnConfig {
    #[new]
    #[pyo3(signature = (*, c=10.0, alpha_factor=0.1, q=0.2, r=1.0, gbar1_scale=1.0, gbar2=1.0, eta=0.2, h_floor=0.01, warmup=10, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        c: f64,
        alpha_factor: f64,
        q: f64,
        r: f64,
        gbar1_scale: f64,
        gbar2: f64,
        eta: f64,
        h_floor: f64,
        warmup: u64,
        seed: u64,
    ) -> Self {
        Self {
            c,
            alpha_factor,
            q,
            r,
            gbar1_scale,
            gbar2,
            eta,
            h_floor,
            warmup,
            seed,
        }
    }

    /// Raises `ValueError` naming every violated schedule condition.
    fn validate(&self) -> PyResult<()> {
        self.core().validate().py_err()
    }

    fn __repr__(&self) -> String {
        format!(
            "LearnConfig(c={}, alpha_factor={}, q={}, r={}, gbar1_scale={}, gbar2={}, eta={}, h_floor={}, warmup={}, seed={})",
            self.c, self.alpha_factor, self.q, self.r, self.gbar1_scale, self.gbar2, self.eta, self.h_floor, self.warmup, self.seed
        )
    }
}

/// A hyperplane `{x : vᵀx = b}` with unit normal `v`.
#[pyclass(name = "Hyperplane", module = "mdh")]
struct PyHyperplane {
    inner: optimizer::Hyperplane,
}

#[pymethods]
impl PyHyperplane {
    #[new]
    fn new(v: Vec<f64>, b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: optimizer::Hyperplane::new(v, b).py_err()?,
        })
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.v().to_vec()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b()
    }

    fn project(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "[dimension] expected {} values, got {}",
                self.inner.dim(),
                x.len()
            )));
        }
        Ok(self.inner.project(&x))
    }

    /// One stochastic update on an already-centered observation at node
    /// count `t`. Returns the step's bandwidth, rates and `β` as a dict.
    #[pyo3(signature = (x, t, sigma_hat, config=None))]
    fn step<'py>(
        &mut self,
        py: Python<'py>,
        x: Vec<f64>,
        t: u64,
        sigma_hat: f64,
        config: Option<PyRef<'py, PyLearnConfig>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = config_or_default(config);
        let rep = optimizer::mdh_step(&mut self.inner, &x, t, sigma_hat, &cfg).py_err()?;
        let d = PyDict::new(py);
        d.set_item("h", rep.h)?;
        d.set_item("beta", rep.beta)?;
        d.set_item("gamma1", rep.gamma1)?;
        d.set_item("gamma2", rep.gamma2)?;
        d.set_item("alpha", rep.alpha)?;
        d.set_item("degenerate", rep.outcome == optimizer::StepOutcome::Degenerate)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Hyperplane(v={:?}, b={})", self.inner.v(), self.inner.b())
    }
}

/// Complete binary tree of streaming hyperplanes, fitted one row at a time.
#[pyclass(name = "TreeModel", module = "mdh")]
struct PyTreeModel {
    inner: CoreTree,
}

#[pymethods]
impl PyTreeModel {
    #[new]
    #[pyo3(signature = (depth, dim, config=None))]
    fn new(depth: u32, dim: usize, config: Option<PyRef<'_, PyLearnConfig>>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreTree::new(depth, dim, config_or_default(config)).py_err()?,
        })
    }

    /// Routes `x` to a leaf, updating every node on the way. Returns the leaf id.
    fn observe(&mut self, x: Vec<f64>) -> PyResult<usize> {
        self.inner.observe(&x).py_err()
    }

    /// `observe` for each row in order; returns the leaf ids.
    fn observe_many(&mut self, rows: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        rows.iter()
            .map(|x| self.inner.observe(x))
            .collect::<mdh_core::Result<_>>()
            .py_err()
    }

    /// Leaf id reached by `x` without changing the tree.
    fn assign(&self, x: Vec<f64>) -> PyResult<usize> {
        self.inner.assign(&x).py_err()
    }

    /// Within-node sum of squares, indexed by `id − 1`.
    fn node_ss(&self) -> Vec<f64> {
        self.inner.node_ss().0
    }

    /// Observation counts, indexed by `id − 1`.
    fn node_counts(&self) -> Vec<u64> {
        self.inner.nodes().iter().map(|n| n.count()).collect()
    }

    fn hyperplane(&self, id: usize) -> PyResult<PyHyperplane> {
        let node = self
            .inner
            .node(id)
            .ok_or_else(|| PyValueError::new_err(format!("[input] no node with id {id}")))?;
        Ok(PyHyperplane {
            inner: node.hyperplane().clone(),
        })
    }

    fn is_count_consistent(&self) -> bool {
        self.inner.is_count_consistent()
    }

    #[getter]
    fn depth(&self) -> u32 {
        self.inner.depth()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn total_count(&self) -> u64 {
        self.inner.total_count()
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn n_leaves(&self) -> usize {
        self.inner.n_leaves()
    }

    #[getter]
    fn config(&self) -> PyLearnConfig {
        PyLearnConfig::from_core(self.inner.config())
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py_err()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreTree::from_json(text).py_err()?,
        })
    }
}

/// `(k, [(kmax, pick), ...], n_degenerate)`.
type Vote = (usize, Vec<(usize, usize)>, usize);

/// Greedy pruning sequence of a fitted tree.
#[pyclass(name = "PruneSequence", module = "mdh")]
struct PyPruneSequence {
    inner: CoreSequence,
}

#[pymethods]
impl PyPruneSequence {
    #[staticmethod]
    fn from_tree(tree: PyRef<'_, PyTreeModel>) -> Self {
        Self {
            inner: CoreSequence::from_tree(&tree.inner),
        }
    }

    /// Sequence for arbitrary node values (`ss[id − 1]`) on a tree of `depth`.
    #[staticmethod]
    fn from_ss(depth: u32, ss: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreSequence::from_ss(depth, &NodeValues(ss)).py_err()?,
        })
    }

    /// Total SS of the `K`-leaf model at index `K − 1`.
    #[getter]
    fn ss_curve(&self) -> Vec<f64> {
        self.inner.ss_curve().to_vec()
    }

    /// Nodes in the order their children were merged.
    #[getter]
    fn pruned_order(&self) -> Vec<usize> {
        self.inner.pruned_order().to_vec()
    }

    #[getter]
    fn max_leaves(&self) -> usize {
        self.inner.max_leaves()
    }

    /// Leaf ids of the model with exactly `k` leaves.
    fn cut(&self, k: usize) -> PyResult<Vec<usize>> {
        Ok(prune::cut_to_k(&self.inner, k).py_err()?.leaves)
    }

    /// Elbow vote over `kmax_range`; returns `(k, [(kmax, pick), ...], n_degenerate)`.
    fn select_k(&self, kmax_range: Vec<usize>) -> PyResult<Vote> {
        let sel = prune::select_k(&self.inner, &kmax_range).py_err()?;
        Ok((sel.k, sel.picks, sel.degenerate))
    }
}

/// Two-arctan elbow score of `k` against `kmax` on an SS curve indexed by `K − 1`.
#[pyfunction]
fn elbow_score(k: usize, kmax: usize, curve: Vec<f64>) -> PyResult<f64> {
    prune::elbow_score(k, kmax, &curve).py_err()
}

/// Fitted tree plus a cluster labelling of its leaves.
#[pyclass(name = "ClusteringModel", module = "mdh")]
struct PyClusteringModel {
    inner: CoreModel,
    method: String,
}

fn k_choice(k: Option<usize>, kmax_range: Option<(usize, usize)>) -> PyResult<KChoice> {
    match (k, kmax_range) {
        (Some(_), Some(_)) => Err(PyValueError::new_err("[usage] pass either k or kmax_range, not both")),
        (Some(k), None) => Ok(KChoice::Fixed(k)),
        (None, Some((kmax_min, kmax_max))) => Ok(KChoice::Vote { kmax_min, kmax_max }),
        (None, None) => Ok(KChoice::Auto),
    }
}

#[pymethods]
impl PyClusteringModel {
    /// Prunes a copy of `tree`: to `k` leaves if given, else by elbow vote.
    #[staticmethod]
    #[pyo3(signature = (tree, k=None, kmax_range=None))]
    fn from_tree(tree: PyRef<'_, PyTreeModel>, k: Option<usize>, kmax_range: Option<(usize, usize)>) -> PyResult<Self> {
        let (inner, summary) = CoreModel::from_tree(tree.inner.clone(), &k_choice(k, kmax_range)?).py_err()?;
        Ok(Self {
            inner,
            method: summary.method,
        })
    }

    /// Cluster label `0..K` of `x`.
    fn assign(&self, x: Vec<f64>) -> PyResult<usize> {
        self.inner.assign(&x).py_err()
    }

    fn assign_many(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        rows.iter()
            .map(|x| self.inner.assign(x))
            .collect::<mdh_core::Result<_>>()
            .py_err()
    }

    /// Pruned-model leaf ids; label `i` belongs to `clusters[i]`.
    #[getter]
    fn clusters(&self) -> Vec<usize> {
        self.inner.clusters().to_vec()
    }

    #[getter]
    fn n_clusters(&self) -> usize {
        self.inner.n_clusters()
    }

    /// How `K` was chosen: `"vote"`, `"fixed"`, `"full"`, or `"loaded"`.
    #[getter]
    fn method(&self) -> &str {
        &self.method
    }

    #[getter]
    fn tree(&self) -> PyTreeModel {
        PyTreeModel {
            inner: self.inner.tree().clone(),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py_err()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreModel::from_json(text).py_err()?,
            method: "loaded".into(),
        })
    }
}

/// Streams `rows` through a fresh tree and prunes it.
#[pyfunction]
#[pyo3(signature = (rows, depth=8, config=None, k=None, kmax_range=None))]
fn fit(
    rows: Vec<Vec<f64>>,
    depth: u32,
    config: Option<PyRef<'_, PyLearnConfig>>,
    k: Option<usize>,
    kmax_range: Option<(usize, usize)>,
) -> PyResult<PyClusteringModel> {
    let first = rows
        .first()
        .ok_or_else(|| PyValueError::new_err("[input] no rows to fit"))?;
    let choice = k_choice(k, kmax_range)?;
    let mut tree = CoreTree::new(depth, first.len(), config_or_default(config)).py_err()?;
    for x in &rows {
        tree.observe(x).py_err()?;
    }
    let (inner, summary) = CoreModel::from_tree(tree, &choice).py_err()?;
    Ok(PyClusteringModel {
        inner,
        method: summary.method,
    })
}

/// Gaussian mixture with exact projected density and its gradients.
#[pyclass(name = "GaussianMixture", module = "mdh")]
struct PyGaussianMixture {
    inner: CoreMixture,
}

#[pymethods]
impl PyGaussianMixture {
    /// `covariances[k]` is a `d × d` nested list.
    #[new]
    fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let flat = covariances.into_iter().map(|c| c.concat()).collect();
        Ok(Self {
            inner: CoreMixture::new(weights, means, flat).py_err()?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreMixture::from_json(text).py_err()?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn means(&self) -> Vec<Vec<f64>> {
        self.inner.means().to_vec()
    }

    /// Exact mixture mean.
    fn mean(&self) -> Vec<f64> {
        self.inner.mean()
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.inner.sample(n, seed)
    }

    /// `(rows, component_labels)`.
    fn sample_labeled(&self, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        self.inner.sample_labeled(n, seed)
    }

    fn proj_density(&self, v: Vec<f64>, b: f64) -> PyResult<f64> {
        self.inner.proj_density(&v, b).py_err()
    }

    fn proj_density_grad_v(&self, v: Vec<f64>, b: f64) -> PyResult<Vec<f64>> {
        self.inner.proj_density_grad_v(&v, b).py_err()
    }

    fn proj_density_db(&self, v: Vec<f64>, b: f64) -> PyResult<f64> {
        self.inner.proj_density_db(&v, b).py_err()
    }

    fn objective(&self, v: Vec<f64>, b: f64, c: f64, alpha: f64) -> PyResult<f64> {
        self.inner.objective(&v, b, c, alpha).py_err()
    }

    /// `(tangent gradient norm, |∂O/∂b|)` at `hp`.
    fn stationarity_residual(&self, hp: PyRef<'_, PyHyperplane>, c: f64, alpha: f64) -> PyResult<(f64, f64)> {
        let r = self.inner.stationarity_residual(&hp.inner, c, alpha).py_err()?;
        Ok((r.grad_v_tangent_norm, r.grad_b_abs))
    }
}

/// Integer or string cluster label.
#[derive(FromPyObject, PartialEq, Eq, Hash)]
enum Label {
    Int(i64),
    Str(String),
}

/// Normalized mutual information (geometric-mean normalization).
#[pyfunction]
fn nmi(truth: Vec<Label>, pred: Vec<Label>) -> PyResult<f64> {
    metrics::nmi(&truth, &pred).py_err()
}

/// Adjusted Rand index.
#[pyfunction]
fn ari(truth: Vec<Label>, pred: Vec<Label>) -> PyResult<f64> {
    metrics::ari(&truth, &pred).py_err()
}

#[pymodule]
fn mdh(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLearnConfig>()?;
    m.add_class::<PyHyperplane>()?;
    m.add_class::<PyTreeModel>()?;
    m.add_class::<PyPruneSequence>()?;
    m.add_class::<PyClusteringModel>()?;
    m.add_class::<PyGaussianMixture>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(elbow_score, m)?)?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    m.add_function(wrap_pyfunction!(ari, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choice_mapping() {
        assert!(matches!(k_choice(None, None), Ok(KChoice::Auto)));
        assert!(matches!(k_choice(Some(3), None), Ok(KChoice::Fixed(3))));
        assert!(matches!(
            k_choice(None, Some((4, 9))),
            Ok(KChoice::Vote {
                kmax_min: 4,
                kmax_max: 9
            })
        ));
    }

    #[test]
    fn config_round_trips_through_the_wrapper() {
        let core = optimizer::LearnConfig {
            seed: 7,
            warmup: 3,
            ..Default::default()
        };
        assert_eq!(PyLearnConfig::from_core(&core).core(), core);
    }
}
