//! Exact ground truth for finite Gaussian mixtures.
//!
//! For `X ~ Σₖ πₖ N(μₖ, Σₖ)` the projection `vᵀX` is again a Gaussian
//! mixture with component means `vᵀμₖ` and variances `vᵀΣₖv`, so the density
//! integrated over a hyperplane, its gradients in `v` and `b`, and the
//! penalized objective all have closed forms. These are used to check the
//! stochastic optimizer and to drive the diagnostics.
//!
//! The gradient formulas treat `v` as a free vector in ℝᵈ; callers pass unit
//! vectors but the functions do not renormalize, which lets finite-difference
//! checks step off the sphere.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::optimizer::{dot, penalty_slope, Hyperplane, INV_SQRT_2PI};

/// On-disk mixture description. Covariances may be nested rows or flat row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Each covariance is a row-major `d × d` matrix, either flat (`d²` values)
    /// or nested (`d` rows).
    pub covariances: Vec<Covariance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariance {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl Covariance {
    fn into_flat(self, dim: usize) -> Result<Vec<f64>> {
        let flat = match self {
            Covariance::Flat(v) => v,
            Covariance::Rows(rows) => {
                if rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::Config(format!("covariance rows must each have {dim} entries")));
                }
                rows.into_iter().flatten().collect()
            }
        };
        if flat.len() != dim * dim {
            return Err(Error::Config(format!(
                "covariance must have {} entries, got {}",
                dim * dim,
                flat.len()
            )));
        }
        Ok(flat)
    }
}

/// Validated finite Gaussian mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MixtureSpec", into = "MixtureSpec")]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<DMatrix<f64>>,
    cholesky: Vec<DMatrix<f64>>,
}

/// `(‖(I − vvᵀ)∇ᵥf‖, |∂O/∂b|)`; both vanish at a constrained stationary point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityResidual {
    pub grad_v_tangent_norm: f64,
    pub grad_b_abs: f64,
}

impl GaussianMixture {
    /// Validates weights (positive, summing to 1 within 1e-12), dimensions,
    /// symmetry (1e-12) and positive-definiteness (Cholesky).
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Vec<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        if means.len() != k || covariances.len() != k {
            return Err(Error::Config(format!(
                "mixture has {k} weights but {} means and {} covariances",
                means.len(),
                covariances.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Config("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("mixture weights must sum to 1, got {total}")));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::Config("mixture dimension must be positive".into()));
        }
        let mut covs = Vec::with_capacity(k);
        let mut chols = Vec::with_capacity(k);
        for (j, (mean, cov)) in means.iter().zip(covariances).enumerate() {
            if mean.len() != dim {
                return Err(Error::Config(format!(
                    "component {j} mean has dimension {}, expected {dim}",
                    mean.len()
                )));
            }
            if mean.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("component {j} mean is not finite")));
            }
            if cov.len() != dim * dim {
                return Err(Error::Config(format!(
                    "component {j} covariance must have {} entries, got {}",
                    dim * dim,
                    cov.len()
                )));
            }
            let m = DMatrix::from_row_slice(dim, dim, &cov);
            let asym = (&m - m.transpose()).amax();
            if asym.is_nan() || asym > 1e-12 {
                return Err(Error::Config(format!(
                    "component {j} covariance is not symmetric (max asymmetry {asym:e})"
                )));
            }
            let chol = m
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Config(format!("component {j} covariance is not positive definite")))?;
            chols.push(chol.l());
            covs.push(m);
        }
        Ok(Self {
            weights,
            means,
            covariances: covs,
            cholesky: chols,
        })
    }

    pub fn from_spec(spec: MixtureSpec) -> Result<Self> {
        let dim = spec.means.first().map_or(0, Vec::len);
        let covs = spec
            .covariances
            .into_iter()
            .map(|c| c.into_flat(dim))
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec.weights, spec.means, covs)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MixtureSpec = serde_json::from_str(text)?;
        Self::from_spec(spec)
    }

    pub fn to_spec(&self) -> MixtureSpec {
        MixtureSpec {
            weights: self.weights.clone(),
            means: self.means.clone(),
            covariances: self
                .covariances
                .iter()
                .map(|m| Covariance::Rows(m.row_iter().map(|r| r.iter().copied().collect()).collect()))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// Row-major covariance of component `k`.
    pub fn covariance(&self, k: usize) -> Vec<f64> {
        self.covariances[k].transpose().as_slice().to_vec()
    }

    /// Exact mixture mean `Σ πₖ μₖ`.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (w, m) in self.weights.iter().zip(&self.means) {
            for (o, x) in out.iter_mut().zip(m) {
                *o += w * x;
            }
        }
        out
    }

    /// Per component: weight, projected mean `vᵀμₖ`, projected variance `vᵀΣₖv`, `Σₖv`.
    fn projected<'a>(&'a self, v: &'a [f64]) -> impl Iterator<Item = (f64, f64, f64, DVector<f64>, &'a Vec<f64>)> + 'a {
        let vv = DVector::from_column_slice(v);
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.covariances)
            .map(move |((&w, mu), cov)| {
                let sv = cov * &vv;
                let var = vv.dot(&sv);
                (w, dot(v, mu), var, sv, mu)
            })
    }

    fn component_kernel(b: f64, m: f64, var: f64) -> f64 {
        let diff = b - m;
        INV_SQRT_2PI * var.powf(-1.5) * (-diff * diff / (2.0 * var)).exp()
    }

    /// Density of `vᵀX` at `b`.
    pub fn proj_density(&self, v: &[f64], b: f64) -> Result<f64> {
        check_dim(self.dim(), v.len())?;
        Ok(self
            .projected(v)
            .map(|(w, m, var, _, _)| {
                let diff = b - m;
                w * INV_SQRT_2PI / var.sqrt() * (-diff * diff / (2.0 * var)).exp()
            })
            .sum())
    }

    /// Gradient of the projected density with respect to `v`.
    pub fn proj_density_grad_v(&self, v: &[f64], b: f64) -> Result<Vec<f64>> {
        check_dim(self.dim(), v.len())?;
        let mut grad = vec![0.0; self.dim()];
        for (w, m, var, sv, mu) in self.projected(v) {
            let diff = b - m;
            let scale = w * Self::component_kernel(b, m, var);
            let sv_coef = diff * diff / var - 1.0;
            for ((g, mu_i), sv_i) in grad.iter_mut().zip(mu).zip(sv.iter()) {
                *g += scale * (diff * mu_i + sv_coef * sv_i);
            }
        }
        Ok(grad)
    }

    /// Derivative of the projected density with respect to `b`.
    pub fn proj_density_db(&self, v: &[f64], b: f64) -> Result<f64> {
        check_dim(self.dim(), v.len())?;
        Ok(self
            .projected(v)
            .map(|(w, m, var, _, _)| w * Self::component_kernel(b, m, var) * (m - b))
            .sum())
    }

    /// `f_{vᵀX}(b) + C(|b − vᵀμ| − α)₊²` with the exact mixture mean `μ`.
    pub fn objective(&self, v: &[f64], b: f64, c: f64, alpha: f64) -> Result<f64> {
        let density = self.proj_density(v, b)?;
        let offset = b - dot(v, &self.mean());
        let excess = (offset.abs() - alpha).max(0.0);
        Ok(density + c * excess * excess)
    }

    pub fn stationarity_residual(&self, hp: &Hyperplane, c: f64, alpha: f64) -> Result<StationarityResidual> {
        let v = hp.v();
        let b = hp.b();
        let grad = self.proj_density_grad_v(v, b)?;
        let radial = dot(&grad, v);
        let tangent2: f64 = grad
            .iter()
            .zip(v)
            .map(|(g, vi)| {
                let t = g - radial * vi;
                t * t
            })
            .sum();
        let offset = b - dot(v, &self.mean());
        let db = self.proj_density_db(v, b)? + penalty_slope(offset, c, alpha);
        Ok(StationarityResidual {
            grad_v_tangent_norm: tangent2.sqrt(),
            grad_b_abs: db.abs(),
        })
    }

    /// Infinite stream of `(component, point)` draws, deterministic in `seed`.
    pub fn sampler(&self, seed: u64) -> MixtureSampler<'_> {
        MixtureSampler {
            mixture: self,
            rng: ChaCha8Rng::seed_from_u64(seed),
            choose: WeightedIndex::new(&self.weights).expect("weights validated"),
            z: vec![0.0; self.dim()],
        }
    }

    /// `n` i.i.d. draws.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.sampler(seed).take(n).map(|(_, x)| x).collect()
    }

    /// `n` i.i.d. draws with their component labels.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let (labels, points) = self.sampler(seed).take(n).unzip();
        (points, labels)
    }
}

impl TryFrom<MixtureSpec> for GaussianMixture {
    type Error = Error;

    fn try_from(spec: MixtureSpec) -> Result<Self> {
        Self::from_spec(spec)
    }
}

impl From<GaussianMixture> for MixtureSpec {
    fn from(g: GaussianMixture) -> Self {
        g.to_spec()
    }
}

pub struct MixtureSampler<'a> {
    mixture: &'a GaussianMixture,
    rng: ChaCha8Rng,
    choose: WeightedIndex<f64>,
    z: Vec<f64>,
}

impl Iterator for MixtureSampler<'_> {
    type Item = (usize, Vec<f64>);

    fn next(&mut self) -> Option<Self::Item> {
        let k = self.choose.sample(&mut self.rng);
        for z in self.z.iter_mut() {
            *z = self.rng.sample(StandardNormal);
        }
        let chol = &self.mixture.cholesky[k];
        let mean = &self.mixture.means[k];
        let d = mean.len();
        // x = μ + L z, L lower triangular
        let x = (0..d)
            .map(|i| mean[i] + (0..=i).map(|j| chol[(i, j)] * self.z[j]).sum::<f64>())
            .collect();
        Some((k, x))
    }
}
