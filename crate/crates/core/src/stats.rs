//! Single-pass accumulators kept by every tree node.
//!
//! All three use Welford-style recurrences so that long streams do not lose
//! precision the way naive sum / sum-of-squares accumulation does.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

/// Running mean of d-dimensional observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanAccumulator {
    count: u64,
    mean: Vec<f64>,
}

impl MeanAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
        }
    }

    pub(crate) fn from_parts(count: u64, mean: Vec<f64>) -> Self {
        Self { count, mean }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `mean <- (n/(n+1)) mean + x/(n+1)`.
    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        check_dim(self.mean.len(), x.len())?;
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for (m, &xi) in self.mean.iter_mut().zip(x) {
            *m += (xi - *m) * inv;
        }
        Ok(())
    }
}

/// Running mean and sum of squared deviations of a scalar stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarMoments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl ScalarMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, p: f64) {
        self.count += 1;
        let delta = p - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (p - self.mean);
    }

    /// Population variance `m2 / count`, or `None` before two observations.
    pub fn variance(&self) -> Option<f64> {
        if self.count < 2 {
            None
        } else {
            Some((self.m2 / self.count as f64).max(0.0))
        }
    }

    /// `sqrt(m2 / count)`; `None` is the "not yet defined" sentinel that the
    /// bandwidth floor absorbs.
    pub fn std_dev(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }
}

/// Running within-set sum of squares `Σ‖xᵢ − x̄‖²` together with its mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumSquaresAccumulator {
    centroid: MeanAccumulator,
    ss: f64,
}

impl SumSquaresAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            centroid: MeanAccumulator::new(dim),
            ss: 0.0,
        }
    }

    pub(crate) fn from_parts(centroid: MeanAccumulator, ss: f64) -> Self {
        Self { centroid, ss }
    }

    pub fn count(&self) -> u64 {
        self.centroid.count()
    }

    pub fn mean(&self) -> &[f64] {
        self.centroid.mean()
    }

    pub fn centroid(&self) -> &MeanAccumulator {
        &self.centroid
    }

    pub fn ss(&self) -> f64 {
        self.ss
    }

    /// `ss <- ss + (n/(n+1))‖x − mean‖²`, then the mean update.
    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        check_dim(self.centroid.dim(), x.len())?;
        let n = self.centroid.count() as f64;
        let dist2: f64 = self
            .centroid
            .mean()
            .iter()
            .zip(x)
            .map(|(m, xi)| (xi - m) * (xi - m))
            .sum();
        self.ss += n / (n + 1.0) * dist2;
        self.centroid.update(x)
    }
}
