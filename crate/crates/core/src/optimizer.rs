//! Stochastic gradient descent on the kernel-smoothed projected density.
//!
//! A hyperplane `{x : vᵀx = b}` is moved one observation at a time. Each
//! step evaluates a Gaussian-kernel estimate of the gradient of the density
//! integrated over the hyperplane, then takes a normalized step in `v` and a
//! penalized step in `b`. The bandwidth shrinks as `t^(-q)` so the bias of the
//! gradient estimate vanishes, and the learning rates decay as `t^(-r)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// `1 / sqrt(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `sup_z |z φ(z)| = φ(1)`, attained at `z = ±1`.
pub const MAX_Z_PHI: f64 = 0.241_970_724_519_143_37;

/// Standard univariate Gaussian density.
#[inline]
pub fn gaussian_kernel(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Separating hyperplane `{x : vᵀx = b}` with unit normal `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    v: Vec<f64>,
    b: f64,
}

/// Result of a `v` update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// `v − γ₁u` was the zero vector; `v` was left unchanged.
    Degenerate,
}

impl Hyperplane {
    /// Normalizes `v`; fails on a zero or non-finite vector.
    pub fn new(v: Vec<f64>, b: f64) -> Result<Self> {
        let norm = norm(&v);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput(
                "hyperplane normal must be a nonzero finite vector".into(),
            ));
        }
        if !b.is_finite() {
            return Err(Error::InvalidInput("hyperplane offset must be finite".into()));
        }
        let v = v.into_iter().map(|x| x / norm).collect();
        Ok(Self { v, b })
    }

    /// Direction drawn uniformly from the unit sphere, offset zero.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        assert!(dim > 0, "hyperplane dimension must be positive");
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if let Ok(hp) = Self::new(v, 0.0) {
                return hp;
            }
        }
    }

    pub(crate) fn from_raw(v: Vec<f64>, b: f64) -> Self {
        Self { v, b }
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn with_offset(&self, b: f64) -> Self {
        Self { v: self.v.clone(), b }
    }

    /// `vᵀx`.
    #[inline]
    pub fn project(&self, x: &[f64]) -> f64 {
        dot(&self.v, x)
    }

    /// `v <- (v − γ₁u) / ‖v − γ₁u‖`.
    pub fn update_v(&mut self, u: &[f64], gamma1: f64) -> Result<StepOutcome> {
        check_dim(self.v.len(), u.len())?;
        Ok(self.step_along(u, gamma1))
    }

    /// `v <- normalize(v − coef·dir)` without allocating.
    pub(crate) fn step_along(&mut self, dir: &[f64], coef: f64) -> StepOutcome {
        if coef == 0.0 {
            return StepOutcome::Applied;
        }
        let norm2: f64 = self
            .v
            .iter()
            .zip(dir)
            .map(|(v, d)| {
                let w = v - coef * d;
                w * w
            })
            .sum();
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return StepOutcome::Degenerate;
        }
        let inv = 1.0 / norm2.sqrt();
        for (v, d) in self.v.iter_mut().zip(dir) {
            *v = (*v - coef * d) * inv;
        }
        StepOutcome::Applied
    }

    /// `b <- b + γ₂(β − 2C(|b| − α)₊ sign(b))`, with `sign(0) = 0`.
    pub fn update_b(&mut self, beta: f64, gamma2: f64, c: f64, alpha: f64) {
        self.b += gamma2 * (beta - penalty_slope(self.b, c, alpha));
    }
}

/// Derivative of `C(|b| − α)₊²` with respect to `b`.
#[inline]
pub fn penalty_slope(b: f64, c: f64, alpha: f64) -> f64 {
    let excess = (b.abs() - alpha).max(0.0);
    if b == 0.0 || excess == 0.0 {
        0.0
    } else {
        2.0 * c * excess * b.signum()
    }
}

/// Tuning constants for the optimizer and the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Penalty weight `C`.
    pub c: f64,
    /// `α = alpha_factor · σ̂`.
    pub alpha_factor: f64,
    /// Bandwidth exponent: `h = s · t^(-q)`.
    pub q: f64,
    /// Learning-rate exponent: `γ = γ̄ · t^(-r)`.
    pub r: f64,
    /// `γ̄₁ = gbar1_scale · √d`.
    pub gbar1_scale: f64,
    pub gbar2: f64,
    /// Only used by the admissibility check.
    pub eta: f64,
    /// Lower bound on the bandwidth scale `s = max(σ̂, h_floor)`.
    pub h_floor: f64,
    /// Per-node observations that only update statistics before the hyperplane starts moving.
    pub warmup: u64,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            c: 10.0,
            alpha_factor: 0.1,
            q: 0.2,
            r: 1.0,
            gbar1_scale: 1.0,
            gbar2: 1.0,
            eta: 0.2,
            h_floor: 0.01,
            warmup: 10,
            seed: 0,
        }
    }
}

impl LearnConfig {
    /// Checks value ranges and the schedule admissibility region.
    ///
    /// The error message names every violated inequality.
    pub fn validate(&self) -> Result<()> {
        let (q, r, eta) = (self.q, self.r, self.eta);
        let checks = [
            (self.c >= 0.0 && self.c.is_finite(), "C >= 0"),
            (
                self.alpha_factor >= 0.0 && self.alpha_factor.is_finite(),
                "alpha_factor >= 0",
            ),
            (q > 0.0 && q < 1.0, "0 < q < 1"),
            (
                self.gbar1_scale > 0.0 && self.gbar1_scale.is_finite(),
                "gbar1_scale > 0",
            ),
            (self.gbar2 > 0.0 && self.gbar2.is_finite(), "gbar2 > 0"),
            (eta > 0.0 && eta <= 0.2, "0 < eta <= 0.2"),
            (self.h_floor > 0.0 && self.h_floor.is_finite(), "h_floor > 0"),
            (r > 0.0 && r <= 1.0, "0 < r <= 1"),
            (r + 2.0 * q > 1.0, "r + 2q > 1"),
            (r - q > 0.5, "r - q > 0.5"),
            (r + eta > 1.0, "r + eta > 1"),
            (q >= eta, "q >= eta"),
            (r - eta / 2.0 > 0.5, "r - eta/2 > 0.5"),
        ];
        let violated: Vec<&str> = checks.iter().filter(|(ok, _)| !ok).map(|(_, name)| *name).collect();
        if violated.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "inadmissible learning schedule (q={q}, r={r}, eta={eta}): violates {}",
                violated.join(", ")
            )))
        }
    }
}

/// `h(t) = max(σ̂, h_floor) · t^(-q)`.
pub fn bandwidth(t: u64, sigma_hat: f64, cfg: &LearnConfig) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidInput("bandwidth requires t >= 1".into()));
    }
    let scale = if sigma_hat.is_finite() {
        sigma_hat.max(cfg.h_floor)
    } else {
        cfg.h_floor
    };
    Ok(scale * (t as f64).powf(-cfg.q))
}

/// `(γ₁, γ₂) = (gbar1_scale·√d·t^(-r), gbar2·t^(-r))`.
pub fn learning_rates(t: u64, dim: usize, cfg: &LearnConfig) -> Result<(f64, f64)> {
    if t == 0 {
        return Err(Error::InvalidInput("learning rates require t >= 1".into()));
    }
    let decay = (t as f64).powf(-cfg.r);
    Ok((cfg.gbar1_scale * (dim as f64).sqrt() * decay, cfg.gbar2 * decay))
}

/// One-observation gradient estimate: `u` for `v`, `beta` for `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub u: Vec<f64>,
    pub beta: f64,
}

/// `β = (z/h³) φ(z/h)` with `z = b − vᵀx`.
#[inline]
pub fn beta_coefficient(hp: &Hyperplane, x: &[f64], h: f64) -> f64 {
    let z = hp.b - hp.project(x);
    let w = z / h;
    w * gaussian_kernel(w) / (h * h)
}

/// `u = β x` and `β`, for an already-centered observation.
pub fn stochastic_gradient(hp: &Hyperplane, x_centered: &[f64], h: f64) -> Result<GradientSample> {
    check_dim(hp.dim(), x_centered.len())?;
    let beta = beta_coefficient(hp, x_centered, h);
    Ok(GradientSample {
        u: x_centered.iter().map(|x| beta * x).collect(),
        beta,
    })
}

/// What one [`mdh_step`] did, for bound checks and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub h: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: f64,
    pub b_before: f64,
    pub outcome: StepOutcome,
}

/// Full update for one centered observation at node count `t`.
///
/// `β` is computed from the pre-update `(v, b)` and reused for the `b` step
/// after `v` has moved.
pub fn mdh_step(
    hp: &mut Hyperplane,
    x_centered: &[f64],
    t: u64,
    sigma_hat: f64,
    cfg: &LearnConfig,
) -> Result<StepReport> {
    check_dim(hp.dim(), x_centered.len())?;
    let h = bandwidth(t, sigma_hat, cfg)?;
    let (gamma1, gamma2) = learning_rates(t, hp.dim(), cfg)?;
    let alpha = cfg.alpha_factor * if sigma_hat.is_finite() { sigma_hat } else { 0.0 };
    let beta = beta_coefficient(hp, x_centered, h);
    let b_before = hp.b;
    // u = β x, so the v step is a step along x with coefficient γ₁β
    let outcome = hp.step_along(x_centered, gamma1 * beta);
    hp.update_b(beta, gamma2, cfg.c, alpha);
    Ok(StepReport {
        h,
        beta,
        gamma1,
        gamma2,
        alpha,
        b_before,
        outcome,
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn constants() {
        assert_close(INV_SQRT_2PI, 1.0 / (2.0 * std::f64::consts::PI).sqrt(), 1e-17);
        assert_close(MAX_Z_PHI, gaussian_kernel(1.0), 1e-17);
    }

    #[test]
    fn kernel_values() {
        assert_close(gaussian_kernel(0.0), 0.398_942_280_4, 1e-10);
        assert_close(gaussian_kernel(1.0), 0.241_970_724_5, 1e-10);
        assert_eq!(gaussian_kernel(-1.0), gaussian_kernel(1.0));
        assert!(gaussian_kernel(3.0) < gaussian_kernel(0.5));
    }

    #[test]
    fn bandwidth_examples() {
        let cfg = LearnConfig::default();
        assert_close(bandwidth(1, 2.0, &cfg).unwrap(), 2.0, 1e-15);
        assert_close(bandwidth(32, 1.0, &cfg).unwrap(), 0.5, 1e-15);
        let expected = 0.01 * 10f64.powf(-0.2);
        assert_close(bandwidth(10, 0.0, &cfg).unwrap(), expected, 1e-15);
        assert_close(expected, 0.006310, 1e-6);
        assert!(bandwidth(0, 1.0, &cfg).is_err());
        // NaN σ̂ falls back to the floor
        assert_close(bandwidth(1, f64::NAN, &cfg).unwrap(), 0.01, 1e-15);
    }

    #[test]
    fn learning_rate_examples() {
        let cfg = LearnConfig::default();
        let (g1, g2) = learning_rates(1, 4, &cfg).unwrap();
        assert_close(g1, 2.0, 1e-15);
        assert_close(g2, 1.0, 1e-15);
        let (g1, g2) = learning_rates(100, 1, &cfg).unwrap();
        assert_close(g1, 0.01, 1e-15);
        assert_close(g2, 0.01, 1e-15);
        let (g1, g2) = learning_rates(8, 16, &cfg).unwrap();
        assert_close(g1, 0.5, 1e-15);
        assert_close(g2, 0.125, 1e-15);
        assert!(learning_rates(0, 3, &cfg).is_err());
    }

    #[test]
    fn stochastic_gradient_examples() {
        let hp = Hyperplane::new(vec![1.0, 0.0], 3.0).unwrap();
        let g = stochastic_gradient(&hp, &[3.0, 7.0], 0.5).unwrap();
        assert_eq!(g.beta, 0.0);
        assert!(g.u.iter().all(|&u| u == 0.0));

        let hp = Hyperplane::new(vec![1.0, 0.0], 1.0).unwrap();
        let g = stochastic_gradient(&hp, &[0.0, 0.0], 1.0).unwrap();
        assert_close(g.beta, 0.241_970_72, 1e-8);
        assert_eq!(g.u, vec![0.0, 0.0]);

        // z = -2, h = 2: beta = (-2/8) φ(-1)
        let hp = Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap();
        let g = stochastic_gradient(&hp, &[2.0, 1.0], 2.0).unwrap();
        assert_close(g.beta, -0.060_492_7, 1e-7);
        assert_close(g.u[0], -0.120_985_4, 1e-7);
        assert_close(g.u[1], -0.060_492_7, 1e-7);

        assert!(stochastic_gradient(&hp, &[1.0], 1.0).is_err());
    }

    #[test]
    fn update_v_examples() {
        let mut hp = Hyperplane::new(vec![0.6, 0.8], 0.3).unwrap();
        let before = hp.clone();
        assert_eq!(hp.update_v(&[0.0, 0.0], 5.0).unwrap(), StepOutcome::Applied);
        assert_eq!(hp, before);

        // collinear step, γ₁c = 0.5 < 1
        let u: Vec<f64> = before.v().iter().map(|x| 2.5 * x).collect();
        hp.update_v(&u, 0.2).unwrap();
        for (a, b) in hp.v().iter().zip(before.v()) {
            assert_close(*a, *b, 1e-15);
        }
        assert_eq!(hp.b(), 0.3);

        let mut hp = Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap();
        hp.update_v(&[0.0, 1.0], 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(hp.v()[0], s, 1e-15);
        assert_close(hp.v()[1], -s, 1e-15);
    }

    #[test]
    fn update_v_antipodal_step_is_skipped() {
        let mut hp = Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap();
        let outcome = hp.update_v(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(outcome, StepOutcome::Degenerate);
        assert_eq!(hp.v(), &[1.0, 0.0]);
    }

    #[test]
    fn update_b_examples() {
        let mut hp = Hyperplane::new(vec![1.0], 0.5).unwrap();
        hp.update_b(0.0, 0.1, 10.0, 1.0);
        assert_eq!(hp.b(), 0.5);

        let mut hp = Hyperplane::new(vec![1.0], 2.0).unwrap();
        hp.update_b(0.0, 0.01, 10.0, 1.0);
        assert_close(hp.b(), 1.8, 1e-15);

        let mut hp = Hyperplane::new(vec![1.0], 0.0).unwrap();
        hp.update_b(0.3, 0.5, 123.0, 0.0);
        assert_close(hp.b(), 0.15, 1e-15);

        let mut hp = Hyperplane::new(vec![1.0], -2.0).unwrap();
        hp.update_b(0.0, 0.01, 10.0, 1.0);
        assert_close(hp.b(), -1.8, 1e-15);
    }

    #[test]
    fn hyperplane_rejects_zero_normal() {
        assert!(Hyperplane::new(vec![0.0, 0.0], 0.0).is_err());
        assert!(Hyperplane::new(vec![1.0, f64::NAN], 0.0).is_err());
    }

    #[test]
    fn default_schedule_is_admissible() {
        LearnConfig::default().validate().unwrap();
    }

    #[test]
    fn inadmissible_schedule_names_violations() {
        let cfg = LearnConfig {
            q: 0.6,
            ..LearnConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("r - q > 0.5"), "{msg}");

        let cfg = LearnConfig {
            r: 0.7,
            q: 0.1,
            ..LearnConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("r + 2q > 1"), "{msg}");
        assert!(msg.contains("q >= eta"), "{msg}");

        let cfg = LearnConfig {
            r: 1.2,
            ..LearnConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("0 < r <= 1"));
    }

    #[test]
    fn step_on_hyperplane_inside_band_is_noop() {
        let cfg = LearnConfig::default();
        let mut hp = Hyperplane::new(vec![0.0, 1.0], 0.05).unwrap();
        let before = hp.clone();
        // x on the hyperplane: vᵀx = b
        let report = mdh_step(&mut hp, &[4.0, 0.05], 20, 1.0, &cfg).unwrap();
        assert_eq!(report.beta, 0.0);
        assert_eq!(hp, before);
    }

    #[test]
    fn step_bounds_and_unit_norm_hold() {
        let cfg = LearnConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dim = 5;
        let mut hp = Hyperplane::random(dim, &mut rng);
        for t in 1..=20_000u64 {
            let x: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0).collect();
            let sigma = 0.5 + rng.random::<f64>();
            let r = mdh_step(&mut hp, &x, t, sigma, &cfg).unwrap();
            let bound_beta = MAX_Z_PHI / (r.h * r.h);
            assert!(r.beta.abs() <= bound_beta * (1.0 + 1e-12));
            let db = (hp.b() - r.b_before).abs();
            let bound_db = r.gamma2 * (bound_beta + 2.0 * cfg.c * (r.b_before.abs() - r.alpha).max(0.0));
            assert!(db <= bound_db * (1.0 + 1e-12) + 1e-300);
            assert!((norm(hp.v()) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn repeated_point_keeps_offset_bounded() {
        let cfg = LearnConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hp = Hyperplane::random(3, &mut rng);
        let x = [1.0, -2.0, 0.5];
        for t in 1..=1000u64 {
            let r = mdh_step(&mut hp, &x, t, 1.0, &cfg).unwrap();
            let z = (hp.b() - hp.project(&x)) / r.h;
            assert!(z.is_finite() && z.abs() < 1e6, "z/h diverged: {z}");
        }
    }
}
