//! Convergence diagnostics of a single hyperplane against a known mixture.
//!
//! A depth-2 tree (one learnable hyperplane) is fitted on draws from a
//! [`GaussianMixture`]. At log-spaced checkpoints the root hyperplane is
//! mapped back to raw coordinates and scored with the exact oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{bandwidth, beta_coefficient, dot, Hyperplane, LearnConfig};
use crate::oracle::GaussianMixture;
use crate::tree::TreeModel;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseConfig {
    pub steps: u64,
    pub data_seed: u64,
    pub learn: LearnConfig,
    /// Draws per checkpoint for the Monte Carlo gradient-bias estimate; 0 skips it.
    pub bias_samples: usize,
    /// Checkpoints per decade, starting at `t = 100`.
    pub per_decade: u32,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            steps: 100_000,
            data_seed: 0,
            learn: LearnConfig::default(),
            bias_samples: 10_000,
            per_decade: 10,
        }
    }
}

/// State and exact scores of the root hyperplane at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub v: Vec<f64>,
    /// Offset relative to the running mean.
    pub b: f64,
    /// Offset in raw coordinates, `b + vᵀμ̂`.
    pub b_raw: f64,
    pub sigma_hat: f64,
    pub h: f64,
    pub alpha: f64,
    pub grad_v_tangent_norm: f64,
    pub grad_b_abs: f64,
    pub objective: f64,
    /// `‖mean(u) − ∇ᵥf‖` over fresh draws at the current bandwidth.
    pub bias_norm: Option<f64>,
    /// Standard error of `bias_norm` from the per-coordinate sample variance.
    pub bias_std_error: Option<f64>,
}

/// Checkpoint times `round(10^(2 + i/per_decade))` up to `steps`, plus `steps`.
pub fn checkpoint_times(steps: u64, per_decade: u32) -> Vec<u64> {
    let mut out = Vec::new();
    if steps == 0 {
        return out;
    }
    let per = per_decade.max(1) as f64;
    for i in 0.. {
        let t = 10f64.powf(2.0 + i as f64 / per).round() as u64;
        if t > steps {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

/// Fits one hyperplane on `cfg.steps` mixture draws, scoring it at every checkpoint.
pub fn run_diagnostics(mixture: &GaussianMixture, cfg: &DiagnoseConfig) -> Result<Vec<Checkpoint>> {
    run_diagnostics_with(mixture, cfg, |_| Ok(()))
}

/// As [`run_diagnostics`], passing each checkpoint to `sink` as soon as it is computed.
pub fn run_diagnostics_with<F>(mixture: &GaussianMixture, cfg: &DiagnoseConfig, mut sink: F) -> Result<Vec<Checkpoint>>
where
    F: FnMut(&Checkpoint) -> Result<()>,
{
    if cfg.steps == 0 {
        return Err(Error::InvalidInput("diagnostics need at least one step".into()));
    }
    let mut tree = TreeModel::new(2, mixture.dim(), cfg.learn.clone())?;
    let times = checkpoint_times(cfg.steps, cfg.per_decade);
    let mut next = times.iter().peekable();
    let mut out = Vec::with_capacity(times.len());
    let draws = mixture.sampler(cfg.data_seed);
    for (t, (_, x)) in (1..=cfg.steps).zip(draws) {
        tree.observe(&x)?;
        if next.peek() == Some(&&t) {
            next.next();
            let cp = score_root(mixture, &tree, cfg, t)?;
            sink(&cp)?;
            out.push(cp);
        }
    }
    Ok(out)
}

fn score_root(mixture: &GaussianMixture, tree: &TreeModel, cfg: &DiagnoseConfig, t: u64) -> Result<Checkpoint> {
    let root = tree.node(1).expect("root exists");
    let hp = root.hyperplane();
    let v = hp.v().to_vec();
    let sigma_hat = root.proj_moments().std_dev().unwrap_or(0.0);
    let alpha = cfg.learn.alpha_factor * sigma_hat;
    let b_raw = hp.b() + dot(&v, root.mean().mean());
    let raw = Hyperplane::new(v.clone(), b_raw)?;
    let residual = mixture.stationarity_residual(&raw, cfg.learn.c, alpha)?;
    let objective = mixture.objective(&v, b_raw, cfg.learn.c, alpha)?;
    let h = bandwidth(root.count(), sigma_hat, &cfg.learn)?;
    let (bias_norm, bias_std_error) = if cfg.bias_samples > 0 {
        let seed = cfg.data_seed ^ t.wrapping_mul(0xA24B_AED4_963E_E407);
        let (b, se) = monte_carlo_bias(mixture, &raw, h, cfg.bias_samples, seed)?;
        (Some(b), Some(se))
    } else {
        (None, None)
    };
    Ok(Checkpoint {
        t,
        v,
        b: hp.b(),
        b_raw,
        sigma_hat,
        h,
        alpha,
        grad_v_tangent_norm: residual.grad_v_tangent_norm,
        grad_b_abs: residual.grad_b_abs,
        objective,
        bias_norm,
        bias_std_error,
    })
}

/// Monte Carlo `‖mean(u) − ∇ᵥf‖` at `hp` and bandwidth `h`, with its
/// approximate standard error.
pub fn monte_carlo_bias(
    mixture: &GaussianMixture,
    hp: &Hyperplane,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one Monte Carlo draw".into()));
    }
    let d = mixture.dim();
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for (i, (_, x)) in mixture.sampler(seed).take(samples).enumerate() {
        let beta = beta_coefficient(hp, &x, h);
        let n = (i + 1) as f64;
        for ((m, s), xi) in mean.iter_mut().zip(m2.iter_mut()).zip(&x) {
            let u = beta * xi;
            let delta = u - *m;
            *m += delta / n;
            *s += delta * (u - *m);
        }
    }
    let exact = mixture.proj_density_grad_v(hp.v(), hp.b())?;
    let n = samples as f64;
    let bias: f64 = mean
        .iter()
        .zip(&exact)
        .map(|(m, e)| (m - e).powi(2))
        .sum::<f64>()
        .sqrt();
    let se = (m2.iter().sum::<f64>() / (n * n)).sqrt();
    Ok((bias, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_grid() {
        let t = checkpoint_times(1000, 10);
        assert_eq!(t.first(), Some(&100));
        assert_eq!(t.last(), Some(&1000));
        assert_eq!(t.len(), 11);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(checkpoint_times(50, 10), vec![50]);
        assert_eq!(checkpoint_times(1500, 1), vec![100, 1000, 1500]);
        assert!(checkpoint_times(0, 10).is_empty());
    }

    #[test]
    fn standard_normal_run_is_well_formed() {
        let g = GaussianMixture::new(vec![1.0], vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0, 0.0, 1.0]]).unwrap();
        let cfg = DiagnoseConfig {
            steps: 2_000,
            bias_samples: 500,
            ..DiagnoseConfig::default()
        };
        let mut streamed = 0;
        let cps = run_diagnostics_with(&g, &cfg, |_| {
            streamed += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(cps.len(), streamed);
        assert_eq!(cps.last().unwrap().t, 2_000);
        for cp in &cps {
            assert!((dot(&cp.v, &cp.v) - 1.0).abs() < 1e-12);
            assert!(cp.h > 0.0 && cp.grad_b_abs >= 0.0 && cp.bias_norm.unwrap() >= 0.0);
        }
    }

    #[test]
    fn deterministic() {
        let g = GaussianMixture::new(vec![1.0], vec![vec![1.0]], vec![vec![2.0]]).unwrap();
        let cfg = DiagnoseConfig {
            steps: 500,
            bias_samples: 10,
            ..DiagnoseConfig::default()
        };
        assert_eq!(run_diagnostics(&g, &cfg).unwrap(), run_diagnostics(&g, &cfg).unwrap());
    }
}
