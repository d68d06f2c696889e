//! Property tests of the Gaussian-mixture oracle against quadrature, finite
//! differences and rotations.

use mdh_core::optimizer::Hyperplane;
use mdh_core::GaussianMixture;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_mixture(rng: &mut ChaCha8Rng, k: usize, d: usize) -> GaussianMixture {
    let raw: Vec<f64> = (0..k).map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let means = (0..k)
        .map(|_| (0..d).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let covs = (0..k)
        .map(|_| {
            let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
            let c = &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.2;
            let c = (&c + c.transpose()) * 0.5;
            c.iter().copied().collect()
        })
        .collect();
    GaussianMixture::new(weights, means, covs).unwrap()
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    a.qr().q()
}

fn rotate(g: &GaussianMixture, q: &DMatrix<f64>) -> GaussianMixture {
    let d = g.dim();
    let means = g
        .means()
        .iter()
        .map(|m| (q * nalgebra::DVector::from_column_slice(m)).iter().copied().collect())
        .collect();
    let covs = (0..g.n_components())
        .map(|k| {
            let s = DMatrix::from_row_slice(d, d, &g.covariance(k));
            let r = q * s * q.transpose();
            let r = (&r + r.transpose()) * 0.5;
            r.iter().copied().collect()
        })
        .collect();
    GaussianMixture::new(g.weights().to_vec(), means, covs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn projected_density_integrates_to_one(seed in any::<u64>(), k in 1usize..=5, d in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_mixture(&mut rng, k, d);
        let v = random_unit(&mut rng, d);
        let (centers, sds): (Vec<f64>, Vec<f64>) = (0..k)
            .map(|c| {
                let m: f64 = g.means()[c].iter().zip(&v).map(|(a, b)| a * b).sum();
                let s = DMatrix::from_row_slice(d, d, &g.covariance(c));
                let vv = nalgebra::DVector::from_column_slice(&v);
                (m, (vv.transpose() * s * &vv)[(0, 0)].sqrt())
            })
            .unzip();
        let sd_max = sds.iter().copied().fold(0.0, f64::max);
        let lo = centers.iter().copied().fold(f64::INFINITY, f64::min) - 10.0 * sd_max;
        let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 10.0 * sd_max;
        let n = 10_000;
        let step = (hi - lo) / n as f64;
        let mut integral = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            integral += w * g.proj_density(&v, lo + step * i as f64).unwrap();
        }
        integral *= step;
        prop_assert!((integral - 1.0).abs() < 1e-6, "integral {integral}");
    }

    #[test]
    fn projected_density_is_rotation_equivariant(seed in any::<u64>(), k in 1usize..=5, d in 1usize..=10, b in -6.0f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_mixture(&mut rng, k, d);
        let v = random_unit(&mut rng, d);
        let q = random_rotation(&mut rng, d);
        let gq = rotate(&g, &q);
        let qv: Vec<f64> = (&q * nalgebra::DVector::from_column_slice(&v)).iter().copied().collect();
        let a = g.proj_density(&v, b).unwrap();
        let r = gq.proj_density(&qv, b).unwrap();
        prop_assert!((a - r).abs() < 1e-12, "{a} vs {r}");
    }

    #[test]
    fn gradients_match_central_differences(seed in any::<u64>(), k in 1usize..=5, d in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_mixture(&mut rng, k, d);
        let v = random_unit(&mut rng, d);
        let m: f64 = g.means()[0].iter().zip(&v).map(|(a, b)| a * b).sum();
        let b = m + rng.sample::<f64, _>(StandardNormal);

        let grad = g.proj_density_grad_v(&v, b).unwrap();
        let h = 1e-5;
        let mut err = 0.0;
        for i in 0..d {
            let (mut vp, mut vm) = (v.clone(), v.clone());
            vp[i] += h;
            vm[i] -= h;
            let fd = (g.proj_density(&vp, b).unwrap() - g.proj_density(&vm, b).unwrap()) / (2.0 * h);
            err += (fd - grad[i]).powi(2);
        }
        let gnorm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(gnorm > 1e-8);
        prop_assert!(err.sqrt() / gnorm < 1e-5);

        let db = g.proj_density_db(&v, b).unwrap();
        let hb = 1e-6;
        let fd = (g.proj_density(&v, b + hb).unwrap() - g.proj_density(&v, b - hb).unwrap()) / (2.0 * hb);
        prop_assume!(db.abs() > 1e-8);
        prop_assert!((fd - db).abs() / db.abs() < 1e-5);
    }

    #[test]
    fn zero_penalty_objective_is_the_density(seed in any::<u64>(), b in -5.0f64..5.0, alpha in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_mixture(&mut rng, 3, 4);
        let v = random_unit(&mut rng, 4);
        prop_assert_eq!(g.objective(&v, b, 0.0, alpha).unwrap(), g.proj_density(&v, b).unwrap());
    }
}

#[test]
fn sample_mean_of_standard_normal() {
    let g = GaussianMixture::new(vec![1.0], vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0, 0.0, 1.0]]).unwrap();
    let xs = g.sample(100_000, 17);
    for j in 0..2 {
        let m = xs.iter().map(|x| x[j]).sum::<f64>() / xs.len() as f64;
        assert!(m.abs() < 0.02, "coordinate {j} mean {m}");
    }
    assert_eq!(xs, g.sample(100_000, 17));
}

#[test]
fn symmetric_mixture_is_stationary_at_the_midpoint() {
    let g = GaussianMixture::new(
        vec![0.5, 0.5],
        vec![vec![-3.0, 0.0], vec![3.0, 0.0]],
        vec![vec![1.0, 0.0, 0.0, 1.0]; 2],
    )
    .unwrap();
    let hp = Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap();
    let r = g.stationarity_residual(&hp, 10.0, 0.3).unwrap();
    assert!(r.grad_v_tangent_norm < 1e-15 && r.grad_b_abs < 1e-15);
    let phi3 = (-4.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
    assert!((g.proj_density(&[1.0, 0.0], 0.0).unwrap() - phi3).abs() < 1e-15);
}
