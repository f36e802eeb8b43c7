use proptest::prelude::*;
use qigl_core::evaluation::{fit_gaussian, frechet_between, frechet_distance, matrix_sqrt_psd, GaussianFit};
use qigl_core::{Matrix, Rng};
use rand::{Rng as _, SeedableRng};

fn random_spd(d: usize, rng: &mut Rng) -> Matrix {
    let a = Matrix::from_vec(d, d, (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let mut s = a.matmul(&a.transpose()).unwrap();
    for i in 0..d {
        s[(i, i)] += 0.1;
    }
    s
}

fn gaussian_samples(n: usize, mean: &[f64], sd: &[f64], rng: &mut Rng) -> Matrix {
    let mut data = Vec::with_capacity(n * mean.len());
    for _ in 0..n {
        for (m, s) in mean.iter().zip(sd) {
            // Box-Muller.
            let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(1e-300), rng.gen());
            data.push(m + s * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos());
        }
    }
    Matrix::from_vec(n, mean.len(), data).unwrap()
}

#[test]
fn sqrt_reconstructs_random_spd_matrices() {
    let mut rng = Rng::seed_from_u64(17);
    for d in [2, 5, 10, 40] {
        let s = random_spd(d, &mut rng);
        let r = matrix_sqrt_psd(&s).unwrap();
        let rr = r.matmul(&r).unwrap();
        let diff = Matrix::from_vec(d, d, rr.as_slice().iter().zip(s.as_slice()).map(|(a, b)| a - b).collect()).unwrap();
        assert!(diff.frobenius_norm() / s.frobenius_norm() <= 1e-8);
    }
}

#[test]
fn identical_fits_are_at_distance_zero() {
    let mut rng = Rng::seed_from_u64(2);
    let x = gaussian_samples(200, &[0.5, 0.2, 0.1], &[0.1, 0.3, 0.05], &mut rng);
    assert!(frechet_between(&x, &x).unwrap() <= 1e-10);
}

#[test]
fn monte_carlo_fit_recovers_parameters() {
    let mut rng = Rng::seed_from_u64(6);
    let mean = [1.0, -2.0, 0.5];
    let sd = [1.0, 0.5, 2.0];
    let fit = fit_gaussian(&gaussian_samples(1000, &mean, &sd, &mut rng)).unwrap();
    for i in 0..3 {
        assert!((fit.mean[i] - mean[i]).abs() < 0.15);
        assert!((fit.covariance[(i, i)].sqrt() - sd[i]).abs() < 0.15);
    }
}

#[test]
fn shifted_population_is_farther_than_a_resample() {
    let mut rng = Rng::seed_from_u64(12);
    let a = gaussian_samples(500, &[0.0, 0.0], &[1.0, 1.0], &mut rng);
    let b = gaussian_samples(500, &[0.0, 0.0], &[1.0, 1.0], &mut rng);
    let c = gaussian_samples(500, &[1.0, 0.0], &[1.0, 1.0], &mut rng);
    assert!(frechet_between(&a, &b).unwrap() < frechet_between(&a, &c).unwrap());
}

fn fit_from(mean: Vec<f64>, cov: Matrix) -> GaussianFit {
    GaussianFit { mean, covariance: cov, sample_count: 10 }
}

proptest! {
    // The 1e-10 diagonal ridge shifts the 1D value by
    // ridge * (2 - (v1 + v2) / sqrt(v1 v2)), which stays below 1e-9 while
    // both variances are at least 0.1 and at most 4.
    #[test]
    fn one_dimensional_closed_form(m1 in -3.0..3.0f64, m2 in -3.0..3.0f64, v1 in 0.1..4.0f64, v2 in 0.1..4.0f64) {
        let d = frechet_distance(
            &fit_from(vec![m1], Matrix::from_diag(&[v1])),
            &fit_from(vec![m2], Matrix::from_diag(&[v2])),
        ).unwrap();
        let expect = (m1 - m2).powi(2) + (v1.sqrt() - v2.sqrt()).powi(2);
        prop_assert!((d - expect).abs() <= 1e-9);
    }

    #[test]
    fn distance_is_symmetric(seed in 0u64..1000) {
        let mut rng = Rng::seed_from_u64(seed);
        let a = fit_from((0..4).map(|_| rng.gen()).collect(), random_spd(4, &mut rng));
        let b = fit_from((0..4).map(|_| rng.gen()).collect(), random_spd(4, &mut rng));
        let (ab, ba) = (frechet_distance(&a, &b).unwrap(), frechet_distance(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab));
    }
}
