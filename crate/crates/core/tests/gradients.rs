use qigl_core::critic::{CriticParams, OutputHead};
use qigl_core::features::{AssignmentMode, FeatureAssignment};
use qigl_core::qcircuit::CircuitSpec;
use qigl_core::qgenerator::GeneratorEnsemble;
use qigl_core::training::{critic_gradient, generator_gradient, generator_loss, bce_losses, LossMode};
use qigl_core::evaluation::expectations_to_scaled;
use qigl_core::{Matrix, Rng};
use rand::{Rng as _, SeedableRng};

fn ensemble(n_subgens: usize, mode: AssignmentMode, rng: &mut Rng) -> GeneratorEnsemble {
    let spec = CircuitSpec::linear(5, 6).unwrap();
    let assignment = FeatureAssignment::new(mode, 5 * n_subgens, n_subgens, 5).unwrap();
    GeneratorEnsemble::random(spec, assignment, std::f64::consts::PI, rng).unwrap()
}

#[test]
fn parameter_shift_matches_central_differences() {
    let mut rng = Rng::seed_from_u64(11);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let ens = ensemble(1, AssignmentMode::Conventional, &mut rng);
        let noise = ens.sample_noise(1, &mut rng).pop().unwrap();
        let jac = ens.parameter_shift_jacobian(&noise).unwrap();
        let base = ens.flat_params();
        for p in 0..base.len() {
            let mut probe = ens.clone();
            let mut w = base.clone();
            w[p] += h;
            probe.set_flat_params(&w).unwrap();
            let plus = probe.forward(&noise).unwrap();
            w[p] -= 2.0 * h;
            probe.set_flat_params(&w).unwrap();
            let minus = probe.forward(&noise).unwrap();
            for f in 0..5 {
                let fd = (plus[f] - minus[f]) / (2.0 * h);
                worst = worst.max((fd - jac[(f, p)]).abs());
            }
        }
    }
    assert!(worst <= 1e-6, "max abs error {worst:e}");
}

#[test]
fn pullback_equals_transposed_jacobian_product() {
    let mut rng = Rng::seed_from_u64(5);
    let ens = ensemble(8, AssignmentMode::Balanced, &mut rng);
    let noise = ens.sample_noise(1, &mut rng).pop().unwrap();
    let up: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let jac = ens.parameter_shift_jacobian(&noise).unwrap();
    let pulled = ens.pullback(&noise, &up).unwrap();
    for (p, &g) in pulled.iter().enumerate() {
        let dense: f64 = (0..40).map(|f| jac[(f, p)] * up[f]).sum();
        assert!((dense - g).abs() < 1e-12);
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

#[test]
fn critic_backward_matches_finite_differences() {
    let mut rng = Rng::seed_from_u64(21);
    for head in [OutputHead::Linear, OutputHead::Sigmoid] {
        let critic = CriticParams::random(&[6, 8, 4, 1], head, 0.8, &mut rng).unwrap();
        let x = random_matrix(3, 6, &mut rng);
        let up = [0.7, -1.3, 0.4];
        let objective = |c: &CriticParams, x: &Matrix| -> f64 {
            c.forward(x).unwrap().iter().zip(&up).map(|(s, u)| s * u).sum()
        };
        let (grads, dx) = critic.backward(&x, &up).unwrap();
        let h = 1e-6;
        let check = |analytic: f64, fd: f64| {
            let scale = analytic.abs().max(fd.abs()).max(1e-3);
            assert!((analytic - fd).abs() / scale < 1e-6, "{analytic} vs {fd}");
        };
        for t in 0..critic.tensors().len() {
            for i in 0..critic.tensors()[t].len() {
                let mut c = critic.clone();
                c.tensors_mut()[t][i] += h;
                let plus = objective(&c, &x);
                c.tensors_mut()[t][i] -= 2.0 * h;
                let minus = objective(&c, &x);
                check(grads.tensors()[t][i], (plus - minus) / (2.0 * h));
            }
        }
        for b in 0..3 {
            for j in 0..6 {
                let mut xp = x.clone();
                xp.row_mut(b)[j] += h;
                let plus = objective(&critic, &xp);
                xp.row_mut(b)[j] -= 2.0 * h;
                let minus = objective(&critic, &xp);
                check(dx[(b, j)], (plus - minus) / (2.0 * h));
            }
        }
    }
}

#[test]
fn critic_loss_gradient_matches_finite_differences() {
    let mut rng = Rng::seed_from_u64(8);
    for mode in [LossMode::Wasserstein, LossMode::Bce] {
        let critic = CriticParams::random(&[5, 7, 3, 1], mode.head(), 0.7, &mut rng).unwrap();
        let real = random_matrix(4, 5, &mut rng);
        let fake = random_matrix(4, 5, &mut rng);
        let (_, grads) = critic_gradient(&critic, &real, &fake, mode).unwrap();
        let loss = |c: &CriticParams| critic_gradient(c, &real, &fake, mode).unwrap().0;
        let h = 1e-6;
        for t in 0..critic.tensors().len() {
            for i in 0..critic.tensors()[t].len() {
                let mut c = critic.clone();
                c.tensors_mut()[t][i] += h;
                let plus = loss(&c);
                c.tensors_mut()[t][i] -= 2.0 * h;
                let fd = (plus - loss(&c)) / (2.0 * h);
                assert!((fd - grads.tensors()[t][i]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn generator_gradient_through_critic_matches_finite_differences() {
    let mut rng = Rng::seed_from_u64(3);
    for mode in [LossMode::Wasserstein, LossMode::Bce] {
        let ens = ensemble(1, AssignmentMode::Balanced, &mut rng);
        let critic = CriticParams::random(&[5, 12, 6, 1], mode.head(), 0.9, &mut rng).unwrap();
        let noise = ens.sample_noise(4, &mut rng);
        let loss_at = |params: &[f64]| -> f64 {
            let mut e = ens.clone();
            e.set_flat_params(params).unwrap();
            let mut fake = e.forward_batch(&noise).unwrap();
            expectations_to_scaled(&mut fake);
            let scores = critic.forward(&fake).unwrap();
            match mode {
                LossMode::Wasserstein => generator_loss(&scores).unwrap(),
                LossMode::Bce => bce_losses(&scores, &scores).unwrap().1,
            }
        };
        let (loss, grad) = generator_gradient(&ens, &critic, &noise, mode).unwrap();
        let base = ens.flat_params();
        assert!((loss - loss_at(&base)).abs() < 1e-14);
        let h = 1e-5;
        for p in 0..base.len() {
            let mut w = base.clone();
            w[p] += h;
            let plus = loss_at(&w);
            w[p] -= 2.0 * h;
            let fd = (plus - loss_at(&w)) / (2.0 * h);
            assert!((fd - grad[p]).abs() <= 1e-5, "param {p}: {fd} vs {}", grad[p]);
        }
    }
}
