//! Adversarial training: losses, Adam, the critic/generator alternation and
//! the classical PCA-space baseline generator.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};

use crate::critic::{CriticParams, Dense, OutputHead};
use crate::error::{shape_err, QiglError, Result};
use crate::evaluation::{self, frechet_between};
use crate::features::{AssignmentMode, FeatureAssignment, PcaModel};
use crate::linalg::Matrix;
use crate::qcircuit::CircuitSpec;
use crate::qgenerator::{GeneratorEnsemble, NoiseVector};
use crate::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossMode {
    Wasserstein,
    Bce,
}

impl LossMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LossMode::Wasserstein => "wasserstein",
            LossMode::Bce => "bce",
        }
    }

    pub fn head(self) -> OutputHead {
        match self {
            LossMode::Wasserstein => OutputHead::Linear,
            LossMode::Bce => OutputHead::Sigmoid,
        }
    }
}

impl core::str::FromStr for LossMode {
    type Err = QiglError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wasserstein" => Ok(Self::Wasserstein),
            "bce" => Ok(Self::Bce),
            other => Err(QiglError::Argument(format!("unknown loss mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_generator: f64,
    pub lr_critic: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub clip_c: f64,
    pub critic_steps_per_gen_step: usize,
    pub loss_mode: LossMode,
    pub assignment_mode: AssignmentMode,
    pub he_enabled: bool,
    pub seed: u64,
    pub n_qubits: usize,
    pub depth: usize,
    pub n_subgens: usize,
    /// Generator angles start uniform in `[-r, r]`.
    pub generator_init_range: f64,
    /// Critic entries start uniform in `[-r, r]`.
    pub critic_init_range: f64,
    /// Generated samples used for the per-epoch Fréchet metric.
    pub eval_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            lr_generator: 0.3,
            lr_critic: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            clip_c: 0.01,
            critic_steps_per_gen_step: 5,
            loss_mode: LossMode::Wasserstein,
            assignment_mode: AssignmentMode::Balanced,
            he_enabled: false,
            seed: 0,
            n_qubits: 5,
            depth: 6,
            n_subgens: 8,
            generator_init_range: PI,
            critic_init_range: 0.1,
            eval_samples: 256,
        }
    }
}

impl TrainConfig {
    pub fn n_features(&self) -> usize {
        self.n_subgens * self.n_qubits
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QiglError::Argument(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.lr_generator > 0.0 && self.lr_generator.is_finite()) || !(self.lr_critic > 0.0 && self.lr_critic.is_finite()) {
            return bad(format!("learning rates must be positive, got {} / {}", self.lr_generator, self.lr_critic));
        }
        if !(0.0 < self.adam_beta1 && self.adam_beta1 < self.adam_beta2 && self.adam_beta2 < 1.0) {
            return bad(format!("need 0 < beta1 < beta2 < 1, got {} / {}", self.adam_beta1, self.adam_beta2));
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive".into());
        }
        if !(self.clip_c > 0.0 && self.clip_c.is_finite()) {
            return bad(format!("clip_c must be positive, got {}", self.clip_c));
        }
        if self.critic_steps_per_gen_step == 0 {
            return bad("critic_steps_per_gen_step must be at least 1".into());
        }
        if self.n_qubits == 0 || self.n_qubits > crate::qcircuit::MAX_QUBITS || self.depth == 0 || self.n_subgens == 0 {
            return bad("circuit shape (n_qubits, depth, n_subgens) must be positive".into());
        }
        if !(self.generator_init_range >= 0.0) || !(self.critic_init_range >= 0.0) {
            return bad("init ranges must be non-negative".into());
        }
        if self.eval_samples < 2 {
            return bad("eval_samples must be at least 2".into());
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamHyper {
        AdamHyper { lr, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps }
    }
}

fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(QiglError::Argument("empty score batch".into()));
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// `-mean(real) + mean(fake)`.
pub fn critic_loss(real_scores: &[f64], fake_scores: &[f64]) -> Result<f64> {
    Ok(-mean(real_scores)? + mean(fake_scores)?)
}

/// `-mean(fake)`.
pub fn generator_loss(fake_scores: &[f64]) -> Result<f64> {
    Ok(-mean(fake_scores)?)
}

pub const PROB_CLAMP: f64 = 1e-7;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Cross-entropy critic loss and non-saturating generator loss.
pub fn bce_losses(real_probs: &[f64], fake_probs: &[f64]) -> Result<(f64, f64)> {
    let ln = libm::log;
    let real_term = mean(&real_probs.iter().map(|&p| ln(clamp_prob(p))).collect::<Vec<_>>())?;
    let fake_term = mean(&fake_probs.iter().map(|&p| ln(1.0 - clamp_prob(p))).collect::<Vec<_>>())?;
    let gen = mean(&fake_probs.iter().map(|&p| ln(clamp_prob(p))).collect::<Vec<_>>())?;
    Ok((-real_term - fake_term, -gen))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Moment estimates per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(shapes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = shapes.into_iter().map(|n| (vec![0.0; n], vec![0.0; n])).unzip();
        Self { m, v, step: 0 }
    }

    pub fn for_tensors(tensors: &[&[f64]]) -> Self {
        Self::new(tensors.iter().map(|t| t.len()))
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], hp: &AdamHyper) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(shape_err(format!(
                "Adam state has {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(shape_err(format!("tensor {i}: Adam moments do not match parameter/gradient length")));
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - libm::pow(hp.beta1, t);
        let bc2 = 1.0 - libm::pow(hp.beta2, t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
                *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= hp.lr * m_hat / (libm::sqrt(v_hat) + hp.eps);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState, hp: &AdamHyper) -> Result<()> {
    state.step(params, grads, hp)
}

/// Critic loss and its parameter gradient for one real/fake batch.
pub fn critic_gradient(critic: &CriticParams, real: &Matrix, fake: &Matrix, mode: LossMode) -> Result<(f64, CriticParams)> {
    let real_scores = critic.forward(real)?;
    let fake_scores = critic.forward(fake)?;
    let (nr, nf) = (real_scores.len() as f64, fake_scores.len() as f64);
    let (loss, up_real, up_fake): (f64, Vec<f64>, Vec<f64>) = match mode {
        LossMode::Wasserstein => (
            critic_loss(&real_scores, &fake_scores)?,
            vec![-1.0 / nr; real_scores.len()],
            vec![1.0 / nf; fake_scores.len()],
        ),
        LossMode::Bce => {
            let (ld, _) = bce_losses(&real_scores, &fake_scores)?;
            (
                ld,
                real_scores.iter().map(|&p| -1.0 / (nr * clamp_prob(p))).collect(),
                fake_scores.iter().map(|&p| 1.0 / (nf * (1.0 - clamp_prob(p)))).collect(),
            )
        }
    };
    let (mut grads, _) = critic.backward(real, &up_real)?;
    let (gf, _) = critic.backward(fake, &up_fake)?;
    for (a, b) in grads.tensors_mut().into_iter().zip(gf.tensors()) {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    }
    Ok((loss, grads))
}

/// Generator loss for fixed noise and its gradient with respect to every
/// generator angle: critic input-gradient chained through the
/// parameter-shift Jacobian (and the `(m + 1) / 2` input map).
pub fn generator_gradient(
    ensemble: &GeneratorEnsemble,
    critic: &CriticParams,
    noise: &[NoiseVector],
    mode: LossMode,
) -> Result<(f64, Vec<f64>)> {
    let mut fake = ensemble.forward_batch(noise)?;
    evaluation::expectations_to_scaled(&mut fake);
    let scores = critic.forward(&fake)?;
    let n = scores.len() as f64;
    let (loss, upstream): (f64, Vec<f64>) = match mode {
        LossMode::Wasserstein => (generator_loss(&scores)?, vec![-1.0 / n; scores.len()]),
        LossMode::Bce => {
            let (_, lg) = bce_losses(&scores, &scores)?;
            (lg, scores.iter().map(|&p| -1.0 / (n * clamp_prob(p))).collect())
        }
    };
    let (_, dx) = critic.backward(&fake, &upstream)?;
    let mut grad = vec![0.0; ensemble.param_count()];
    for (z, row) in noise.iter().zip(dx.row_iter()) {
        let dm: Vec<f64> = row.iter().map(|d| 0.5 * d).collect();
        for (g, p) in grad.iter_mut().zip(ensemble.pullback(z, &dm)?) {
            *g += p;
        }
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub critic_loss: f64,
    pub generator_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub frechet: f64,
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub config: TrainConfig,
    pub ensemble: GeneratorEnsemble,
    pub critic: CriticParams,
    pub pca: PcaModel,
    pub generator_adam: AdamState,
    pub critic_adam: AdamState,
    pub rng: Rng,
    /// Completed epochs.
    pub epoch: u64,
    /// Fréchet distance before any update.
    pub initial_frechet: f64,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    /// Fresh models drawn from `config.seed`.
    pub fn initialize(config: TrainConfig, pca: PcaModel, real_scaled: &Matrix) -> Result<Self> {
        config.validate()?;
        let n_features = config.n_features();
        if pca.n_components() != n_features || real_scaled.cols() != n_features {
            return Err(shape_err(format!(
                "{} sub-generators x {} qubits need {n_features} PCA components, model has {} and data {}",
                config.n_subgens,
                config.n_qubits,
                pca.n_components(),
                real_scaled.cols()
            )));
        }
        let mut rng = Rng::seed_from_u64(config.seed);
        let spec = CircuitSpec::linear(config.n_qubits, config.depth)?;
        let assignment = FeatureAssignment::new(config.assignment_mode, n_features, config.n_subgens, config.n_qubits)?;
        let ensemble = GeneratorEnsemble::random(spec, assignment, config.generator_init_range, &mut rng)?;
        let critic = CriticParams::random(
            &[n_features, crate::critic::DEFAULT_LAYERS[1], crate::critic::DEFAULT_LAYERS[2], 1],
            config.loss_mode.head(),
            config.critic_init_range,
            &mut rng,
        )?;
        let generator_adam = AdamState::new(ensemble.sub_generators().iter().map(|s| s.weights().len()));
        let critic_adam = AdamState::for_tensors(&critic.tensors());
        let mut state = Self {
            config,
            ensemble,
            critic,
            pca,
            generator_adam,
            critic_adam,
            rng,
            epoch: 0,
            initial_frechet: 0.0,
            history: Vec::new(),
        };
        state.initial_frechet = state.frechet(real_scaled)?;
        Ok(state)
    }

    /// Fréchet distance in scaled PCA space between `real_scaled` and
    /// `config.eval_samples` generated vectors. Uses a dedicated RNG so the
    /// training stream is untouched and every call sees the same noise.
    pub fn frechet(&self, real_scaled: &Matrix) -> Result<f64> {
        let mut rng = Rng::seed_from_u64(eval_seed(self.config.seed));
        let fake = evaluation::generate_scaled(&self.ensemble, self.config.eval_samples, &mut rng)?;
        frechet_between(real_scaled, &fake)
    }

    /// `critic_steps_per_gen_step` critic updates followed by one generator
    /// update, all against the same real batch.
    pub fn train_step(&mut self, real_batch: &Matrix) -> Result<StepRecord> {
        let b = real_batch.rows();
        if b == 0 {
            return Err(QiglError::Argument("empty real batch".into()));
        }
        let mode = self.config.loss_mode;
        let critic_hp = self.config.adam(self.config.lr_critic);
        let mut ld = 0.0;
        for _ in 0..self.config.critic_steps_per_gen_step {
            let noise = self.ensemble.sample_noise(b, &mut self.rng);
            let mut fake = self.ensemble.forward_batch(&noise)?;
            evaluation::expectations_to_scaled(&mut fake);
            let (loss, grads) = critic_gradient(&self.critic, real_batch, &fake, mode)?;
            ld = loss;
            self.check_finite(ld, f64::NAN, &grads.tensors())?;
            self.critic_adam.step(&mut self.critic.tensors_mut(), &grads.tensors(), &critic_hp)?;
            if mode == LossMode::Wasserstein {
                self.critic.clip_weights(self.config.clip_c)?;
            }
        }
        let noise = self.ensemble.sample_noise(b, &mut self.rng);
        let (lg, grad) = generator_gradient(&self.ensemble, &self.critic, &noise, mode)?;
        self.check_finite(ld, lg, &[&grad])?;
        let per_sub = self.ensemble.spec().param_count();
        let grads: Vec<&[f64]> = grad.chunks_exact(per_sub).collect();
        let hp = self.config.adam(self.config.lr_generator);
        self.generator_adam.step(&mut self.ensemble.param_slices_mut(), &grads, &hp)?;
        Ok(StepRecord { critic_loss: ld, generator_loss: lg })
    }

    fn check_finite(&self, ld: f64, lg: f64, grads: &[&[f64]]) -> Result<()> {
        let grads_ok = grads.iter().all(|g| g.iter().all(|x| x.is_finite()));
        if ld.is_nan() || lg.is_infinite() || ld.is_infinite() || !grads_ok {
            return Err(QiglError::Divergence(format!(
                "epoch {}: L_D={ld}, L_G={lg}, finite gradients={grads_ok}, critic max |w|={}, generator adam step={}",
                self.epoch,
                self.critic.max_abs_entry(),
                self.generator_adam.step
            )));
        }
        Ok(())
    }

    /// One pass of shuffled mini-batches over `real_scaled`.
    pub fn run_epoch(&mut self, real_scaled: &Matrix) -> Result<EpochRecord> {
        let n = real_scaled.rows();
        if n == 0 {
            return Err(QiglError::Argument("no real samples to train on".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        let (mut ld, mut lg, mut steps) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(self.config.batch_size) {
            let rec = self.train_step(&real_scaled.select_rows(chunk))?;
            ld += rec.critic_loss;
            lg += rec.generator_loss;
            steps += 1;
        }
        self.epoch += 1;
        let record = EpochRecord {
            epoch: self.epoch,
            critic_loss: ld / steps as f64,
            generator_loss: lg / steps as f64,
            frechet: self.frechet(real_scaled)?,
        };
        self.history.push(record);
        Ok(record)
    }

    /// Generator updates performed so far.
    pub fn generator_steps(&self) -> u64 {
        self.generator_adam.step
    }
}

/// Seed of the evaluation noise stream derived from the run seed.
pub fn eval_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Runs `config.epochs - state.epoch` further epochs, calling `on_epoch`
/// after each.
pub fn train(
    state: &mut TrainState,
    real_scaled: &Matrix,
    mut on_epoch: impl FnMut(&TrainState, &EpochRecord) -> Result<()>,
) -> Result<()> {
    while state.epoch < state.config.epochs as u64 {
        let record = state.run_epoch(real_scaled)?;
        on_epoch(state, &record)?;
    }
    Ok(())
}

pub const BASELINE_LATENT: usize = 100;
pub const BASELINE_HIDDEN: usize = 1024;
pub const LEAKY_SLOPE: f64 = 0.2;

/// Classical generator over PCA space: `latent -> 1024 (LeakyReLU) -> features (tanh)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineGeneratorParams {
    pub hidden: Dense,
    pub output: Dense,
}

impl BaselineGeneratorParams {
    pub fn zeros(latent: usize, hidden: usize, features: usize) -> Self {
        Self { hidden: Dense::zeros(latent, hidden), output: Dense::zeros(hidden, features) }
    }

    /// Weights uniform in `+-1/sqrt(fan_in)`.
    pub fn random(latent: usize, hidden: usize, features: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(latent, hidden, features);
        for layer in [&mut p.hidden, &mut p.output] {
            let bound = 1.0 / libm::sqrt(layer.in_dim as f64);
            for x in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *x = bound * (2.0 * rng.gen::<f64>() - 1.0);
            }
        }
        p
    }

    pub fn param_count(&self) -> usize {
        self.hidden.param_count() + self.output.param_count()
    }

    pub fn forward(&self, latent: &Matrix) -> Result<Matrix> {
        baseline_forward(self, latent)
    }
}

pub fn baseline_forward(params: &BaselineGeneratorParams, latent: &Matrix) -> Result<Matrix> {
    if latent.cols() != params.hidden.in_dim {
        return Err(shape_err(format!("latent width {} but the baseline expects {}", latent.cols(), params.hidden.in_dim)));
    }
    let mut out = Matrix::zeros(latent.rows(), params.output.out_dim);
    for (i, z) in latent.row_iter().enumerate() {
        let h: Vec<f64> = params
            .hidden
            .weights
            .chunks_exact(params.hidden.in_dim)
            .zip(&params.hidden.bias)
            .map(|(w, b)| {
                let a = b + crate::linalg::dot(w, z);
                if a >= 0.0 { a } else { LEAKY_SLOPE * a }
            })
            .collect();
        for (o, (w, b)) in out.row_mut(i).iter_mut().zip(params.output.weights.chunks_exact(params.output.in_dim).zip(&params.output.bias)) {
            *o = libm::tanh(b + crate::linalg::dot(w, &h));
        }
    }
    Ok(out)
}
