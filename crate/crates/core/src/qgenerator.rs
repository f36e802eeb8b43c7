//! The quantum generator: independent sub-generator circuits whose Pauli-X
//! readouts, reordered through a [`FeatureAssignment`], form one feature
//! vector in PCA component order.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use rand::Rng as _;

use crate::error::{shape_err, QiglError, Result};
use crate::features::FeatureAssignment;
use crate::linalg::Matrix;
use crate::qcircuit::CircuitSpec;
use crate::Rng;

/// Trainable RY angles of one sub-generator, flattened layer-major
/// (`depth x n_qubits`).
#[derive(Debug, Clone, PartialEq)]
pub struct SubGeneratorParams {
    weights: Vec<f64>,
}

impl SubGeneratorParams {
    pub fn new(spec: &CircuitSpec, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != spec.param_count() {
            return Err(shape_err(format!(
                "{} weights for a {}x{} circuit",
                weights.len(),
                spec.depth(),
                spec.n_qubits()
            )));
        }
        crate::linalg::check_finite(&weights, "sub-generator weights")?;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

/// Per sub-generator noise angles, flattened sub-generator-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector {
    values: Vec<f64>,
    n_qubits: usize,
}

impl NoiseVector {
    pub fn new(values: Vec<f64>, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || values.len() % n_qubits != 0 {
            return Err(shape_err(format!("{} noise values do not split into {n_qubits}-qubit blocks", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=FRAC_PI_2).contains(*v)) {
            return Err(QiglError::Argument(format!("noise value {v} outside [0, pi/2]")));
        }
        Ok(Self { values, n_qubits })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Noise for sub-generator `g`.
    pub fn block(&self, g: usize) -> &[f64] {
        &self.values[g * self.n_qubits..(g + 1) * self.n_qubits]
    }

    pub fn n_subgens(&self) -> usize {
        self.values.len() / self.n_qubits
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorEnsemble {
    spec: CircuitSpec,
    sub_generators: Vec<SubGeneratorParams>,
    assignment: FeatureAssignment,
}

impl GeneratorEnsemble {
    pub fn new(spec: CircuitSpec, sub_generators: Vec<SubGeneratorParams>, assignment: FeatureAssignment) -> Result<Self> {
        if assignment.n_qubits() != spec.n_qubits() || assignment.n_subgens() != sub_generators.len() {
            return Err(shape_err(format!(
                "assignment is {}x{} but the ensemble has {} sub-generators of {} qubits",
                assignment.n_subgens(),
                assignment.n_qubits(),
                sub_generators.len(),
                spec.n_qubits()
            )));
        }
        for s in &sub_generators {
            if s.weights.len() != spec.param_count() {
                return Err(shape_err("sub-generator weight grid does not match the circuit"));
            }
        }
        Ok(Self { spec, sub_generators, assignment })
    }

    /// Weights drawn uniformly from `[-init_range, init_range]`.
    pub fn random(spec: CircuitSpec, assignment: FeatureAssignment, init_range: f64, rng: &mut Rng) -> Result<Self> {
        let count = assignment.n_subgens();
        let subs = (0..count)
            .map(|_| {
                let w = (0..spec.param_count())
                    .map(|_| init_range * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect();
                SubGeneratorParams { weights: w }
            })
            .collect();
        Self::new(spec, subs, assignment)
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn assignment(&self) -> &FeatureAssignment {
        &self.assignment
    }

    pub fn sub_generators(&self) -> &[SubGeneratorParams] {
        &self.sub_generators
    }

    pub fn n_subgens(&self) -> usize {
        self.sub_generators.len()
    }

    pub fn n_features(&self) -> usize {
        self.assignment.n_features()
    }

    /// sub-generators x depth x qubits.
    pub fn param_count(&self) -> usize {
        self.sub_generators.len() * self.spec.param_count()
    }

    /// All parameters, sub-generator-major.
    pub fn flat_params(&self) -> Vec<f64> {
        self.sub_generators.iter().flat_map(|s| s.weights.iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(shape_err(format!("{} parameters for an ensemble of {}", params.len(), self.param_count())));
        }
        for (s, chunk) in self.sub_generators.iter_mut().zip(params.chunks_exact(self.spec.param_count())) {
            s.weights.copy_from_slice(chunk);
        }
        Ok(())
    }

    /// Mutable view of every parameter, one slice per sub-generator.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.sub_generators.iter_mut().map(|s| s.weights.as_mut_slice()).collect()
    }

    /// Uniform `[0, pi/2]` noise for every sub-generator and qubit.
    pub fn sample_noise(&self, batch: usize, rng: &mut Rng) -> Vec<NoiseVector> {
        let width = self.n_features();
        (0..batch)
            .map(|_| NoiseVector {
                values: (0..width).map(|_| FRAC_PI_2 * rng.gen::<f64>()).collect(),
                n_qubits: self.spec.n_qubits(),
            })
            .collect()
    }

    fn check_noise(&self, noise: &NoiseVector) -> Result<()> {
        if noise.n_qubits != self.spec.n_qubits() || noise.n_subgens() != self.n_subgens() {
            return Err(shape_err(format!(
                "noise has {} blocks of {}, ensemble needs {} of {}",
                noise.n_subgens(),
                noise.n_qubits,
                self.n_subgens(),
                self.spec.n_qubits()
            )));
        }
        Ok(())
    }

    fn run_sub(&self, g: usize, noise: &NoiseVector, weights: &[f64]) -> Result<Vec<f64>> {
        let encoding: Vec<(f64, f64)> = noise.block(g).iter().map(|&z| (z, z)).collect();
        self.spec.run(&encoding, weights)
    }

    /// Raw concatenated expectations, sub-generator-major.
    pub fn forward_raw(&self, noise: &NoiseVector) -> Result<Vec<f64>> {
        self.check_noise(noise)?;
        let mut raw = Vec::with_capacity(self.n_features());
        for (g, sub) in self.sub_generators.iter().enumerate() {
            raw.extend(self.run_sub(g, noise, &sub.weights)?);
        }
        Ok(raw)
    }

    /// Expectations in PCA component order, each in `[-1, 1]`.
    pub fn forward(&self, noise: &NoiseVector) -> Result<Vec<f64>> {
        let raw = self.forward_raw(noise)?;
        self.assignment.to_pca_order(&raw)
    }

    pub fn forward_batch(&self, noise: &[NoiseVector]) -> Result<Matrix> {
        let rows = noise.iter().map(|z| self.forward(z)).collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, self.n_features()));
        }
        Matrix::from_rows(&rows)
    }

    /// `d raw_q / d w_p` for one sub-generator: `param_count x n_qubits`,
    /// by the parameter-shift rule.
    fn sub_jacobian(&self, g: usize, noise: &NoiseVector) -> Result<Vec<Vec<f64>>> {
        let base = &self.sub_generators[g].weights;
        let shifted = |p: usize| -> Result<Vec<f64>> {
            let mut w = base.clone();
            w[p] = base[p] + FRAC_PI_2;
            let plus = self.run_sub(g, noise, &w)?;
            w[p] = base[p] - FRAC_PI_2;
            let minus = self.run_sub(g, noise, &w)?;
            Ok(plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a - b)).collect())
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..base.len()).into_par_iter().map(shifted).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..base.len()).map(shifted).collect()
        }
    }

    /// Dense `n_features x param_count` Jacobian of [`forward`](Self::forward).
    /// Rows follow PCA order; columns are sub-generator-major.
    pub fn parameter_shift_jacobian(&self, noise: &NoiseVector) -> Result<Matrix> {
        self.check_noise(noise)?;
        let per_sub = self.spec.param_count();
        let mut jac = Matrix::zeros(self.n_features(), self.param_count());
        for (g, subset) in self.assignment.subsets().iter().enumerate() {
            let block = self.sub_jacobian(g, noise)?;
            for (p, grads) in block.iter().enumerate() {
                for (&f, &d) in subset.iter().zip(grads) {
                    jac[(f, g * per_sub + p)] = d;
                }
            }
        }
        Ok(jac)
    }

    /// `J^T upstream`, where `upstream` is indexed in PCA order. Same result
    /// as multiplying with the dense Jacobian without materializing it.
    pub fn pullback(&self, noise: &NoiseVector, upstream: &[f64]) -> Result<Vec<f64>> {
        self.check_noise(noise)?;
        if upstream.len() != self.n_features() {
            return Err(shape_err(format!("upstream has {} entries, expected {}", upstream.len(), self.n_features())));
        }
        let mut grad = Vec::with_capacity(self.param_count());
        for (g, subset) in self.assignment.subsets().iter().enumerate() {
            let block = self.sub_jacobian(g, noise)?;
            grad.extend(block.iter().map(|grads| subset.iter().zip(grads).map(|(&f, d)| upstream[f] * d).sum::<f64>()));
        }
        Ok(grad)
    }

    /// Wraps every angle into `(-pi, pi]`. Expectations are unchanged since
    /// each RY is 2*pi-periodic up to a global sign that cancels in `<X>`.
    pub fn wrap_angles(&mut self) {
        for s in &mut self.sub_generators {
            for w in &mut s.weights {
                *w = wrap_angle(*w);
            }
        }
    }
}

fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = x - two_pi * libm::floor((x + PI) / two_pi);
    if r <= -PI { r + two_pi } else { r }
}

/// Free-function form of [`GeneratorEnsemble::param_count`].
pub fn generator_param_count(ensemble: &GeneratorEnsemble) -> usize {
    ensemble.param_count()
}
