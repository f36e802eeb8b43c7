//! Fully connected critic `in -> 64 -> 16 -> 1` with ReLU hidden layers,
//! hand-written backpropagation and weight clipping.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{shape_err, QiglError, Result};
use crate::linalg::Matrix;
use crate::Rng;

pub const DEFAULT_LAYERS: [usize; 4] = [40, 64, 16, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputHead {
    /// Raw score, used by the Wasserstein objective.
    Linear,
    /// Probability, used by the cross-entropy ablation.
    Sigmoid,
}

/// Dense layer, weights stored `out x in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weights: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.in_dim)
                .zip(&self.bias)
                .map(|(w, b)| b + crate::linalg::dot(w, x)),
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticParams {
    pub layers: Vec<Dense>,
    pub head: OutputHead,
}

impl CriticParams {
    /// All-zero network with the given layer widths (input first, 1 last).
    pub fn zeros(widths: &[usize], head: OutputHead) -> Result<Self> {
        if widths.len() < 2 || widths.last() != Some(&1) || widths.contains(&0) {
            return Err(shape_err(format!("invalid critic widths {widths:?}")));
        }
        let layers = widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self { layers, head })
    }

    /// `input_dim -> 64 -> 16 -> 1`.
    pub fn default_shape(input_dim: usize, head: OutputHead) -> Result<Self> {
        Self::zeros(&[input_dim, DEFAULT_LAYERS[1], DEFAULT_LAYERS[2], 1], head)
    }

    /// Every entry uniform in `[-init_range, init_range]`.
    pub fn random(widths: &[usize], head: OutputHead, init_range: f64, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(widths, head)?;
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|x| *x = init_range * (2.0 * rng.gen::<f64>() - 1.0));
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn widths(&self) -> Vec<usize> {
        core::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.out_dim)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Weight and bias tensors, layer by layer.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Clamps every weight and bias into `[-c, c]`.
    pub fn clip_weights(&mut self, c: f64) -> Result<()> {
        if !(c > 0.0) {
            return Err(QiglError::Argument(format!("clip bound must be positive, got {c}")));
        }
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = x.clamp(-c, c));
        }
        Ok(())
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).fold(0.0, |m, x| m.max(x.abs()))
    }

    fn check_input(&self, features: &Matrix) -> Result<()> {
        if features.cols() != self.input_dim() {
            return Err(shape_err(format!(
                "critic expects {} input features, got {}",
                self.input_dim(),
                features.cols()
            )));
        }
        Ok(())
    }

    /// Pre-activations of every layer for one sample.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.apply(&act, &mut z);
            if i < last {
                act = z.iter().map(|&v| relu(v)).collect();
            }
            pre.push(z);
        }
        pre
    }

    fn head_out(&self, z: f64) -> f64 {
        match self.head {
            OutputHead::Linear => z,
            OutputHead::Sigmoid => sigmoid(z),
        }
    }

    pub fn forward(&self, features: &Matrix) -> Result<Vec<f64>> {
        self.check_input(features)?;
        Ok(features
            .row_iter()
            .map(|x| self.head_out(self.trace(x).last().expect("at least one layer")[0]))
            .collect())
    }

    /// Reverse-mode gradients for `sum_b upstream[b] * score_b`. Returns the
    /// parameter gradient (same shapes as `self`) and the `batch x input_dim`
    /// gradient with respect to the input features. ReLU'(0) is taken as 0.
    pub fn backward(&self, features: &Matrix, upstream: &[f64]) -> Result<(CriticParams, Matrix)> {
        self.check_input(features)?;
        if upstream.len() != features.rows() {
            return Err(shape_err(format!(
                "{} upstream gradients for a batch of {}",
                upstream.len(),
                features.rows()
            )));
        }
        let mut grads = CriticParams { layers: self.layers.iter().map(|l| Dense::zeros(l.in_dim, l.out_dim)).collect(), head: self.head };
        let mut input_grads = Matrix::zeros(features.rows(), self.input_dim());
        let last = self.layers.len() - 1;

        for (b, (x, &up)) in features.row_iter().zip(upstream).enumerate() {
            let pre = self.trace(x);
            let out = pre[last][0];
            let mut delta = vec![match self.head {
                OutputHead::Linear => up,
                OutputHead::Sigmoid => {
                    let s = sigmoid(out);
                    up * s * (1.0 - s)
                }
            }];
            for i in (0..=last).rev() {
                let layer = &self.layers[i];
                let g = &mut grads.layers[i];
                let input: Vec<f64> = if i == 0 { x.to_vec() } else { pre[i - 1].iter().map(|&v| relu(v)).collect() };
                for (o, &d) in delta.iter().enumerate() {
                    g.bias[o] += d;
                    if d != 0.0 {
                        for (gw, &a) in g.weights[o * layer.in_dim..(o + 1) * layer.in_dim].iter_mut().zip(&input) {
                            *gw += d * a;
                        }
                    }
                }
                let mut back = vec![0.0; layer.in_dim];
                for (w, &d) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
                    for (acc, &wij) in back.iter_mut().zip(w) {
                        *acc += d * wij;
                    }
                }
                if i == 0 {
                    input_grads.row_mut(b).copy_from_slice(&back);
                } else {
                    for (v, &z) in back.iter_mut().zip(&pre[i - 1]) {
                        if z <= 0.0 {
                            *v = 0.0;
                        }
                    }
                    delta = back;
                }
            }
        }
        Ok((grads, input_grads))
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 { x } else { 0.0 }
}

/// Logistic function, kept strictly inside `(0, 1)` even where it would
/// round to an endpoint.
#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Free-function form of [`CriticParams::param_count`].
pub fn critic_param_count(params: &CriticParams) -> usize {
    params.param_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn param_counts() {
        let p = CriticParams::zeros(&DEFAULT_LAYERS, OutputHead::Linear).unwrap();
        assert_eq!(p.layers[0].param_count(), 2624);
        assert_eq!(p.layers[1].param_count(), 1040);
        assert_eq!(p.layers[2].param_count(), 17);
        assert_eq!(critic_param_count(&p), 2624 + 1040 + 17);
    }

    #[test]
    fn zero_params_scores() {
        let x = Matrix::from_rows(&[[0.3; 40], [0.9; 40]]).unwrap();
        let lin = CriticParams::zeros(&DEFAULT_LAYERS, OutputHead::Linear).unwrap();
        assert_eq!(lin.forward(&x).unwrap(), vec![0.0, 0.0]);
        let sig = CriticParams::zeros(&DEFAULT_LAYERS, OutputHead::Sigmoid).unwrap();
        assert_eq!(sig.forward(&x).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn width_mismatch() {
        let p = CriticParams::zeros(&DEFAULT_LAYERS, OutputHead::Linear).unwrap();
        assert!(matches!(p.forward(&Matrix::zeros(1, 39)), Err(QiglError::Shape(_))));
        assert!(CriticParams::zeros(&[4, 3], OutputHead::Linear).is_err());
    }

    #[test]
    fn clipping() {
        let mut p = CriticParams::random(&[3, 4, 1], OutputHead::Linear, 1.0, &mut Rng::seed_from_u64(1)).unwrap();
        p.layers[0].weights[0] = 0.5;
        p.layers[0].weights[1] = -0.003;
        p.clip_weights(0.01).unwrap();
        assert_eq!(p.layers[0].weights[0], 0.01);
        assert_eq!(p.layers[0].weights[1], -0.003);
        assert!(p.max_abs_entry() <= 0.01);
        let once = p.clone();
        p.clip_weights(0.01).unwrap();
        assert_eq!(p, once);
        assert!(matches!(p.clip_weights(0.0), Err(QiglError::Argument(_))));
        assert!(p.clip_weights(-1.0).is_err());
    }

    #[test]
    fn linear_net_input_gradient_is_weight_product() {
        // Positive weights and biases keep every ReLU active, so the network
        // is affine and its input gradient is W3 W2 W1.
        let mut p = CriticParams::random(&[3, 4, 2, 1], OutputHead::Linear, 1.0, &mut Rng::seed_from_u64(2)).unwrap();
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|x| *x = x.abs() + 0.1);
        }
        let x = Matrix::from_rows(&[[0.2, 0.5, 0.1]]).unwrap();
        let (_, dx) = p.backward(&x, &[1.0]).unwrap();
        let w = |i: usize| Matrix::from_vec(p.layers[i].out_dim, p.layers[i].in_dim, p.layers[i].weights.clone()).unwrap();
        let prod = w(2).matmul(&w(1)).unwrap().matmul(&w(0)).unwrap();
        for j in 0..3 {
            assert!((dx[(0, j)] - prod[(0, j)]).abs() < 1e-12);
        }
    }

    #[test]
    fn dead_relu_kills_upstream_gradients() {
        let mut p = CriticParams::random(&[3, 4, 2, 1], OutputHead::Linear, 1.0, &mut Rng::seed_from_u64(3)).unwrap();
        p.layers[0].bias.iter_mut().for_each(|b| *b = -10.0);
        let x = Matrix::from_rows(&[[0.2, 0.5, 0.1]]).unwrap();
        let (g, dx) = p.backward(&x, &[1.0]).unwrap();
        assert!(g.layers[0].weights.iter().all(|&v| v == 0.0));
        assert!(g.layers[0].bias.iter().all(|&v| v == 0.0));
        assert!(g.layers[1].weights.iter().all(|&v| v == 0.0));
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigmoid_head_is_strictly_inside_unit_interval() {
        let mut p = CriticParams::random(&[2, 3, 1], OutputHead::Sigmoid, 5.0, &mut Rng::seed_from_u64(4)).unwrap();
        p.layers[1].bias[0] = 30.0;
        let x = Matrix::from_rows(&[[1.0, 1.0], [-3.0, 2.0]]).unwrap();
        for s in p.forward(&x).unwrap() {
            assert!(s > 0.0 && s < 1.0);
        }
    }
}
