//! Dense statevector simulation of RX / RY / CZ circuits with Pauli-X readout.
//!
//! Basis index bit `q` holds qubit `q` (little-endian).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{shape_err, QiglError, Result};

pub const MAX_QUBITS: usize = 24;

/// Tolerance used by [`StateVector::pauli_x_expectations`] to reject
/// unnormalized input.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(QiglError::Size(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the norm is
    /// not checked here.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() || len.trailing_zeros() as usize > MAX_QUBITS {
            return Err(QiglError::Size(format!("{len} amplitudes is not 2^n for 1 <= n <= {MAX_QUBITS}")));
        }
        Ok(Self { n_qubits: len.trailing_zeros() as usize, amplitudes })
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.amplitudes.iter().map(|a| a.norm_sqr()).sum())
    }

    fn check_qubit(&self, index: usize) -> Result<()> {
        if index < self.n_qubits {
            Ok(())
        } else {
            Err(QiglError::Index { index, n_qubits: self.n_qubits })
        }
    }

    /// Applies a 2x2 unitary `[[u00, u01], [u10, u11]]` to `target`.
    fn apply_single(&mut self, target: usize, u: [[Complex64; 2]; 2]) {
        let stride = 1usize << target;
        let len = self.amplitudes.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i + stride];
                self.amplitudes[i] = u[0][0] * a0 + u[0][1] * a1;
                self.amplitudes[i + stride] = u[1][0] * a0 + u[1][1] * a1;
            }
            base += 2 * stride;
        }
    }

    /// `exp(-i angle X / 2)` on `target`.
    pub fn apply_rx(&mut self, target: usize, angle: f64) -> Result<()> {
        self.check_qubit(target)?;
        let (s, c) = libm::sincos(0.5 * angle);
        let c = Complex64::new(c, 0.0);
        let mis = Complex64::new(0.0, -s);
        self.apply_single(target, [[c, mis], [mis, c]]);
        Ok(())
    }

    /// `exp(-i angle Y / 2)` on `target`.
    pub fn apply_ry(&mut self, target: usize, angle: f64) -> Result<()> {
        self.check_qubit(target)?;
        let (s, c) = libm::sincos(0.5 * angle);
        let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
        self.apply_single(target, [[c, -s], [s, c]]);
        Ok(())
    }

    /// Negates every amplitude whose basis state has both qubits set.
    pub fn apply_cz(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(QiglError::Argument(format!("CZ control and target are both qubit {control}")));
        }
        let mask = (1usize << control) | (1usize << target);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & mask == mask {
                *a = -*a;
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        match *gate {
            GateOp::Rx { target, angle } => self.apply_rx(target, angle),
            GateOp::Ry { target, angle } => self.apply_ry(target, angle),
            GateOp::Cz { control, target } => self.apply_cz(control, target),
        }
    }

    /// `<psi| X_q |psi>` for every qubit `q`.
    pub fn pauli_x_expectations(&self) -> Result<Vec<f64>> {
        let deviation = (self.norm() - 1.0).abs();
        if !(deviation <= NORM_TOLERANCE) {
            return Err(QiglError::State { deviation });
        }
        Ok(self.pauli_x_unchecked())
    }

    fn pauli_x_unchecked(&self) -> Vec<f64> {
        (0..self.n_qubits)
            .map(|q| {
                let bit = 1usize << q;
                let mut acc = 0.0;
                for (i, a) in self.amplitudes.iter().enumerate() {
                    if i & bit == 0 {
                        acc += (a.conj() * self.amplitudes[i | bit]).re;
                    }
                }
                (2.0 * acc).clamp(-1.0, 1.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp {
    Rx { target: usize, angle: f64 },
    Ry { target: usize, angle: f64 },
    Cz { control: usize, target: usize },
}

/// Which CZ pairs follow each variational layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entangler {
    /// `(0,1), (1,2), ..., (n-2, n-1)`.
    Linear,
    Custom(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitSpec {
    n_qubits: usize,
    depth: usize,
    topology: Vec<(usize, usize)>,
}

impl CircuitSpec {
    pub fn new(n_qubits: usize, depth: usize, entangler: Entangler) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(QiglError::Size(format!("n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}")));
        }
        if depth == 0 {
            return Err(QiglError::Argument("circuit depth must be at least 1".into()));
        }
        let topology = match entangler {
            Entangler::Linear => (1..n_qubits).map(|q| (q - 1, q)).collect(),
            Entangler::Custom(pairs) => pairs,
        };
        for &(c, t) in &topology {
            if c >= n_qubits || t >= n_qubits || c == t {
                return Err(QiglError::Argument(format!(
                    "invalid CZ pair ({c}, {t}) for {n_qubits} qubits"
                )));
            }
        }
        Ok(Self { n_qubits, depth, topology })
    }

    /// Linear nearest-neighbour chain.
    pub fn linear(n_qubits: usize, depth: usize) -> Result<Self> {
        Self::new(n_qubits, depth, Entangler::Linear)
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn topology(&self) -> &[(usize, usize)] {
        &self.topology
    }

    /// Trainable angles per circuit: one RY per qubit per layer.
    #[inline]
    pub fn param_count(&self) -> usize {
        self.depth * self.n_qubits
    }

    /// The full gate list, in application order.
    pub fn gates(&self, encoding: &[(f64, f64)], weights: &[f64]) -> Result<Vec<GateOp>> {
        self.check_shapes(encoding, weights)?;
        let mut gates = Vec::with_capacity(2 * self.n_qubits + self.depth * (self.n_qubits + self.topology.len()));
        for (q, &(rx, ry)) in encoding.iter().enumerate() {
            gates.push(GateOp::Rx { target: q, angle: rx });
            gates.push(GateOp::Ry { target: q, angle: ry });
        }
        for layer in weights.chunks_exact(self.n_qubits) {
            for (q, &w) in layer.iter().enumerate() {
                gates.push(GateOp::Ry { target: q, angle: w });
            }
            for &(control, target) in &self.topology {
                gates.push(GateOp::Cz { control, target });
            }
        }
        Ok(gates)
    }

    fn check_shapes(&self, encoding: &[(f64, f64)], weights: &[f64]) -> Result<()> {
        if encoding.len() != self.n_qubits {
            return Err(shape_err(format!(
                "{} encoding pairs for {} qubits",
                encoding.len(),
                self.n_qubits
            )));
        }
        if weights.len() != self.param_count() {
            return Err(shape_err(format!(
                "{} weights for a {}x{} layer grid",
                weights.len(),
                self.depth,
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Runs the circuit from `|0...0>` and returns per-qubit `<X>`.
    ///
    /// `weights` is the depth x n_qubits grid flattened layer-major.
    pub fn run(&self, encoding: &[(f64, f64)], weights: &[f64]) -> Result<Vec<f64>> {
        self.check_shapes(encoding, weights)?;
        let mut state = StateVector::zero(self.n_qubits)?;
        for (q, &(rx, ry)) in encoding.iter().enumerate() {
            state.apply_rx(q, rx)?;
            state.apply_ry(q, ry)?;
        }
        for layer in weights.chunks_exact(self.n_qubits) {
            for (q, &w) in layer.iter().enumerate() {
                state.apply_ry(q, w)?;
            }
            for &(control, target) in &self.topology {
                state.apply_cz(control, target)?;
            }
        }
        // Unitary gates only, so the state is normalized up to rounding.
        Ok(state.pauli_x_unchecked())
    }
}

/// Free-function form of [`CircuitSpec::run`].
pub fn run_circuit(spec: &CircuitSpec, encoding: &[(f64, f64)], weights: &[f64]) -> Result<Vec<f64>> {
    spec.run(encoding, weights)
}
