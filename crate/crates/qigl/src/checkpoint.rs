//! Versioned binary checkpoint container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "QIGLCKPT"            8-byte magic
//! version               u32
//! config                u64 byte length + UTF-8 canonical config text
//! epoch                 u64
//! generator angles      array, sub-generator-major, layer-major within
//! critic tensors        array per tensor: W1, b1, W2, b2, W3, b3
//! PCA                   arrays: mean, axes (k x d, row-major), singular
//!                       values, explained-variance ratios, [min, max]
//! generator Adam        u64 step, then array m_i for each tensor, then v_i
//! critic Adam           same layout
//! RNG                   32-byte ChaCha seed, u64 stream, u128 word position
//! initial Fréchet       f64
//! history               u64 count, then per epoch: u64 epoch, f64 L_D,
//!                       f64 L_G, f64 Fréchet
//! ```
//!
//! An array is a u64 element count followed by that many f64 values.

use std::path::Path;

use qigl_core::critic::{CriticParams, DEFAULT_LAYERS};
use qigl_core::features::{FeatureAssignment, PcaModel};
use qigl_core::qcircuit::CircuitSpec;
use qigl_core::qgenerator::{GeneratorEnsemble, SubGeneratorParams};
use qigl_core::training::{AdamState, EpochRecord, TrainState};
use qigl_core::{Matrix, Rng};
use rand::SeedableRng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 8] = b"QIGLCKPT";
pub const VERSION: u32 = 1;

/// A training state together with the run configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub run: RunConfig,
    pub state: TrainState,
}

impl Checkpoint {
    /// The embedded training settings always mirror `state.config`.
    pub fn new(mut run: RunConfig, state: TrainState) -> Self {
        run.train = state.config.clone();
        Self { run, state }
    }

    pub fn encode(&self) -> Vec<u8> {
        let s = &self.state;
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&VERSION.to_le_bytes());
        w.bytes(self.run.to_canonical_string().as_bytes());
        w.u64(s.epoch);
        w.array(&s.ensemble.flat_params());
        for t in s.critic.tensors() {
            w.array(t);
        }
        w.array(&s.pca.mean);
        w.array(s.pca.axes.as_slice());
        w.array(&s.pca.singular_values);
        w.array(&s.pca.explained_variance_ratio);
        w.array(&[s.pca.pca_min, s.pca.pca_max]);
        for adam in [&s.generator_adam, &s.critic_adam] {
            w.u64(adam.step);
            adam.m.iter().chain(&adam.v).for_each(|t| w.array(t));
        }
        w.0.extend_from_slice(&s.rng.get_seed());
        w.u64(s.rng.get_stream());
        w.0.extend_from_slice(&s.rng.get_word_pos().to_le_bytes());
        w.f64(s.initial_frechet);
        w.u64(s.history.len() as u64);
        for r in &s.history {
            w.u64(r.epoch);
            w.f64(r.critic_loss);
            w.f64(r.generator_loss);
            w.f64(r.frechet);
        }
        w.0
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |message: String| Error::Checkpoint { path: path.to_path_buf(), message };
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8).map_err(&fail)? != MAGIC {
            return Err(fail("not a qigl checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.take(4).map_err(&fail)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(fail(format!("unsupported checkpoint version {version}, this build reads {VERSION}")));
        }
        let text = String::from_utf8(r.bytes_field().map_err(&fail)?.to_vec())
            .map_err(|_| fail("embedded config is not UTF-8".into()))?;
        let run = RunConfig::parse(&text, &format!("{} (embedded config)", path.display()))?;
        let cfg = run.train.clone();
        let epoch = r.u64().map_err(&fail)?;

        let spec = CircuitSpec::linear(cfg.n_qubits, cfg.depth)?;
        let n_features = cfg.n_features();
        let assignment = FeatureAssignment::new(cfg.assignment_mode, n_features, cfg.n_subgens, cfg.n_qubits)?;
        let angles = r.array_of(cfg.n_subgens * spec.param_count(), "generator angles").map_err(&fail)?;
        let subs = angles
            .chunks_exact(spec.param_count())
            .map(|w| SubGeneratorParams::new(&spec, w.to_vec()))
            .collect::<qigl_core::Result<Vec<_>>>()?;
        let ensemble = GeneratorEnsemble::new(spec, subs, assignment)?;

        let widths = [n_features, DEFAULT_LAYERS[1], DEFAULT_LAYERS[2], 1];
        let mut critic = CriticParams::zeros(&widths, cfg.loss_mode.head())?;
        for (i, t) in critic.tensors_mut().into_iter().enumerate() {
            let values = r.array_of(t.len(), &format!("critic tensor {i}")).map_err(&fail)?;
            t.copy_from_slice(&values);
        }

        let mean = r.array().map_err(&fail)?;
        let d = mean.len();
        let axes = r.array_of(n_features * d, "PCA axes").map_err(&fail)?;
        let singular_values = r.array().map_err(&fail)?;
        let explained_variance_ratio = r.array().map_err(&fail)?;
        let range = r.array_of(2, "PCA range").map_err(&fail)?;
        let pca = PcaModel {
            mean,
            axes: Matrix::from_vec(n_features, d, axes)?,
            singular_values,
            explained_variance_ratio,
            pca_min: range[0],
            pca_max: range[1],
        };

        let generator_adam = r.adam(&vec![ensemble.spec().param_count(); cfg.n_subgens]).map_err(&fail)?;
        let critic_shapes: Vec<usize> = critic.tensors().iter().map(|t| t.len()).collect();
        let critic_adam = r.adam(&critic_shapes).map_err(&fail)?;

        let seed: [u8; 32] = r.take(32).map_err(&fail)?.try_into().expect("32 bytes");
        let stream = r.u64().map_err(&fail)?;
        let word_pos = u128::from_le_bytes(r.take(16).map_err(&fail)?.try_into().expect("16 bytes"));
        let mut rng = Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);

        let initial_frechet = r.f64().map_err(&fail)?;
        let n_hist = r.u64().map_err(&fail)?;
        let mut history = Vec::new();
        for _ in 0..n_hist {
            history.push(EpochRecord {
                epoch: r.u64().map_err(&fail)?,
                critic_loss: r.f64().map_err(&fail)?,
                generator_loss: r.f64().map_err(&fail)?,
                frechet: r.f64().map_err(&fail)?,
            });
        }
        if r.pos != bytes.len() {
            return Err(fail(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let state = TrainState {
            config: cfg,
            ensemble,
            critic,
            pca,
            generator_adam,
            critic_adam,
            rng,
            epoch,
            initial_frechet,
            history,
        };
        Ok(Self { run, state })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fsutil::read(path)?, path)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.0.extend_from_slice(b);
    }

    fn array(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.f64(x));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {} (wanted {n} more)", self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> std::result::Result<usize, String> {
        let n = self.u64()?;
        usize::try_from(n).ok().filter(|&n| n <= self.bytes.len()).ok_or_else(|| format!("implausible length {n}"))
    }

    fn bytes_field(&mut self) -> std::result::Result<&'a [u8], String> {
        let n = self.len()?;
        self.take(n)
    }

    fn array(&mut self) -> std::result::Result<Vec<f64>, String> {
        let n = self.len()?;
        let raw = self.take(n.checked_mul(8).ok_or("length overflow")?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn array_of(&mut self, expected: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
        let a = self.array()?;
        if a.len() != expected {
            return Err(format!("{what}: {} values, expected {expected}", a.len()));
        }
        Ok(a)
    }

    fn adam(&mut self, shapes: &[usize]) -> std::result::Result<AdamState, String> {
        let step = self.u64()?;
        let mut m = Vec::with_capacity(shapes.len());
        for (i, &n) in shapes.iter().enumerate() {
            m.push(self.array_of(n, &format!("Adam first moment {i}"))?);
        }
        let mut v = Vec::with_capacity(shapes.len());
        for (i, &n) in shapes.iter().enumerate() {
            v.push(self.array_of(n, &format!("Adam second moment {i}"))?);
        }
        Ok(AdamState { m, v, step })
    }
}
