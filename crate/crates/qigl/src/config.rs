//! Line-oriented `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional and falls back to its default; unknown or repeated keys are
//! rejected with the offending line number. [`RunConfig::to_canonical_string`]
//! prints every setting in a fixed order, and its SHA-256 is the config hash
//! stamped on every output.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use qigl_core::features::AssignmentMode;
use qigl_core::imaging::{SynthKind, SynthSpec};
use qigl_core::training::{LossMode, TrainConfig};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Directory { path: PathBuf, exclude_file: Option<PathBuf> },
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: DataSource,
    pub out_dir: PathBuf,
    /// Write a checkpoint every this many epochs (the final epoch is
    /// always written).
    pub checkpoint_every: usize,
    /// Images emitted by `generate` when no count is given.
    pub n_images: usize,
    /// Cumulative explained-variance level reported after the PCA fit.
    pub variance_threshold: f64,
    /// When false the metrics CSV records 0 wall-clock seconds, making the
    /// file a pure function of the configuration.
    pub log_wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            data: DataSource::Synthetic(SynthSpec { kind: SynthKind::TwoBlobs, n: 128, size: 16, jitter: 0.1, seed: 1 }),
            out_dir: PathBuf::from("runs/qigl"),
            checkpoint_every: 1,
            n_images: 16,
            variance_threshold: 0.98,
            log_wall_time: true,
        }
    }
}

const TRAIN_KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "lr_generator",
    "lr_critic",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "clip_c",
    "critic_steps_per_gen_step",
    "loss_mode",
    "assignment_mode",
    "he_enabled",
    "seed",
    "n_qubits",
    "depth",
    "n_subgens",
    "generator_init_range",
    "critic_init_range",
    "eval_samples",
];

const RUN_KEYS: &[&str] = &[
    "data_dir",
    "exclude_file",
    "synth_kind",
    "synth_n",
    "synth_size",
    "synth_jitter",
    "synth_seed",
    "out_dir",
    "checkpoint_every",
    "n_images",
    "variance_threshold",
    "log_wall_time",
];

fn parse_value<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse {value:?} as {}", std::any::type_name::<T>()))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got {value:?}")),
    }
}

impl RunConfig {
    /// Parses `text`; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |line: Option<usize>, message: String| Error::Config { path: origin.into(), line, message };
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeMap::new();
        let (mut data_dir, mut exclude_file) = (None, None);
        let mut synth = match &cfg.data {
            DataSource::Synthetic(s) => *s,
            DataSource::Directory { .. } => unreachable!("default data source is synthetic"),
        };
        let mut synth_line = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(Some(line_no), format!("expected `key = value`, got {line:?}")));
            };
            let (key, value) = (key.trim(), value.trim());
            if !TRAIN_KEYS.contains(&key) && !RUN_KEYS.contains(&key) {
                return Err(err(Some(line_no), format!("unknown key {key:?}")));
            }
            if let Some(first) = seen.insert(key.to_owned(), line_no) {
                return Err(err(Some(line_no), format!("key {key:?} already set on line {first}")));
            }
            if key.starts_with("synth_") {
                synth_line.get_or_insert(line_no);
            }
            let t = &mut cfg.train;
            let applied: std::result::Result<(), String> = (|| {
                match key {
                    "epochs" => t.epochs = parse_value(value)?,
                    "batch_size" => t.batch_size = parse_value(value)?,
                    "lr_generator" => t.lr_generator = parse_value(value)?,
                    "lr_critic" => t.lr_critic = parse_value(value)?,
                    "adam_beta1" => t.adam_beta1 = parse_value(value)?,
                    "adam_beta2" => t.adam_beta2 = parse_value(value)?,
                    "adam_eps" => t.adam_eps = parse_value(value)?,
                    "clip_c" => t.clip_c = parse_value(value)?,
                    "critic_steps_per_gen_step" => t.critic_steps_per_gen_step = parse_value(value)?,
                    "loss_mode" => t.loss_mode = value.parse().map_err(|e: qigl_core::QiglError| e.to_string())?,
                    "assignment_mode" => {
                        t.assignment_mode = value.parse().map_err(|e: qigl_core::QiglError| e.to_string())?
                    }
                    "he_enabled" => t.he_enabled = parse_bool(value)?,
                    "seed" => t.seed = parse_value(value)?,
                    "n_qubits" => t.n_qubits = parse_value(value)?,
                    "depth" => t.depth = parse_value(value)?,
                    "n_subgens" => t.n_subgens = parse_value(value)?,
                    "generator_init_range" => t.generator_init_range = parse_value(value)?,
                    "critic_init_range" => t.critic_init_range = parse_value(value)?,
                    "eval_samples" => t.eval_samples = parse_value(value)?,
                    "data_dir" => data_dir = Some(PathBuf::from(value)),
                    "exclude_file" => exclude_file = Some(PathBuf::from(value)),
                    "synth_kind" => synth.kind = value.parse().map_err(|e: qigl_core::QiglError| e.to_string())?,
                    "synth_n" => synth.n = parse_value(value)?,
                    "synth_size" => synth.size = parse_value(value)?,
                    "synth_jitter" => synth.jitter = parse_value(value)?,
                    "synth_seed" => synth.seed = parse_value(value)?,
                    "out_dir" => cfg.out_dir = PathBuf::from(value),
                    "checkpoint_every" => cfg.checkpoint_every = parse_value(value)?,
                    "n_images" => cfg.n_images = parse_value(value)?,
                    "variance_threshold" => cfg.variance_threshold = parse_value(value)?,
                    "log_wall_time" => cfg.log_wall_time = parse_bool(value)?,
                    _ => unreachable!("key list checked above"),
                }
                Ok(())
            })();
            applied.map_err(|m| err(Some(line_no), format!("{key}: {m}")))?;
        }
        cfg.data = match data_dir {
            Some(path) => {
                if let Some(l) = synth_line {
                    return Err(err(Some(l), "synth_* keys cannot be combined with data_dir".into()));
                }
                DataSource::Directory { path, exclude_file }
            }
            None => {
                if let Some(l) = seen.get("exclude_file") {
                    return Err(err(Some(*l), "exclude_file requires data_dir".into()));
                }
                DataSource::Synthetic(synth)
            }
        };
        cfg.validate().map_err(|e| match e {
            Error::Invalid(m) => err(None, m),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&crate::fsutil::read_to_string(path)?, &path.display().to_string())
    }

    /// Range checks on every setting; run before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| Error::Invalid(e.to_string()))?;
        if self.checkpoint_every == 0 {
            return Err(Error::Invalid("checkpoint_every must be at least 1".into()));
        }
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return Err(Error::Invalid(format!("variance_threshold must be in (0, 1], got {}", self.variance_threshold)));
        }
        if let DataSource::Synthetic(s) = &self.data {
            if s.n < 2 || s.size == 0 || !(s.jitter >= 0.0 && s.jitter.is_finite()) {
                return Err(Error::Invalid("synthetic data needs synth_n >= 2, synth_size >= 1, synth_jitter >= 0".into()));
            }
        }
        Ok(())
    }

    /// Every setting except `out_dir`, one `key = value` line each, in a
    /// fixed order.
    pub fn to_canonical_string(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("epochs", t.epochs.to_string());
        put("batch_size", t.batch_size.to_string());
        put("lr_generator", format!("{:?}", t.lr_generator));
        put("lr_critic", format!("{:?}", t.lr_critic));
        put("adam_beta1", format!("{:?}", t.adam_beta1));
        put("adam_beta2", format!("{:?}", t.adam_beta2));
        put("adam_eps", format!("{:?}", t.adam_eps));
        put("clip_c", format!("{:?}", t.clip_c));
        put("critic_steps_per_gen_step", t.critic_steps_per_gen_step.to_string());
        put("loss_mode", t.loss_mode.as_str().into());
        put("assignment_mode", t.assignment_mode.as_str().into());
        put("he_enabled", t.he_enabled.to_string());
        put("seed", t.seed.to_string());
        put("n_qubits", t.n_qubits.to_string());
        put("depth", t.depth.to_string());
        put("n_subgens", t.n_subgens.to_string());
        put("generator_init_range", format!("{:?}", t.generator_init_range));
        put("critic_init_range", format!("{:?}", t.critic_init_range));
        put("eval_samples", t.eval_samples.to_string());
        match &self.data {
            DataSource::Directory { path, exclude_file } => {
                put("data_dir", path.display().to_string());
                if let Some(x) = exclude_file {
                    put("exclude_file", x.display().to_string());
                }
            }
            DataSource::Synthetic(sp) => {
                put("synth_kind", sp.kind.as_str().into());
                put("synth_n", sp.n.to_string());
                put("synth_size", sp.size.to_string());
                put("synth_jitter", format!("{:?}", sp.jitter));
                put("synth_seed", sp.seed.to_string());
            }
        }
        put("checkpoint_every", self.checkpoint_every.to_string());
        put("n_images", self.n_images.to_string());
        put("variance_threshold", format!("{:?}", self.variance_threshold));
        put("log_wall_time", self.log_wall_time.to_string());
        s
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_string().as_bytes()))
    }
}

/// Command-line overrides applied on top of a parsed file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub he: bool,
    pub assignment: Option<AssignmentMode>,
    pub loss: Option<LossMode>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        if let Some(out) = &self.out_dir {
            cfg.out_dir = out.clone();
        }
        if self.he {
            cfg.train.he_enabled = true;
        }
        if let Some(a) = self.assignment {
            cfg.train.assignment_mode = a;
        }
        if let Some(l) = self.loss {
            cfg.train.loss_mode = l;
        }
        cfg.validate()
    }
}
