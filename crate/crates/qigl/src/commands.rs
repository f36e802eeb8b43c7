//! The work behind each CLI subcommand, usable without a process boundary.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qigl_core::evaluation::{self, FeatureSpace};
use qigl_core::features::{AssignmentMode, PcaModel};
use qigl_core::imaging::{self, Dataset, GrayImage};
use qigl_core::training::{LossMode, TrainState};
use qigl_core::{Matrix, Rng};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::config::{DataSource, RunConfig};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::image_io::{self, ImageFormat};
use crate::metrics::{self, EvaluationReport};

pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const METRICS_FILE: &str = "metrics.csv";
pub const RUN_MANIFEST: &str = "run.json";
pub const CONFIG_COPY: &str = "config.txt";

pub fn checkpoint_path(out_dir: &Path, epoch: u64) -> PathBuf {
    out_dir.join(CHECKPOINT_DIR).join(format!("epoch_{epoch:04}.ckpt"))
}

/// Highest-epoch checkpoint in `out_dir`, if any.
pub fn latest_checkpoint(out_dir: &Path) -> Result<Option<PathBuf>> {
    let dir = out_dir.join(CHECKPOINT_DIR);
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        let epoch = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("epoch_")?.strip_suffix(".ckpt")?.parse::<u64>().ok());
        if let Some(e) = epoch {
            if best.as_ref().map_or(true, |(b, _)| e > *b) {
                best = Some((e, path));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Real images named by the configuration, equalized when `he_enabled`.
pub fn load_real_images(run: &RunConfig) -> Result<Dataset> {
    let dataset = match &run.data {
        DataSource::Directory { path, exclude_file } => {
            let exclude = match exclude_file {
                Some(f) => image_io::parse_exclusion_list(&fsutil::read_to_string(f)?),
                None => BTreeSet::new(),
            };
            image_io::load_dataset(path, None, &exclude)?
        }
        DataSource::Synthetic(spec) => imaging::synth_dataset(spec)?,
    };
    Ok(if run.train.he_enabled { dataset.equalized() } else { dataset })
}

/// Scaled `[0, 1]` PCA scores of `dataset` under `pca`.
pub fn real_features(pca: &PcaModel, dataset: &Dataset) -> Result<Matrix> {
    let x = dataset.flatten_normalize()?;
    Ok(pca.scale_scores(&pca.transform(&x)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub assignment_mode: String,
    pub loss_mode: String,
    pub he_enabled: bool,
    pub seed: u64,
    pub n_images: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub n_components: usize,
    pub cumulative_explained_variance: f64,
    pub variance_threshold: f64,
    /// Smallest component count reaching `variance_threshold`, if any does
    /// among the fitted components.
    pub components_for_threshold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub initial_frechet: f64,
    pub final_frechet: f64,
    pub epochs: u64,
    pub generator_steps: u64,
    pub last_checkpoint: PathBuf,
}

/// Fits PCA, trains, and writes checkpoints, `metrics.csv`, `run.json` and
/// `config.txt` under `run.out_dir`. With `resume`, continues from the
/// latest checkpoint there (whose configuration must match apart from the
/// epoch count).
pub fn train(run: &RunConfig, resume: bool, log: &mut dyn Write) -> Result<TrainSummary> {
    run.validate()?;
    let out = &run.out_dir;
    fsutil::create_dir_all(&out.join(CHECKPOINT_DIR))?;
    let hash = run.hash();
    let dataset = load_real_images(run)?;
    let (w, h) = dataset.dims().expect("loaders reject empty datasets");

    let resumed = match resume.then(|| latest_checkpoint(out)).transpose()?.flatten() {
        Some(path) => {
            let ckpt = Checkpoint::load(&path)?;
            let mut theirs = ckpt.run.clone();
            theirs.train.epochs = run.train.epochs;
            if theirs.hash() != hash {
                return Err(Error::Invalid(format!(
                    "{} was written under a different configuration",
                    path.display()
                )));
            }
            Some(ckpt.state)
        }
        None => None,
    };

    let (mut state, real, mut csv) = match resumed {
        Some(mut state) => {
            state.config.epochs = run.train.epochs;
            let real = real_features(&state.pca, &dataset)?;
            let old = std::fs::read_to_string(out.join(METRICS_FILE)).unwrap_or_default();
            let mut rows = metrics::csv_rows_through(&old, state.epoch);
            if rows.is_empty() {
                rows = metrics::csv_initial_row(state.initial_frechet);
            }
            let csv = metrics::csv_preamble(&hash) + &rows;
            writeln!(log, "resuming at epoch {}", state.epoch).ok();
            (state, real, csv)
        }
        None => {
            let x = dataset.flatten_normalize()?;
            let pca = PcaModel::fit(&x, run.train.n_features())?;
            let real = pca.scale_scores(&pca.transform(&x)?)?;
            let cumulative = *pca.cumulative_explained_variance().last().unwrap_or(&0.0);
            let manifest = RunManifest {
                config_hash: hash.clone(),
                assignment_mode: run.train.assignment_mode.as_str().into(),
                loss_mode: run.train.loss_mode.as_str().into(),
                he_enabled: run.train.he_enabled,
                seed: run.train.seed,
                n_images: dataset.len(),
                image_width: w,
                image_height: h,
                n_components: pca.n_components(),
                cumulative_explained_variance: cumulative,
                variance_threshold: run.variance_threshold,
                components_for_threshold: pca.components_for_variance(run.variance_threshold),
            };
            writeln!(
                log,
                "PCA: {} components explain {:.4} of the variance; {} reach {}",
                manifest.n_components,
                cumulative,
                manifest.components_for_threshold.map_or("none".to_string(), |k| k.to_string()),
                run.variance_threshold
            )
            .ok();
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
            fsutil::write_atomic(&out.join(RUN_MANIFEST), json.as_bytes())?;
            fsutil::write_atomic(&out.join(CONFIG_COPY), run.to_canonical_string().as_bytes())?;
            let state = TrainState::initialize(run.train.clone(), pca, &real)?;
            Checkpoint::new(run.clone(), state.clone()).save(&checkpoint_path(out, 0))?;
            let csv = metrics::csv_preamble(&hash) + &metrics::csv_initial_row(state.initial_frechet);
            fsutil::write_atomic(&out.join(METRICS_FILE), csv.as_bytes())?;
            writeln!(log, "epoch 0: frechet {:.6}", state.initial_frechet).ok();
            (state, real, csv)
        }
    };

    let mut last = checkpoint_path(out, state.epoch);
    let mut clock = Instant::now();
    // File errors inside the epoch callback are parked here and the core
    // loop is stopped with a placeholder error.
    let mut io_error = None;
    let outcome = qigl_core::training::train(&mut state, &real, |st, rec| {
        let wall = if run.log_wall_time { clock.elapsed().as_secs_f64() } else { 0.0 };
        clock = Instant::now();
        csv.push_str(&metrics::csv_row(rec, wall));
        let mut persist = || -> Result<()> {
            fsutil::write_atomic(&out.join(METRICS_FILE), csv.as_bytes())?;
            if rec.epoch % run.checkpoint_every as u64 == 0 || rec.epoch == st.config.epochs as u64 {
                last = checkpoint_path(out, rec.epoch);
                Checkpoint::new(run.clone(), st.clone()).save(&last)?;
            }
            Ok(())
        };
        if let Err(e) = persist() {
            io_error = Some(e);
            return Err(qigl_core::QiglError::Argument("output failed".into()));
        }
        writeln!(
            log,
            "epoch {}: L_D {:.6} L_G {:.6} frechet {:.6}",
            rec.epoch, rec.critic_loss, rec.generator_loss, rec.frechet
        )
        .ok();
        Ok(())
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    outcome?;

    Ok(TrainSummary {
        initial_frechet: state.initial_frechet,
        final_frechet: state.history.last().map_or(state.initial_frechet, |r| r.frechet),
        epochs: state.epoch,
        generator_steps: state.generator_steps(),
        last_checkpoint: last,
    })
}

/// Writes `n` generated images (`sample_0000.<ext>`, ...) to `out_dir`.
pub fn generate(ckpt: &Checkpoint, n: usize, out_dir: &Path, seed: u64, format: ImageFormat) -> Result<Vec<PathBuf>> {
    fsutil::create_dir_all(out_dir)?;
    let dataset = load_real_images(&ckpt.run)?;
    let (w, h) = dataset.dims().expect("loaders reject empty datasets");
    if w * h != ckpt.state.pca.dim() {
        return Err(Error::Invalid(format!(
            "checkpoint PCA expects {} pixels, configured images are {w}x{h}",
            ckpt.state.pca.dim()
        )));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let scaled = evaluation::generate_scaled(&ckpt.state.ensemble, n, &mut rng)?;
    let pixels = evaluation::scaled_to_pixels(&ckpt.state.pca, &scaled)?;
    let mut written = Vec::with_capacity(n);
    for (i, row) in pixels.row_iter().enumerate() {
        let path = out_dir.join(format!("sample_{i:04}.{}", format.extension()));
        image_io::save_image(&GrayImage::from_unit(w, h, row)?, &path, format)?;
        written.push(path);
    }
    Ok(written)
}

/// Fréchet distance between the checkpoint's generator and the real data
/// its configuration names.
pub fn evaluate(ckpt: &Checkpoint, n_samples: usize, seed: u64, space: FeatureSpace, split_half: bool) -> Result<EvaluationReport> {
    let dataset = load_real_images(&ckpt.run)?;
    if dataset.flatten_normalize()?.cols() != ckpt.state.pca.dim() {
        return Err(Error::Invalid("configured images do not match the checkpoint's PCA dimension".into()));
    }
    let real = real_features(&ckpt.state.pca, &dataset)?;
    let core = evaluation::evaluate_model(
        &ckpt.state.ensemble,
        &ckpt.state.pca,
        &real,
        n_samples,
        space,
        seed,
        ckpt.state.epoch,
    )?;
    let mut report = EvaluationReport::from_core(&core, &ckpt.run.hash());
    if split_half {
        let real = match space {
            FeatureSpace::ScaledPca => real,
            FeatureSpace::Pixel => evaluation::scaled_to_pixels(&ckpt.state.pca, &real)?,
        };
        report.split_half_baseline = Some(evaluation::split_half_baseline(&real)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub tag: String,
    pub assignment: AssignmentMode,
    pub loss: LossMode,
    pub he: bool,
    pub seed: u64,
    pub initial_frechet: f64,
    pub frechet: f64,
}

pub const ABLATION_FILE: &str = "ablation.csv";
const ABLATION_HEADER: &str = "tag,assignment,loss,he,seed,initial_frechet,frechet";

impl AblationRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}\n",
            self.tag,
            self.assignment.as_str(),
            self.loss.as_str(),
            self.he,
            self.seed,
            self.initial_frechet,
            self.frechet
        )
    }

    fn from_csv(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return None;
        }
        Some(Self {
            tag: f[0].into(),
            assignment: f[1].parse().ok()?,
            loss: f[2].parse().ok()?,
            he: f[3].parse().ok()?,
            seed: f[4].parse().ok()?,
            initial_frechet: f[5].parse().ok()?,
            frechet: f[6].parse().ok()?,
        })
    }
}

pub fn ablation_tag(assignment: AssignmentMode, loss: LossMode, he: bool) -> String {
    format!("{}+{}+{}", assignment.as_str(), loss.as_str(), if he { "he" } else { "no-he" })
}

/// The 2 x 2 x 2 grid over assignment, loss and histogram equalization,
/// each cell trained in `out_dir/ablation/<tag>` with the shared seed.
/// Cells already present in `ablation.csv` are not rerun.
pub fn ablate(run: &RunConfig, log: &mut dyn Write) -> Result<Vec<AblationRow>> {
    run.validate()?;
    fsutil::create_dir_all(&run.out_dir)?;
    let csv_path = run.out_dir.join(ABLATION_FILE);
    let mut rows: Vec<AblationRow> = std::fs::read_to_string(&csv_path)
        .map(|t| t.lines().filter_map(AblationRow::from_csv).collect())
        .unwrap_or_default();
    for assignment in [AssignmentMode::Conventional, AssignmentMode::Balanced] {
        for loss in [LossMode::Bce, LossMode::Wasserstein] {
            for he in [false, true] {
                let tag = ablation_tag(assignment, loss, he);
                if rows.iter().any(|r| r.tag == tag) {
                    writeln!(log, "{tag}: already done").ok();
                    continue;
                }
                let mut cell = run.clone();
                cell.train.assignment_mode = assignment;
                cell.train.loss_mode = loss;
                cell.train.he_enabled = he;
                cell.out_dir = run.out_dir.join("ablation").join(&tag);
                writeln!(log, "{tag}: training").ok();
                let summary = train(&cell, true, &mut std::io::sink())?;
                rows.push(AblationRow {
                    tag,
                    assignment,
                    loss,
                    he,
                    seed: run.train.seed,
                    initial_frechet: summary.initial_frechet,
                    frechet: summary.final_frechet,
                });
                let mut text = format!("# config_hash={}\n{ABLATION_HEADER}\n", run.hash());
                rows.iter().for_each(|r| text.push_str(&r.to_csv()));
                fsutil::write_atomic(&csv_path, text.as_bytes())?;
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub source: String,
    pub width: usize,
    pub height: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessManifest {
    pub he_enabled: bool,
    pub excluded: Vec<String>,
    pub files: Vec<ManifestEntry>,
}

pub const PREPROCESS_MANIFEST: &str = "manifest.json";

/// Copies every non-excluded image of `input` to `output` as PGM,
/// equalizing first when `he`. Unreadable inputs are all reported together
/// and nothing is written in that case.
pub fn preprocess(input: &Path, output: &Path, he: bool, exclude: &BTreeSet<String>) -> Result<PreprocessManifest> {
    let paths = image_io::list_images(input, exclude)?;
    let mut loaded = Vec::with_capacity(paths.len());
    let mut failures = Vec::new();
    for path in &paths {
        match image_io::load_image(path) {
            Ok(img) => loaded.push((path, img)),
            Err(e) => failures.push((path.clone(), e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Load(failures));
    }
    fsutil::create_dir_all(output)?;
    let mut files = Vec::with_capacity(loaded.len());
    for (path, img) in loaded {
        let img = if he { imaging::histogram_equalize(&img) } else { img };
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        let name = format!("{stem}.pgm");
        let bytes = image_io::encode_pgm(&img);
        fsutil::write_atomic(&output.join(&name), &bytes)?;
        files.push(ManifestEntry {
            file: name,
            source: path.file_name().and_then(|s| s.to_str()).unwrap_or_default().into(),
            width: img.width(),
            height: img.height(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let manifest = PreprocessManifest { he_enabled: he, excluded: exclude.iter().cloned().collect(), files };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fsutil::write_atomic(&output.join(PREPROCESS_MANIFEST), json.as_bytes())?;
    Ok(manifest)
}
