use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qigl::commands;
use qigl::image_io::{self, ImageFormat};
use qigl::{Checkpoint, Error, Overrides, RunConfig};
use qigl_core::evaluation::FeatureSpace;
use qigl_core::features::AssignmentMode;
use qigl_core::training::LossMode;

/// Hybrid quantum-classical image generator: patch-style variational
/// circuits trained adversarially in PCA space.
#[derive(Debug, Parser)]
#[command(name = "qigl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply an exclusion list and optional histogram equalization, writing
    /// PGM files plus a manifest.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        he: bool,
        /// File listing names to skip, one per line.
        #[arg(long)]
        exclude: Option<PathBuf>,
    },
    /// Fit PCA and train, writing checkpoints and metrics.csv.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from the newest checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Sample images from a checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the run's n_images.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the run seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "pgm")]
        format: String,
    },
    /// Fréchet distance between generated and real features, as JSON.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Defaults to the run seed.
        #[arg(long)]
        seed: Option<u64>,
        /// `scaled_pca` or `pixel`.
        #[arg(long, default_value = "scaled_pca")]
        space: String,
        /// Also report the real-vs-real split-half distance.
        #[arg(long)]
        split_half: bool,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the 2x2x2 assignment / loss / equalization grid.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// key = value configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    he: bool,
    #[arg(long, value_parser = parse_assignment)]
    assignment: Option<AssignmentMode>,
    #[arg(long, value_parser = parse_loss)]
    loss: Option<LossMode>,
}

fn parse_assignment(s: &str) -> Result<AssignmentMode, String> {
    s.parse().map_err(|e: qigl_core::QiglError| e.to_string())
}

fn parse_loss(s: &str) -> Result<LossMode, String> {
    s.parse().map_err(|e: qigl_core::QiglError| e.to_string())
}

impl RunArgs {
    fn resolve(&self) -> qigl::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let overrides = Overrides {
            seed: self.seed,
            out_dir: self.out.clone(),
            he: self.he,
            assignment: self.assignment,
            loss: self.loss,
        };
        overrides.apply(&mut cfg).map_err(|e| match e {
            Error::Invalid(message) => Error::Config { path: "command line".into(), line: None, message },
            other => other,
        })?;
        Ok(cfg)
    }
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("QIGL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("QIGL_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(Error::Invalid(e.to_string())))
}

fn read_exclusions(path: Option<&Path>) -> qigl::Result<BTreeSet<String>> {
    match path {
        Some(p) => Ok(image_io::parse_exclusion_list(&qigl::fsutil::read_to_string(p)?)),
        None => Ok(BTreeSet::new()),
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let mut stdout = std::io::stdout();
    match command {
        Command::Preprocess { input, out, he, exclude } => {
            let exclude = read_exclusions(exclude.as_deref())?;
            let manifest = commands::preprocess(&input, &out, he, &exclude)?;
            println!("wrote {} images to {}", manifest.files.len(), out.display());
        }
        Command::Train { run, resume } => {
            let cfg = run.resolve()?;
            println!("config_hash {}", cfg.hash());
            print!("{}", cfg.to_canonical_string());
            let summary = commands::train(&cfg, resume, &mut stdout)?;
            println!(
                "done: {} epochs, {} generator steps, frechet {:.6} -> {:.6}, last checkpoint {}",
                summary.epochs,
                summary.generator_steps,
                summary.initial_frechet,
                summary.final_frechet,
                summary.last_checkpoint.display()
            );
        }
        Command::Generate { checkpoint, n, out, seed, format } => {
            let format: ImageFormat = format.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let n = n.unwrap_or(ckpt.run.n_images);
            let seed = seed.unwrap_or(ckpt.run.train.seed);
            let written = commands::generate(&ckpt, n, &out, seed, format)?;
            println!("wrote {} images to {}", written.len(), out.display());
        }
        Command::Evaluate { checkpoint, n, seed, space, split_half, out } => {
            let space = match space.as_str() {
                "scaled_pca" => FeatureSpace::ScaledPca,
                "pixel" => FeatureSpace::Pixel,
                other => return Err(Failure::Usage(format!("unknown feature space {other:?}"))),
            };
            let ckpt = Checkpoint::load(&checkpoint)?;
            let seed = seed.unwrap_or(ckpt.run.train.seed);
            let report = commands::evaluate(&ckpt, n, seed, space, split_half)?;
            let json = report.to_json();
            print!("{json}");
            if let Some(path) = out {
                qigl::fsutil::write_atomic(&path, json.as_bytes())?;
            }
        }
        Command::Ablate { run } => {
            let cfg = run.resolve()?;
            let rows = commands::ablate(&cfg, &mut stdout)?;
            for r in rows {
                println!("{:<40} {:.6}", r.tag, r.frechet);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
