use std::path::Path;
use std::process::{Command, Output};

use qigl::image_io::{load_image, save_image, ImageFormat};
use qigl::metrics::EvaluationReport;
use qigl_core::imaging::GrayImage;

const TINY: &str = "\
epochs = 2
batch_size = 4
n_qubits = 3
depth = 2
n_subgens = 2
lr_generator = 0.01
lr_critic = 0.001
critic_steps_per_gen_step = 2
eval_samples = 32
synth_n = 16
synth_size = 8
n_images = 3
log_wall_time = false
";

fn qigl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qigl")).args(args).env("QIGL_THREADS", "1").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = qigl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_tiny(dir: &Path) -> std::path::PathBuf {
    let conf = dir.join("tiny.conf");
    std::fs::write(&conf, TINY).unwrap();
    let run = dir.join("run");
    ok(&["train", "--config", s(&conf), "--out", s(&run)]);
    run
}

#[test]
fn train_generate_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_tiny(dir.path());
    for name in ["run.json", "config.txt", "metrics.csv", "checkpoints/epoch_0002.ckpt"] {
        assert!(run.join(name).is_file(), "missing {name}");
    }
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert_eq!(lines[1], "epoch,L_D,L_G,frechet,wall_seconds");
    assert!(lines[2].starts_with("0,,,"));
    assert_eq!(lines.len(), 5);

    let ckpt = run.join("checkpoints/epoch_0002.ckpt");
    let samples = dir.path().join("samples");
    ok(&["generate", "--checkpoint", s(&ckpt), "--out", s(&samples), "--format", "png"]);
    let mut names: Vec<_> = std::fs::read_dir(&samples).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["sample_0000.png", "sample_0001.png", "sample_0002.png"]);
    let img = load_image(&samples.join("sample_0000.png")).unwrap();
    assert_eq!((img.width(), img.height()), (8, 8));

    let empty = dir.path().join("none");
    ok(&["generate", "--checkpoint", s(&ckpt), "--out", s(&empty), "--n", "0"]);
    assert_eq!(std::fs::read_dir(&empty).map(|d| d.count()).unwrap_or(0), 0);

    let report_path = dir.path().join("report.json");
    let json = ok(&["evaluate", "--checkpoint", s(&ckpt), "--n", "32", "--split-half", "--out", s(&report_path)]);
    assert!(json.trim_start().starts_with("{\n  \"note\""), "{json}");
    let report: EvaluationReport = serde_json::from_str(&json).unwrap();
    assert_eq!(report.n_samples, 32);
    assert_eq!(report.checkpoint_epoch, 2);
    assert!(report.frechet.is_finite() && report.frechet >= 0.0);
    assert!(report.split_half_baseline.is_some());
    assert_eq!(std::fs::read_to_string(&report_path).unwrap(), json);
    assert_eq!(ok(&["evaluate", "--checkpoint", s(&ckpt), "--n", "32", "--split-half"]), json);
}

#[test]
fn resume_extends_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_tiny(dir.path());
    let conf = dir.path().join("longer.conf");
    std::fs::write(&conf, TINY.replace("epochs = 2", "epochs = 3")).unwrap();
    ok(&["train", "--config", s(&conf), "--out", s(&run), "--resume"]);
    assert!(run.join("checkpoints/epoch_0003.ckpt").is_file());
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().last().unwrap().starts_with("3,"));
}

#[test]
fn preprocess_equalizes_and_excludes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    std::fs::create_dir(&input).unwrap();
    save_image(&GrayImage::filled(4, 4, 77).unwrap(), &input.join("flat.pgm"), ImageFormat::Pgm).unwrap();
    save_image(&GrayImage::filled(4, 4, 3).unwrap(), &input.join("skip.png"), ImageFormat::Png).unwrap();
    let exclude = dir.path().join("exclude.txt");
    std::fs::write(&exclude, "skip.png\n").unwrap();

    let out1 = dir.path().join("out1");
    let out2 = dir.path().join("out2");
    for out in [&out1, &out2] {
        ok(&["preprocess", "--input", s(&input), "--out", s(out), "--he", "--exclude", s(&exclude)]);
    }
    let flat = load_image(&out1.join("flat.pgm")).unwrap();
    assert!(flat.pixels().iter().all(|&p| p == 255));
    assert!(!out1.join("skip.pgm").exists());
    let manifest = std::fs::read_to_string(out1.join("manifest.json")).unwrap();
    assert_eq!(manifest, std::fs::read_to_string(out2.join("manifest.json")).unwrap());
    assert!(!manifest.contains("\"file\": \"skip"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_conf = dir.path().join("bad.conf");
    std::fs::write(&bad_conf, "epochs = 1\nbogus = 2\n").unwrap();
    let out = qigl(&["train", "--config", s(&bad_conf)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.conf:2"));

    assert_eq!(qigl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qigl(&["train", "--loss", "hinge"]).status.code(), Some(1));
    assert_eq!(qigl(&["--help"]).status.code(), Some(0));

    let missing = dir.path().join("nothing.ckpt");
    assert_eq!(qigl(&["evaluate", "--checkpoint", s(&missing)]).status.code(), Some(2));
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let conf = dir.path().join("dir.conf");
    std::fs::write(&conf, format!("data_dir = {}\n", empty.display())).unwrap();
    let out = qigl(&["train", "--config", s(&conf), "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
