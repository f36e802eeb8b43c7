use qigl::config::{DataSource, Overrides, RunConfig};
use qigl::Error;
use qigl_core::features::AssignmentMode;
use qigl_core::imaging::SynthKind;
use qigl_core::training::LossMode;

#[test]
fn defaults_match_the_published_setup() {
    let cfg = RunConfig::parse("", "empty").unwrap();
    let t = &cfg.train;
    assert_eq!(t.batch_size, 8);
    assert_eq!((t.lr_generator, t.lr_critic), (0.3, 0.05));
    assert_eq!((t.n_qubits, t.depth, t.n_subgens), (5, 6, 8));
    assert_eq!(t.n_features(), 40);
    assert_eq!(cfg.variance_threshold, 0.98);
    let text = cfg.to_canonical_string();
    for line in ["batch_size = 8", "lr_generator = 0.3", "lr_critic = 0.05", "n_qubits = 5", "depth = 6", "n_subgens = 8"] {
        assert!(text.lines().any(|l| l == line), "missing {line}");
    }
}

#[test]
fn canonical_text_round_trips() {
    let src = "seed = 3\nloss_mode = bce\nassignment_mode = conventional\nlr_critic = 1e-3\nsynth_kind = bars\n";
    let cfg = RunConfig::parse(src, "t").unwrap();
    assert_eq!(cfg.train.loss_mode, LossMode::Bce);
    assert!(matches!(cfg.data, DataSource::Synthetic(s) if s.kind == SynthKind::Bars));
    let again = RunConfig::parse(&cfg.to_canonical_string(), "canonical").unwrap();
    assert_eq!(again, cfg);
    assert_eq!(again.hash(), cfg.hash());
    assert_eq!(cfg.hash().len(), 64);
}

#[test]
fn hash_ignores_layout_but_not_values() {
    let a = RunConfig::parse("seed = 1\nepochs = 4", "a").unwrap();
    let b = RunConfig::parse("# comment\n\n  epochs=4\nseed   =  1\nout_dir = elsewhere\n", "b").unwrap();
    let c = RunConfig::parse("seed = 2\nepochs = 4", "c").unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
}

fn config_error(text: &str) -> (Option<usize>, String) {
    match RunConfig::parse(text, "f.conf") {
        Err(Error::Config { line, message, .. }) => (line, message),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn diagnostics_name_the_line() {
    assert_eq!(config_error("seed = 1\nepochz = 3").0, Some(2));
    assert!(config_error("seed = 1\nepochz = 3").1.contains("epochz"));
    assert_eq!(config_error("# x\nbatch_size = eight").0, Some(2));
    assert_eq!(config_error("seed = 1\nseed = 2").0, Some(2));
    assert_eq!(config_error("just words").0, Some(1));
    assert_eq!(config_error("data_dir = d\nsynth_n = 3").0, Some(2));
    assert_eq!(config_error("loss_mode = hinge").0, Some(1));
    let (line, msg) = config_error("lr_generator = -1");
    assert_eq!(line, None);
    assert!(msg.contains("learning rate"));
    assert!(config_error("adam_beta1 = 0.9999").1.contains("beta1"));
    assert!(config_error("variance_threshold = 1.5").1.contains("variance_threshold"));
    let rendered = RunConfig::parse("a = 1", "f.conf").unwrap_err().to_string();
    assert!(rendered.starts_with("f.conf:1: "), "{rendered}");
}

#[test]
fn overrides_apply_and_revalidate() {
    let mut cfg = RunConfig::default();
    Overrides {
        seed: Some(9),
        out_dir: Some("x".into()),
        he: true,
        assignment: Some(AssignmentMode::Conventional),
        loss: Some(LossMode::Bce),
    }
    .apply(&mut cfg)
    .unwrap();
    assert_eq!(cfg.train.seed, 9);
    assert!(cfg.train.he_enabled);
    assert_eq!(cfg.train.assignment_mode, AssignmentMode::Conventional);
    assert_eq!(cfg.out_dir, std::path::PathBuf::from("x"));
    assert!(cfg.to_canonical_string().contains("assignment_mode = conventional"));
}

#[test]
fn shipped_example_config_parses() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk-scale.conf");
    let cfg = RunConfig::from_file(&path).unwrap();
    assert_eq!(cfg.train.n_features(), 10);
    assert!(!cfg.log_wall_time);
}
