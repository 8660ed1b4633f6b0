use std::path::Path;

use gastridge::config::RunConfig;
use gastridge::cycle::Segment;
use gastridge::reference::ReferenceTrace;
use gastridge::{workflow, Error};

fn config(text: &str) -> RunConfig {
    RunConfig::from_toml(text).unwrap()
}

fn walk_cycle(cfg: &RunConfig, dir: &Path, name: &str, seed: u64, secs: f64) -> std::path::PathBuf {
    let seg = Segment::RandomWalk {
        duration_s: secs,
        max_c_rate: 2.0,
        regen_c_rate: 0.8,
        max_hold_s: 20.0,
        seed,
    };
    workflow::cmd_build_cycle(cfg, name, &[seg], dir).unwrap()
}

const PLANTED: &str = r#"
seed = 7
[surrogate]
noise_std = 0.0
planted_terms = [
  { family = "pol", exponents = [1, 0, 0, 0], coefficient = 0.6 },
  { family = "pol", exponents = [0, 1, 0, 0], coefficient = 0.05 },
  { family = "cos", exponents = [0, 0, 1, 0], coefficient = 0.04 },
]
"#;

#[test]
fn surrogate_pipeline_recovers_planted_terms() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = config(PLANTED);
    let cycles = vec![
        walk_cycle(&cfg, d, "a", 1, 1500.0),
        walk_cycle(&cfg, d, "b", 2, 800.0),
        walk_cycle(&cfg, d, "c", 3, 800.0),
    ];
    let names = workflow::cmd_gen_data(&cfg, &cycles, d).unwrap();
    assert_eq!(names, ["a", "b", "c"]);
    assert!(d.join(workflow::NORMALIZATION_FILE).is_file());

    let t = workflow::cmd_train(&cfg, d, &["a".into()], "b", d).unwrap();
    assert!(t.feasible());
    let model = workflow::load_model(&t.model_path).unwrap();
    assert_eq!(model.active_count, 3);
    assert_eq!(model.metadata.cycle_names, ["a"]);
    assert_eq!(model.metadata.validation_cycle.as_deref(), Some("b"));
    assert_eq!(model.metadata.timestamp, None);

    let reports = workflow::cmd_evaluate(&t.model_path, d, &["c".into()], d).unwrap();
    assert_eq!(reports.len(), 2);
    for r in &reports {
        assert!(r.hybrid.rrr_percent.unwrap() > 99.0);
    }
    let text = std::fs::read_to_string(d.join(workflow::METRICS_FILE)).unwrap();
    assert_eq!(text.lines().count(), 3);

    let rank = workflow::cmd_rank(&t.model_path, d, "c", d).unwrap();
    assert_eq!(rank.features.len(), 3);
    assert!((rank.features[2].cumulative_info - 1.0).abs() < 1e-12);
}

#[test]
fn ingested_references_are_used_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let refs = d.join("refs");
    std::fs::create_dir(&refs).unwrap();
    let mut cfg = config("seed = 1");
    let cycle = walk_cycle(&cfg, d, "x", 9, 200.0);
    let trace_path = workflow::cmd_simulate(&cfg, &cycle, d).unwrap();
    let base = gastridge::lfm::VoltageTrace::load_csv(&trace_path).unwrap();
    let reference = ReferenceTrace {
        t: base.t.clone(),
        current: base.current.clone(),
        v_ref: base.v_lfm.iter().map(|v| v + 0.01).collect(),
        source: gastridge::reference::SourceTag::Ingested,
    };
    reference.save_csv(&refs.join("x.csv")).unwrap();
    cfg.paths.references_dir = Some(refs);
    workflow::cmd_gen_data(&cfg, &[cycle], d).unwrap();
    let (_, e_r) = workflow::load_pair(d, "x").unwrap();
    assert!(e_r.iter().all(|e| (e - 0.01).abs() < 1e-12));
    assert!(!d.join(workflow::NORMALIZATION_FILE).exists());
}

#[test]
fn train_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = config(PLANTED);
    let err = workflow::cmd_train(&cfg, d, &["a".into()], "a", d).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    let err = workflow::cmd_train(&cfg, d, &["missing".into()], "b", d).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
    let unseeded = config("");
    assert!(matches!(
        workflow::cmd_train(&unseeded, d, &["a".into()], "b", d),
        Err(Error::Config(_))
    ));
}

#[test]
fn perturbed_surrogate_improves_held_out_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = config(include_str!("../../../configs/perturbed.toml"));
    let cycles = vec![
        walk_cycle(&cfg, d, "train", 1, 3600.0),
        walk_cycle(&cfg, d, "valid", 2, 1800.0),
        walk_cycle(&cfg, d, "test", 3, 1800.0),
    ];
    workflow::cmd_gen_data(&cfg, &cycles, d).unwrap();
    // nothing planted, so train fits its own normalization
    assert!(!d.join(workflow::NORMALIZATION_FILE).exists());
    let t = workflow::cmd_train(&cfg, d, &["train".into()], "valid", d).unwrap();
    let reports = workflow::cmd_evaluate(&t.model_path, d, &["test".into()], d).unwrap();
    let free = reports
        .iter()
        .find(|r| r.hybrid.mode == gastridge::analysis::EvalMode::FreeRunning)
        .unwrap();
    assert!(free.hybrid.rrr_percent.unwrap() >= 50.0, "{:?}", free.hybrid);
}
