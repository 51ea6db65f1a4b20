mod common;

use std::fs;
use std::path::Path;

use abac_miner::io::read_log_file;
use abac_miner::metrics::{evaluate, WscWeights};
use abac_miner::mining::{KChoice, KCriterion};
use abac_miner::model::{AttributeSchema, Policy};
use abac_miner::pipeline::{self, EvalSplit, ExperimentConfig, PolicySource, RunManifest};
use abac_miner::synth::EntityCounts;
use abac_miner::Error;
use common::{reference_metrics, rule};

fn fixture_policy(dir: &Path) -> std::path::PathBuf {
    let mut b = AttributeSchema::builder();
    for i in 0..3 {
        let vals: Vec<String> = (0..3).map(|v| format!("v{v}")).collect();
        b = b.user(&format!("ua{i}"), vals.clone()).object(&format!("oa{i}"), vals);
    }
    let schema = b.operations(["op0", "op1"]).build().unwrap();
    let policy = Policy::new(schema, vec![rule(&["ua0=v0", "oa0=v1"], &[], "op0")]).unwrap();
    let path = dir.join("truth.json");
    fs::write(&path, policy.to_json().unwrap()).unwrap();
    path
}

fn config(dir: &Path, out: &str, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        Some(PolicySource::File {
            path: fixture_policy(dir),
        }),
        seed,
    );
    c.universe.entity_counts = Some(EntityCounts {
        users: 30,
        objects: 30,
        sessions: 1,
    });
    c.mining.k = KChoice::Auto { k_min: 1, k_max: 4 };
    c.mining.criterion = KCriterion::Quality { folds: 0 };
    c.output_dir = dir.join(out);
    c
}

#[test]
fn generate_then_mine_recovers_a_single_rule() {
    let dir = tempfile::tempdir().unwrap();
    let gen = pipeline::generate(&config(dir.path(), "gen", 1)).unwrap();
    let log_path = &gen.artifacts["log"];
    let log = read_log_file(log_path, Some(&pipeline::read_schema(&gen.artifacts["schema"]).unwrap())).unwrap();
    assert_eq!(gen.log_counts["L"], 30 * 30 * 2);
    assert_eq!(gen.log_counts["L"], log.len());

    let manifest = pipeline::mine(&log, &config(dir.path(), "mine", 1)).unwrap();
    for key in ["mined_policy", "clusters", "modes", "diagnostics", "trace", "report", "manifest"] {
        assert!(manifest.artifacts[key].exists(), "{key}");
    }
    let mined = Policy::from_json(&fs::read_to_string(&manifest.artifacts["mined_policy"]).unwrap()).unwrap();
    let truth = Policy::from_json(&fs::read_to_string(dir.path().join("truth.json")).unwrap()).unwrap();
    let want = reference_metrics(&log, mined.rules());
    assert_eq!(want.f_score, 1.0);
    assert!(want.wsc <= 2.0 * (truth.rules()[0].size() as f64));
    let report = manifest.report.as_ref().unwrap();
    assert!((report.quality - want.quality).abs() < 1e-12);

    let reread = RunManifest::read(&manifest.artifacts["manifest"]).unwrap();
    assert_eq!(reread.optimal_k, manifest.optimal_k);
    let rows = pipeline::report_rows(&[reread]).unwrap();
    assert_eq!(rows[0].len(), pipeline::REPORT_HEADER.len());

    let via_files = pipeline::evaluate_files(&mined, &log, &WscWeights::default()).unwrap();
    let direct = evaluate(&mined, &log, &WscWeights::default()).unwrap();
    assert_eq!(via_files.f_score, direct.f_score);
}

#[test]
fn runs_are_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for out in ["a", "b"] {
        let mut c = config(dir.path(), out, 9);
        c.transforms.noise = Some(0.05);
        let gen = pipeline::generate(&c).unwrap();
        let log = read_log_file(&gen.artifacts["log"], None).unwrap();
        let m = pipeline::mine(&log, &c).unwrap();
        outputs.push((
            fs::read_to_string(&gen.artifacts["log"]).unwrap(),
            fs::read_to_string(&m.artifacts["mined_policy"]).unwrap(),
            fs::read_to_string(&m.artifacts["clusters"]).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn holdout_and_cross_validation_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let gen = pipeline::generate(&config(dir.path(), "gen", 2)).unwrap();
    let log = read_log_file(&gen.artifacts["log"], None).unwrap();
    for (out, split) in [
        ("holdout", EvalSplit::Holdout { test_fraction: 0.3 }),
        ("cv", EvalSplit::CrossValidation { folds: 3 }),
    ] {
        let mut c = config(dir.path(), out, 2);
        c.evaluation = split;
        let m = pipeline::mine(&log, &c).unwrap();
        let r = m.report.unwrap();
        assert!(r.f_score > 0.9, "{out}: {}", r.f_score);
    }
}

#[test]
fn overrides_follow_dotted_paths() {
    let c = ExperimentConfig::new(None, 1)
        .with_overrides(&["mining.k.auto.k_max=12", "enhance=false", "transforms.noise=0.2"])
        .unwrap();
    assert_eq!(c.mining.k, KChoice::Auto { k_min: 10, k_max: 12 });
    assert!(!c.enhance);
    assert_eq!(c.transforms.noise, Some(0.2));
    assert!(matches!(
        ExperimentConfig::new(None, 1).with_overrides(&["transforms.sparsify=0"]),
        Err(Error::InvalidFraction(_))
    ));
    assert!(ExperimentConfig::new(None, 1).with_overrides(&["no_equals_sign"]).is_err());
}

#[test]
fn cap_is_checked_by_generate() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), "gen", 1);
    c.universe.cap = 100;
    assert!(matches!(pipeline::generate(&c), Err(Error::CapExceeded { .. })));
}
