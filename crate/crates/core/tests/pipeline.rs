use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wast_core::data::{load_any, load_csv, load_libsvm, split, standardize, synth_informative, LabelColumn};
use wast_core::report::Run;
use wast_core::{RunReport, SynthParams, TrainConfig};

fn small_fixture() -> (wast_core::Dataset, wast_core::Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = SynthParams {
        samples: 300,
        features: 30,
        informative: 4,
        ..SynthParams::madelon_like()
    };
    let data = synth_informative(params, &mut rng).unwrap();
    let (mut train, mut test) = split(&data, 0.8, &mut rng).unwrap();
    standardize(&mut train, &mut [&mut test]).unwrap();
    (train, test)
}

fn small_config() -> TrainConfig {
    TrainConfig {
        hidden: 16,
        batch: 32,
        epochs: 3,
        eval_k: Some(4),
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let (train, test) = small_fixture();
    let cfg = small_config();
    let run = || {
        Run {
            config: &cfg,
            name: "synth",
            train: &train,
            test: Some(&test),
            ks: &[4, 8],
        }
        .execute()
        .unwrap()
        .report
    };
    let (mut a, mut b) = (run(), run());
    a.wall_clock_secs = 0.0;
    b.wall_clock_secs = 0.0;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.history.len(), 3);
    assert_eq!(a.method, "wast");
    assert_eq!(a.selected[&4].len(), 4);
    assert!(a.recovery.contains_key(&8) && a.accuracy.contains_key(&8));
    assert_eq!(a.topology_steps, 3 * 8);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    a.save(&path).unwrap();
    assert_eq!(RunReport::load(&path).unwrap(), a);
    assert!(a.history_csv().starts_with("epoch,loss,accuracy,precision_at_k\n"));
}

#[test]
fn different_seeds_change_the_run() {
    let (train, test) = small_fixture();
    let a = small_config();
    let b = TrainConfig {
        seed: 4,
        ..small_config()
    };
    let ra = Run {
        config: &a,
        name: "s",
        train: &train,
        test: Some(&test),
        ks: &[4],
    }
    .execute()
    .unwrap();
    let rb = Run {
        config: &b,
        name: "s",
        train: &train,
        test: Some(&test),
        ks: &[4],
    }
    .execute()
    .unwrap();
    assert_ne!(ra.trained.importance, rb.trained.importance);
}

#[test]
fn qs_preset_updates_once_per_epoch() {
    let (train, _) = small_fixture();
    let cfg = TrainConfig {
        epochs: 2,
        hidden: 16,
        batch: 32,
        ..TrainConfig::qs()
    };
    let out = Run {
        config: &cfg,
        name: "s",
        train: &train,
        test: None,
        ks: &[4],
    }
    .execute()
    .unwrap();
    assert_eq!(out.report.method, "qs");
    assert_eq!(out.report.topology_steps, 2);
    assert!(out.report.accuracy.is_empty());
}

#[test]
fn csv_and_libsvm_loaders_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let svm = dir.path().join("d.svm");
    fs::write(&csv, "a,b,c,label\n1.5,0,2,-1\n0,3,0,1\n").unwrap();
    fs::write(&svm, "-1 1:1.5 3:2\n1 2:3\n").unwrap();

    let from_csv = load_csv(&csv, true, LabelColumn::Last).unwrap();
    let from_svm = load_libsvm(&svm).unwrap();
    assert_eq!(from_csv.x, from_svm.x);
    assert_eq!(from_csv.labels, Some(vec![0, 1]));
    assert_eq!(from_csv.labels, from_svm.labels);
    assert_eq!(load_any(&svm, false, LabelColumn::None).unwrap().x, from_svm.x);

    fs::write(&csv, "1,2\n3,x\n").unwrap();
    let err = load_csv(&csv, false, LabelColumn::None).unwrap_err().to_string();
    assert!(err.contains("d.csv:2"), "{err}");
    assert!(load_csv(&dir.path().join("missing.csv"), false, LabelColumn::None)
        .unwrap_err()
        .to_string()
        .contains("missing.csv"));
}

#[test]
fn synthetic_export_round_trips() {
    let (train, _) = small_fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.csv");
    train.write_csv(&path).unwrap();
    let back = load_csv(&path, true, LabelColumn::Last).unwrap();
    assert_eq!(back.labels, train.labels);
    for (a, b) in back.x.iter().zip(train.x.iter()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}
