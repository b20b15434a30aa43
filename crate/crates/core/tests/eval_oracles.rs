mod common;

use common::brute_force_knn_accuracy;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wast_core::data::{split, standardize, synth_informative};
use wast_core::eval::{aggregate_scores, cost_report, knn_accuracy, linear_probe_accuracy, CellResult};
use wast_core::SynthParams;

#[test]
fn knn_matches_brute_force_on_integer_grids() {
    // Integer coordinates make distance ties common, exercising the tie rules.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let n_train = rng.random_range(5..60);
        let n_test = rng.random_range(1..30);
        let d = rng.random_range(1..4);
        let classes = rng.random_range(2..4);
        let tx = Array2::from_shape_fn((n_train, d), |_| f64::from(rng.random_range(0..3)));
        let qx = Array2::from_shape_fn((n_test, d), |_| f64::from(rng.random_range(0..3)));
        let ty: Vec<usize> = (0..n_train).map(|_| rng.random_range(0..classes)).collect();
        let qy: Vec<usize> = (0..n_test).map(|_| rng.random_range(0..classes)).collect();
        for k in [1, 2, 4, 5] {
            let k = k.min(n_train);
            assert_eq!(
                knn_accuracy(tx.view(), &ty, qx.view(), &qy, k).unwrap(),
                brute_force_knn_accuracy(tx.view(), &ty, qx.view(), &qy, k)
            );
        }
    }
}

fn fixture(cluster_sep: f64, seed: u64) -> (wast_core::Dataset, wast_core::Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = SynthParams {
        samples: 1000,
        features: 40,
        informative: 5,
        cluster_sep,
        ..SynthParams::madelon_like()
    };
    let data = synth_informative(params, &mut rng).unwrap();
    let (mut train, mut test) = split(&data, 0.6, &mut rng).unwrap();
    standardize(&mut train, &mut [&mut test]).unwrap();
    (train, test)
}

#[test]
fn zero_separation_gives_chance_knn_accuracy() {
    let (train, test) = fixture(0.0, 4);
    let truth = train.informative.clone().unwrap();
    let acc = knn_accuracy(
        train.columns(&truth).view(),
        train.labels_or_err().unwrap(),
        test.columns(&truth).view(),
        test.labels_or_err().unwrap(),
        5,
    )
    .unwrap();
    // 400 balanced test points: chance is 0.5 with sd 0.025.
    assert!((acc - 0.5).abs() < 0.1, "accuracy {acc}");
}

#[test]
fn informative_columns_beat_noise_columns() {
    let (train, test) = fixture(2.0, 6);
    let truth = train.informative.clone().unwrap();
    let noise: Vec<usize> = (0..train.features()).filter(|f| !truth.contains(f)).take(5).collect();
    let eval = |cols: &[usize]| {
        knn_accuracy(
            train.columns(cols).view(),
            train.labels_or_err().unwrap(),
            test.columns(cols).view(),
            test.labels_or_err().unwrap(),
            5,
        )
        .unwrap()
    };
    assert!(eval(&truth) > 0.95);
    assert!((eval(&noise) - 0.5).abs() < 0.1);
}

#[test]
fn linear_probe_learns_signal_and_not_permuted_labels() {
    let (train, test) = fixture(1.0, 8);
    let truth = train.informative.clone().unwrap();
    let (tx, qx) = (train.columns(&truth), test.columns(&truth));
    let ty = train.labels_or_err().unwrap();
    let qy = test.labels_or_err().unwrap();
    let fitted = linear_probe_accuracy(tx.view(), ty, qx.view(), qy, 200, 0.5).unwrap();
    assert!(fitted > 0.9, "probe accuracy {fitted}");

    let mut shuffled = ty.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let permuted = linear_probe_accuracy(tx.view(), &shuffled, qx.view(), qy, 200, 0.5).unwrap();
    assert!((permuted - 0.5).abs() < 0.1, "permuted probe accuracy {permuted}");
}

#[test]
fn unfitted_probe_predicts_training_majority() {
    let tx = Array2::zeros((5, 2));
    let qx = Array2::zeros((4, 2));
    let acc = linear_probe_accuracy(tx.view(), &[1, 1, 1, 0, 0], qx.view(), &[1, 1, 0, 1], 0, 0.1).unwrap();
    assert_eq!(acc, 0.75);
}

#[test]
fn sweep_grid_scores() {
    let mut cells = Vec::new();
    for method in ["wast", "qs"] {
        for k in [25, 50, 75] {
            cells.push(CellResult {
                method: method.into(),
                dataset: "synth".into(),
                k,
                accuracies: vec![if method == "wast" { 0.9 } else { 0.8 }; 5],
            });
        }
    }
    let board = aggregate_scores(&cells);
    assert_eq!(board.cells.len(), 6);
    assert_eq!(board.scores["wast"], 3);
    assert_eq!(board.scores["qs"], 0);

    let single = aggregate_scores(&cells[..3]);
    assert_eq!(single.scores["wast"], 3);
    let one_seed = aggregate_scores(&[CellResult {
        accuracies: vec![0.7],
        ..cells[0].clone()
    }]);
    assert_eq!(one_seed.cells[0].std, 0.0);
}

#[test]
fn flops_are_batch_size_invariant() {
    let a = cost_report(100, 100, 10, 1000, 10, 8);
    let b = cost_report(100, 100, 10, 1000, 10, 100);
    assert_eq!(a.flops_total, b.flops_total);
    assert_eq!(a.flops_forward_per_sample, 2 * 200 + 10);
    assert_eq!(a.flops_total, 3 * 410 * 1000 * 10);
}
