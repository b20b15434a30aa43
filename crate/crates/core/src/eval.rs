//! Downstream evaluation and training-cost accounting.

use std::collections::BTreeMap;
use std::io::{self, Write};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseLayer;

fn check_split(x: ArrayView2<'_, f64>, y: &[usize], what: &str) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Input(format!("{what} split is empty")));
    }
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "{what} split has {} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

/// Majority label among the `k` nearest training rows (Euclidean).
/// Distance ties go to the lower training index, vote ties to the lower label.
pub fn knn_predict(train_x: ArrayView2<'_, f64>, train_y: &[usize], query: &[f64], k: usize) -> usize {
    let mut dist: Vec<(f64, usize)> = train_x
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let d: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, i)
        })
        .collect();
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, by_dist);
    }
    let classes = train_y.iter().max().map_or(0, |&c| c + 1);
    let mut votes = vec![0usize; classes];
    for &(_, i) in &dist[..k] {
        votes[train_y[i]] += 1;
    }
    // max_by_key keeps the last maximum; iterate in reverse so the lowest label wins
    (0..classes).rev().max_by_key(|&c| votes[c]).unwrap_or(0)
}

/// Fraction of test rows whose k-NN vote matches their label.
pub fn knn_accuracy(
    train_x: ArrayView2<'_, f64>,
    train_y: &[usize],
    test_x: ArrayView2<'_, f64>,
    test_y: &[usize],
    k: usize,
) -> Result<f64> {
    check_split(train_x, train_y, "training")?;
    check_split(test_x, test_y, "test")?;
    if k == 0 || k > train_x.nrows() {
        return Err(Error::Config(format!("k = {k} must be in 1..={}", train_x.nrows())));
    }
    if train_x.ncols() != test_x.ncols() {
        return Err(Error::Shape(format!(
            "train has {} features, test {}",
            train_x.ncols(),
            test_x.ncols()
        )));
    }
    let hits = test_x
        .rows()
        .into_iter()
        .zip(test_y)
        .filter(|(row, &y)| {
            let q: Vec<f64> = row.to_vec();
            knn_predict(train_x, train_y, &q, k) == y
        })
        .count();
    Ok(hits as f64 / test_y.len() as f64)
}

/// Multinomial logistic regression fitted by full-batch gradient descent
/// from a zero initialization; returns test accuracy.
///
/// Equal scores are resolved towards the most frequent training class, then
/// the lower label, so an unfitted model predicts the training majority.
pub fn linear_probe_accuracy(
    train_x: ArrayView2<'_, f64>,
    train_y: &[usize],
    test_x: ArrayView2<'_, f64>,
    test_y: &[usize],
    epochs: usize,
    lr: f64,
) -> Result<f64> {
    check_split(train_x, train_y, "training")?;
    check_split(test_x, test_y, "test")?;
    if train_x.ncols() != test_x.ncols() {
        return Err(Error::Shape("train/test feature counts differ".into()));
    }
    let classes = train_y.iter().chain(test_y).max().map_or(1, |&c| c + 1);
    let (n, d) = train_x.dim();
    let mut weights = Array2::<f64>::zeros((d, classes));
    let mut bias = vec![0.0; classes];
    let mut counts = vec![0usize; classes];
    for &y in train_y {
        counts[y] += 1;
    }

    let scores = |x: &[f64], w: &Array2<f64>, b: &[f64]| -> Vec<f64> {
        (0..classes)
            .map(|c| b[c] + x.iter().enumerate().map(|(j, v)| v * w[[j, c]]).sum::<f64>())
            .collect()
    };

    for epoch in 0..epochs {
        let mut grad_w = Array2::<f64>::zeros((d, classes));
        let mut grad_b = vec![0.0; classes];
        for (row, &y) in train_x.rows().into_iter().zip(train_y) {
            let x = row.to_vec();
            let s = scores(&x, &weights, &bias);
            let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = s.iter().map(|v| (v - max).exp()).collect();
            let z: f64 = exp.iter().sum();
            for c in 0..classes {
                let p = exp[c] / z - if c == y { 1.0 } else { 0.0 };
                grad_b[c] += p;
                for (j, v) in x.iter().enumerate() {
                    grad_w[[j, c]] += p * v;
                }
            }
        }
        let scale = lr / n as f64;
        weights.scaled_add(-scale, &grad_w);
        for (b, g) in bias.iter_mut().zip(&grad_b) {
            *b -= scale * g;
        }
        if !weights.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                loss: f64::NAN,
            });
        }
    }

    let hits = test_x
        .rows()
        .into_iter()
        .zip(test_y)
        .filter(|(row, &y)| {
            let s = scores(&row.to_vec(), &weights, &bias);
            let pred = (0..classes)
                .max_by(|&a, &b| s[a].total_cmp(&s[b]).then(counts[a].cmp(&counts[b])).then(b.cmp(&a)))
                .unwrap_or(0);
            pred == y
        })
        .count();
    Ok(hits as f64 / test_y.len() as f64)
}

/// Stored connections across both layers.
pub fn count_params(w1: &SparseLayer, w2: &SparseLayer) -> usize {
    w1.nnz() + w2.nnz()
}

/// Training cost under a fixed counting convention:
/// a forward pass costs `2 * (nnz1 + nnz2) + hidden` per sample (one multiply
/// and one add per connection, one activation per hidden unit), a backward
/// pass twice that, so one training visit of a sample costs three forward
/// passes. Topology bookkeeping is not counted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub params: usize,
    pub flops_forward_per_sample: u64,
    pub flops_total: u64,
    pub epochs: usize,
    pub samples: usize,
    pub steps_per_epoch: usize,
    pub model: String,
}

pub const COST_MODEL: &str =
    "forward = 2*(nnz1+nnz2) + hidden per sample; backward = 2*forward; total = 3*forward*samples*epochs";

pub fn cost_report(
    nnz_encoder: usize,
    nnz_decoder: usize,
    hidden: usize,
    samples: usize,
    epochs: usize,
    steps_per_epoch: usize,
) -> CostReport {
    let forward = 2 * (nnz_encoder + nnz_decoder) as u64 + hidden as u64;
    CostReport {
        params: nnz_encoder + nnz_decoder,
        flops_forward_per_sample: forward,
        flops_total: 3 * forward * samples as u64 * epochs as u64,
        epochs,
        samples,
        steps_per_epoch,
        model: COST_MODEL.to_string(),
    }
}

pub fn count_flops(
    w1: &SparseLayer,
    w2: &SparseLayer,
    samples: usize,
    epochs: usize,
    steps_per_epoch: usize,
) -> CostReport {
    cost_report(w1.nnz(), w2.nnz(), w1.n_cols(), samples, epochs, steps_per_epoch)
}

/// Accuracies of one method on one `(dataset, K)` cell across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub dataset: String,
    pub k: usize,
    pub accuracies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: String,
    pub dataset: String,
    pub k: usize,
    pub mean: f64,
    /// Population standard deviation over seeds (0 for a single seed).
    pub std: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreBoard {
    pub cells: Vec<CellSummary>,
    /// Number of `(dataset, K)` cells in which each method had the best mean.
    pub scores: BTreeMap<String, usize>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Summarizes every cell and awards one point per `(dataset, K)` to each
/// method whose mean accuracy equals the best mean there.
pub fn aggregate_scores(results: &[CellResult]) -> ScoreBoard {
    let cells: Vec<CellSummary> = results
        .iter()
        .map(|r| {
            let (mean, std) = mean_std(&r.accuracies);
            CellSummary {
                method: r.method.clone(),
                dataset: r.dataset.clone(),
                k: r.k,
                mean,
                std,
                runs: r.accuracies.len(),
            }
        })
        .collect();

    let mut scores: BTreeMap<String, usize> = cells.iter().map(|c| (c.method.clone(), 0)).collect();
    let mut best: BTreeMap<(&str, usize), f64> = BTreeMap::new();
    for c in &cells {
        let e = best.entry((c.dataset.as_str(), c.k)).or_insert(f64::NEG_INFINITY);
        if c.mean > *e {
            *e = c.mean;
        }
    }
    for c in &cells {
        if c.mean == best[&(c.dataset.as_str(), c.k)] {
            *scores.get_mut(&c.method).expect("seeded above") += 1;
        }
    }
    ScoreBoard { cells, scores }
}

impl ScoreBoard {
    /// `method,dataset,K,mean,std` with a header.
    pub fn write_table<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "method,dataset,K,mean,std")?;
        for c in &self.cells {
            writeln!(out, "{},{},{},{},{}", c.method, c.dataset, c.k, c.mean, c.std)?;
        }
        Ok(())
    }
}
