//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wast_core::config::LossReduction;
use wast_core::TrainConfig;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

pub struct Dense {
    pub hidden: Array2<f64>,
    pub output: Array2<f64>,
    pub loss: f64,
    pub grad_w1: Array2<f64>,
    pub grad_w2: Array2<f64>,
}

pub fn dense_pass(w1: &Array2<f64>, w2: &Array2<f64>, x: &Array2<f64>, t: &Array2<f64>) -> Dense {
    let b = x.nrows() as f64;
    let hidden = x.dot(w1).mapv(|z| 1.0 / (1.0 + (-z).exp()));
    let output = hidden.dot(w2);
    let res = &output - t;
    let loss = res.mapv(|r| r * r).sum() / b;
    let d_out = res * (2.0 / b);
    let grad_w2 = hidden.t().dot(&d_out);
    let d_hidden = d_out.dot(&w2.t()) * hidden.mapv(|a| a * (1.0 - a));
    let grad_w1 = x.t().dot(&d_hidden);
    Dense {
        hidden,
        output,
        loss,
        grad_w1,
        grad_w2,
    }
}

/// Dense reference for full-batch training at zero sparsity: momentum SGD,
/// dense importance, and drop-and-regrow realised as zeroing the lowest-scored
/// cells (weight and velocity) since every vacated cell is refilled at zero.
pub struct DenseReference {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    v1: Array2<f64>,
    v2: Array2<f64>,
    imp_in: Vec<f64>,
    imp_out: Vec<f64>,
}

impl DenseReference {
    pub fn new(w1: Array2<f64>, w2: Array2<f64>) -> Self {
        let m = w1.nrows();
        Self {
            v1: Array2::zeros(w1.dim()),
            v2: Array2::zeros(w2.dim()),
            w1,
            w2,
            imp_in: vec![0.0; m],
            imp_out: vec![0.0; m],
        }
    }

    /// One full-batch step; returns the loss before the update.
    pub fn step(&mut self, x: &Array2<f64>, cfg: &TrainConfig) -> f64 {
        let d = dense_pass(&self.w1, &self.w2, x, x);
        let scale = match cfg.loss_reduction {
            LossReduction::FeatureMean => 1.0 / x.ncols() as f64,
            LossReduction::FeatureSum => 1.0,
        };
        self.v1 = &self.v1 * cfg.momentum + &d.grad_w1 * scale;
        self.v2 = &self.v2 * cfg.momentum + &d.grad_w2 * scale;
        self.w1 = &self.w1 - &self.v1 * cfg.lr;
        self.w2 = &self.w2 - &self.v2 * cfg.lr;

        let per_sample = (&d.output - x) * 2.0;
        let g = per_sample.mapv(f64::abs).mean_axis(Axis(0)).unwrap();
        let lambda = cfg.lambda;
        for i in 0..x.ncols() {
            let row: f64 = self.w1.row(i).iter().map(|w| w.abs()).sum();
            let col: f64 = self.w2.column(i).iter().map(|w| w.abs()).sum();
            self.imp_in[i] += lambda * g[i] + (1.0 - lambda) * row;
            self.imp_out[i] += lambda * g[i] + (1.0 - lambda) * col;
        }

        let rows = self.imp_in.clone();
        zero_lowest(&mut self.w1, &mut self.v1, |r, _| rows[r], cfg.alpha);
        let cols = self.imp_out.clone();
        zero_lowest(&mut self.w2, &mut self.v2, |_, c| cols[c], cfg.alpha);
        d.loss
    }
}

fn zero_lowest(w: &mut Array2<f64>, v: &mut Array2<f64>, imp: impl Fn(usize, usize) -> f64, alpha: f64) {
    let mut cells: Vec<(f64, usize, usize)> = w
        .indexed_iter()
        .map(|((r, c), x)| (x.abs() * imp(r, c), r, c))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let count = (alpha * cells.len() as f64 + 1e-9).floor() as usize;
    for &(_, r, c) in &cells[..count] {
        w[[r, c]] = 0.0;
        v[[r, c]] = 0.0;
    }
}

/// All-pairs k-NN: full sort of every training row by (distance, index),
/// vote over the first `k`, lowest label on vote ties.
pub fn brute_force_knn_accuracy(
    train_x: ArrayView2<'_, f64>,
    train_y: &[usize],
    test_x: ArrayView2<'_, f64>,
    test_y: &[usize],
    k: usize,
) -> f64 {
    let classes = train_y.iter().max().unwrap() + 1;
    let mut hits = 0;
    for (q, &y) in test_x.outer_iter().zip(test_y) {
        let mut all: Vec<(f64, usize)> = train_x
            .outer_iter()
            .enumerate()
            .map(|(i, r)| ((&r - &q).mapv(|d| d * d).sum(), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0; classes];
        for &(_, i) in &all[..k] {
            votes[train_y[i]] += 1;
        }
        let best = *votes.iter().max().unwrap();
        let pred = votes.iter().position(|&v| v == best).unwrap();
        hits += usize::from(pred == y);
    }
    hits as f64 / test_y.len() as f64
}

/// Mean plus and minus three standard deviations of a binomial count.
pub fn three_sigma(trials: usize, p: f64) -> (f64, f64) {
    let mean = trials as f64 * p;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    (mean - 3.0 * sd, mean + 3.0 * sd)
}
