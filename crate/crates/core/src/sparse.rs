//! Edge-list sparse layers and the two-layer autoencoder passes.
//!
//! A [`SparseLayer`] stores only existing connections, sorted by `(row, col)`,
//! with a CSR-style row pointer. Forward and backward passes touch stored
//! edges only, so cost scales with `nnz` rather than with the dense grid.

use std::io::{self, Write};

use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stored connection with its optimizer state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub row: usize,
    pub col: usize,
    pub weight: f64,
    pub momentum: f64,
}

impl Edge {
    pub fn new(row: usize, col: usize, weight: f64) -> Self {
        Self {
            row,
            col,
            weight,
            momentum: 0.0,
        }
    }

    #[inline]
    pub fn position(&self) -> (usize, usize) {
        (self.row, self.col)
    }
}

/// Number of edges a `n_rows x n_cols` layer holds at sparsity `s`.
pub fn edge_budget(n_rows: usize, n_cols: usize, sparsity: f64) -> usize {
    ((1.0 - sparsity) * (n_rows * n_cols) as f64).round() as usize
}

/// Truly sparse weight matrix. Rows are the input side, columns the output side.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseLayer {
    n_rows: usize,
    n_cols: usize,
    edges: Vec<Edge>,
    /// `edges[row_ptr[i]..row_ptr[i + 1]]` are the edges leaving row `i`.
    row_ptr: Vec<usize>,
}

impl SparseLayer {
    /// Samples `round((1 - s) * n_rows * n_cols)` positions uniformly without
    /// replacement and draws weights from the Glorot-uniform range
    /// `±sqrt(6 / (n_rows + n_cols))`. Momentum starts at zero.
    pub fn init<R: Rng + ?Sized>(n_rows: usize, n_cols: usize, sparsity: f64, rng: &mut R) -> Result<Self> {
        let invalid = |reason| Error::InvalidSparsity {
            sparsity,
            n_rows,
            n_cols,
            reason,
        };
        if n_rows == 0 || n_cols == 0 {
            return Err(invalid("layer dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&sparsity) {
            return Err(invalid("sparsity must lie in [0, 1)"));
        }
        let nnz = edge_budget(n_rows, n_cols, sparsity);
        if nnz == 0 {
            return Err(invalid("no edges would remain"));
        }

        let grid = n_rows * n_cols;
        let mut cells = index::sample(rng, grid, nnz).into_vec();
        cells.sort_unstable();

        let limit = (6.0 / (n_rows + n_cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite init range");
        let edges = cells
            .into_iter()
            .map(|cell| Edge::new(cell / n_cols, cell % n_cols, dist.sample(rng)))
            .collect();
        Ok(Self::from_sorted(n_rows, n_cols, edges))
    }

    /// Builds a layer from arbitrary edges, sorting them and rejecting
    /// duplicates, out-of-range positions and non-finite values.
    pub fn from_edges(n_rows: usize, n_cols: usize, mut edges: Vec<Edge>) -> Result<Self> {
        for e in &edges {
            if e.row >= n_rows || e.col >= n_cols {
                return Err(Error::Shape(format!(
                    "edge ({}, {}) outside {n_rows}x{n_cols} grid",
                    e.row, e.col
                )));
            }
            if !e.weight.is_finite() || !e.momentum.is_finite() {
                return Err(Error::Input(format!("non-finite value on edge ({}, {})", e.row, e.col)));
            }
        }
        edges.sort_unstable_by_key(Edge::position);
        if let Some(w) = edges.windows(2).find(|w| w[0].position() == w[1].position()) {
            return Err(Error::Input(format!("duplicate edge ({}, {})", w[0].row, w[0].col)));
        }
        Ok(Self::from_sorted(n_rows, n_cols, edges))
    }

    /// Dense-matrix constructor: every entry becomes an edge, zeros included.
    pub fn from_dense(weights: ArrayView2<'_, f64>) -> Self {
        let (n_rows, n_cols) = weights.dim();
        let edges = weights.indexed_iter().map(|((r, c), &w)| Edge::new(r, c, w)).collect();
        Self::from_sorted(n_rows, n_cols, edges)
    }

    fn from_sorted(n_rows: usize, n_cols: usize, edges: Vec<Edge>) -> Self {
        let mut layer = Self {
            n_rows,
            n_cols,
            edges,
            row_ptr: Vec::new(),
        };
        layer.rebuild_index();
        layer
    }

    fn rebuild_index(&mut self) {
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        for e in &self.edges {
            row_ptr[e.row + 1] += 1;
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        self.row_ptr = row_ptr;
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.edges.len()
    }

    pub fn grid_size(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn sparsity(&self) -> f64 {
        1.0 - self.nnz() as f64 / self.grid_size() as f64
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges leaving `row`, sorted by column.
    pub fn row_edges(&self, row: usize) -> &[Edge] {
        &self.edges[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.n_rows && self.row_edges(row).binary_search_by_key(&col, |e| e.col).is_ok()
    }

    /// Row-major occupancy bitmap of the full grid.
    pub fn occupancy(&self) -> Vec<bool> {
        let mut occ = vec![false; self.grid_size()];
        for e in &self.edges {
            occ[e.row * self.n_cols + e.col] = true;
        }
        occ
    }

    pub fn row_counts(&self) -> Vec<usize> {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_cols];
        for e in &self.edges {
            counts[e.col] += 1;
        }
        counts
    }

    /// `sum_k |W[i, k]|` for every row `i`.
    pub fn abs_row_sums(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| self.row_edges(r).iter().map(|e| e.weight.abs()).sum())
            .collect()
    }

    /// `sum_k |W[k, j]|` for every column `j`.
    pub fn abs_col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols];
        for e in &self.edges {
            sums[e.col] += e.weight.abs();
        }
        sums
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.n_rows, self.n_cols));
        for e in &self.edges {
            dense[[e.row, e.col]] = e.weight;
        }
        dense
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.iter().map(|e| e.weight)
    }

    /// Removes the edges whose flag in `remove` is set; `remove` is aligned with `edges()`.
    pub(crate) fn remove_flagged(&mut self, remove: &[bool]) {
        debug_assert_eq!(remove.len(), self.edges.len());
        let mut flags = remove.iter();
        self.edges.retain(|_| !*flags.next().unwrap());
        self.rebuild_index();
    }

    /// Inserts zero-weight, zero-momentum edges at vacant `positions`.
    pub(crate) fn insert_zero_edges(&mut self, positions: &[(usize, usize)]) {
        if positions.is_empty() {
            return;
        }
        self.edges.extend(positions.iter().map(|&(r, c)| Edge::new(r, c, 0.0)));
        self.edges.sort_unstable_by_key(Edge::position);
        debug_assert!(self.edges.windows(2).all(|w| w[0].position() < w[1].position()));
        self.rebuild_index();
    }

    /// Debug dump: one `row,col,weight` line per edge, with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "row,col,weight")?;
        for e in &self.edges {
            writeln!(out, "{},{},{}", e.row, e.col, e.weight)?;
        }
        Ok(())
    }

    /// `x · W` using stored edges only. `x` has one sample per row.
    pub fn left_multiply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_rows {
            return Err(Error::Shape(format!(
                "input has {} columns, layer expects {}",
                x.ncols(),
                self.n_rows
            )));
        }
        let mut out = Array2::zeros((x.nrows(), self.n_cols));
        for (x_row, mut out_row) in x.rows().into_iter().zip(out.rows_mut()) {
            let out_row = out_row.as_slice_mut().expect("fresh array is contiguous");
            for e in &self.edges {
                out_row[e.col] += x_row[e.row] * e.weight;
            }
        }
        Ok(out)
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct BatchActivations {
    /// Encoder input (possibly noise-corrupted), `b x m`.
    pub input: Array2<f64>,
    pub hidden_pre: Array2<f64>,
    pub hidden: Array2<f64>,
    /// Reconstruction, `b x m`.
    pub output: Array2<f64>,
    /// Reconstruction target, `b x m`.
    pub target: Array2<f64>,
}

impl BatchActivations {
    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn check_pair(w1: &SparseLayer, w2: &SparseLayer) -> Result<()> {
    if w1.n_rows() != w2.n_cols() || w1.n_cols() != w2.n_rows() {
        return Err(Error::Shape(format!(
            "encoder {}x{} does not mirror decoder {}x{}",
            w1.n_rows(),
            w1.n_cols(),
            w2.n_rows(),
            w2.n_cols()
        )));
    }
    Ok(())
}

/// `output = sigmoid(input · W1) · W2` with a linear output layer.
pub fn forward(
    w1: &SparseLayer,
    w2: &SparseLayer,
    input: Array2<f64>,
    target: Array2<f64>,
) -> Result<BatchActivations> {
    check_pair(w1, w2)?;
    if input.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "input {:?} and target {:?} differ",
            input.dim(),
            target.dim()
        )));
    }
    let hidden_pre = w1.left_multiply(input.view())?;
    let hidden = hidden_pre.mapv(sigmoid);
    let output = w2.left_multiply(hidden.view())?;
    Ok(BatchActivations {
        input,
        hidden_pre,
        hidden,
        output,
        target,
    })
}

/// Batch mean of squared L2 reconstruction errors.
pub fn mse_loss(acts: &BatchActivations) -> Result<f64> {
    if acts.output.dim() != acts.target.dim() {
        return Err(Error::Shape(format!(
            "output {:?} and target {:?} differ",
            acts.output.dim(),
            acts.target.dim()
        )));
    }
    let b = acts.output.nrows();
    if b == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let total: f64 = acts
        .output
        .iter()
        .zip(acts.target.iter())
        .map(|(o, t)| (o - t) * (o - t))
        .sum();
    Ok(total / b as f64)
}

/// Per-edge gradients aligned with `edges()` of each layer, plus `dL/d output`.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub output: Array2<f64>,
}

/// Backpropagates [`mse_loss`] through the pair of layers.
pub fn backward(w1: &SparseLayer, w2: &SparseLayer, acts: &BatchActivations) -> Result<Gradients> {
    check_pair(w1, w2)?;
    let b = acts.batch_size();
    let (m, h) = (w1.n_rows(), w1.n_cols());
    if acts.input.dim() != (b, m)
        || acts.hidden.dim() != (b, h)
        || acts.output.dim() != (b, m)
        || acts.target.dim() != (b, m)
    {
        return Err(Error::State(format!(
            "activations (input {:?}, hidden {:?}) do not match a {m}x{h} autoencoder",
            acts.input.dim(),
            acts.hidden.dim()
        )));
    }
    if b == 0 {
        return Err(Error::State("empty batch".into()));
    }

    let scale = 2.0 / b as f64;
    let grad_output = (&acts.output - &acts.target) * scale;

    let mut grad_w2 = vec![0.0; w2.nnz()];
    let mut grad_w1 = vec![0.0; w1.nnz()];
    let mut delta_hidden = vec![0.0; h];

    for j in 0..b {
        let d_out = grad_output.row(j);
        let hidden = acts.hidden.row(j);
        let input = acts.input.row(j);

        delta_hidden.iter_mut().for_each(|d| *d = 0.0);
        for (g, e) in grad_w2.iter_mut().zip(w2.edges()) {
            let d = d_out[e.col];
            *g += hidden[e.row] * d;
            delta_hidden[e.row] += e.weight * d;
        }
        for (k, d) in delta_hidden.iter_mut().enumerate() {
            let a = hidden[k];
            *d *= a * (1.0 - a);
        }
        for (g, e) in grad_w1.iter_mut().zip(w1.edges()) {
            *g += input[e.row] * delta_hidden[e.col];
        }
    }

    Ok(Gradients {
        w1: grad_w1,
        w2: grad_w2,
        output: grad_output,
    })
}

/// Classical momentum: `v <- mu * v + g; w <- w - lr * v`.
///
/// The layer is left untouched if any gradient is non-finite.
pub fn sgd_momentum_step(layer: &mut SparseLayer, grads: &[f64], lr: f64, momentum: f64) -> Result<()> {
    if grads.len() != layer.nnz() {
        return Err(Error::Shape(format!(
            "{} gradients for {} edges",
            grads.len(),
            layer.nnz()
        )));
    }
    if let Some((e, &g)) = layer.edges.iter().zip(grads).find(|(_, g)| !g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            row: e.row,
            col: e.col,
            value: g,
        });
    }
    for (e, &g) in layer.edges.iter_mut().zip(grads) {
        e.momentum = momentum * e.momentum + g;
        e.weight -= lr * e.momentum;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn init_edge_counts() {
        let l = SparseLayer::init(784, 200, 0.8, &mut rng(1)).unwrap();
        assert_eq!(l.nnz(), 31360);
        let l2 = SparseLayer::init(200, 784, 0.8, &mut rng(2)).unwrap();
        assert_eq!(l.nnz() + l2.nnz(), 62720);
        assert_eq!(SparseLayer::init(4, 3, 0.0, &mut rng(3)).unwrap().nnz(), 12);
        assert_eq!(SparseLayer::init(500, 200, 0.8, &mut rng(4)).unwrap().nnz(), 20000);
    }

    #[test]
    fn init_layout_and_weights() {
        let l = SparseLayer::init(30, 20, 0.7, &mut rng(9)).unwrap();
        let limit = (6.0f64 / 50.0).sqrt();
        assert!(l.edges().windows(2).all(|w| w[0].position() < w[1].position()));
        assert!(l.edges().iter().all(|e| e.weight.abs() <= limit && e.momentum == 0.0));
        let reachable: usize = (0..l.n_rows()).map(|r| l.row_edges(r).len()).sum();
        assert_eq!(reachable, l.nnz());
        for e in l.edges() {
            assert!(l.contains(e.row, e.col));
        }
    }

    #[test]
    fn init_rejects_bad_sparsity() {
        assert!(matches!(
            SparseLayer::init(4, 3, 1.0, &mut rng(0)),
            Err(Error::InvalidSparsity { .. })
        ));
        assert!(matches!(
            SparseLayer::init(2, 2, 0.9, &mut rng(0)),
            Err(Error::InvalidSparsity { .. })
        ));
        assert!(SparseLayer::init(2, 2, -0.1, &mut rng(0)).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let a = SparseLayer::init(50, 40, 0.8, &mut rng(5)).unwrap();
        let b = SparseLayer::init(50, 40, 0.8, &mut rng(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn from_edges_rejects_duplicates() {
        let edges = vec![Edge::new(0, 1, 1.0), Edge::new(0, 1, 2.0)];
        assert!(SparseLayer::from_edges(2, 2, edges).is_err());
        assert!(SparseLayer::from_edges(2, 2, vec![Edge::new(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn zero_weights_give_half_hidden_and_zero_output() {
        let w1 = SparseLayer::from_dense(Array2::zeros((3, 2)).view());
        let w2 = SparseLayer::from_dense(Array2::zeros((2, 3)).view());
        let x = array![[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]];
        let acts = forward(&w1, &w2, x.clone(), x).unwrap();
        assert!(acts.hidden.iter().all(|&v| v == 0.5));
        assert!(acts.output.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_path_composition() {
        let (w, v) = (0.7, -1.3);
        let w1 = SparseLayer::from_edges(3, 2, vec![Edge::new(0, 0, w)]).unwrap();
        let w2 = SparseLayer::from_edges(2, 3, vec![Edge::new(0, 0, v)]).unwrap();
        let x = array![[0.4, 9.0, -9.0]];
        let acts = forward(&w1, &w2, x.clone(), x).unwrap();
        assert_eq!(acts.output[[0, 0]], v * sigmoid(0.4 * w));
        assert_eq!(acts.output[[0, 1]], 0.0);
    }

    #[test]
    fn forward_shape_errors() {
        let w1 = SparseLayer::init(4, 3, 0.0, &mut rng(0)).unwrap();
        let w2 = SparseLayer::init(3, 5, 0.0, &mut rng(0)).unwrap();
        let x = Array2::zeros((2, 4));
        assert!(matches!(forward(&w1, &w2, x.clone(), x), Err(Error::Shape(_))));
    }

    #[test]
    fn loss_examples() {
        let mk = |out: Array2<f64>, tgt: Array2<f64>| BatchActivations {
            input: tgt.clone(),
            hidden_pre: Array2::zeros((out.nrows(), 1)),
            hidden: Array2::zeros((out.nrows(), 1)),
            output: out,
            target: tgt,
        };
        let t = array![[1.0, 2.0]];
        assert_eq!(mse_loss(&mk(t.clone(), t)).unwrap(), 0.0);
        assert_eq!(mse_loss(&mk(array![[1.0, 0.0]], array![[0.0, 0.0]])).unwrap(), 1.0);
        // squared norms 2 and 4
        let out = array![[1.0, 1.0], [2.0, 0.0]];
        assert_eq!(mse_loss(&mk(out, Array2::zeros((2, 2)))).unwrap(), 3.0);
    }

    #[test]
    fn perfect_reconstruction_has_zero_gradients() {
        let w1 = SparseLayer::init(5, 3, 0.3, &mut rng(7)).unwrap();
        let w2 = SparseLayer::init(3, 5, 0.3, &mut rng(8)).unwrap();
        let x = array![[0.1, 0.2, 0.3, 0.4, 0.5]];
        let probe = forward(&w1, &w2, x.clone(), x.clone()).unwrap();
        let acts = forward(&w1, &w2, x, probe.output.clone()).unwrap();
        let g = backward(&w1, &w2, &acts).unwrap();
        assert!(g.w1.iter().chain(&g.w2).all(|&v| v == 0.0));
        assert!(g.output.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_stale_activations() {
        let w1 = SparseLayer::init(5, 3, 0.0, &mut rng(1)).unwrap();
        let w2 = SparseLayer::init(3, 5, 0.0, &mut rng(2)).unwrap();
        let x = Array2::zeros((2, 5));
        let acts = forward(&w1, &w2, x.clone(), x).unwrap();
        let v1 = SparseLayer::init(5, 4, 0.0, &mut rng(1)).unwrap();
        let v2 = SparseLayer::init(4, 5, 0.0, &mut rng(2)).unwrap();
        assert!(matches!(backward(&v1, &v2, &acts), Err(Error::State(_))));
    }

    #[test]
    fn momentum_step_examples() {
        let mut l = SparseLayer::from_edges(1, 1, vec![Edge::new(0, 0, 1.0)]).unwrap();
        sgd_momentum_step(&mut l, &[2.0], 0.1, 0.0).unwrap();
        assert!((l.edges()[0].weight - 0.8).abs() < 1e-15);

        let mut l = SparseLayer::from_edges(1, 2, vec![Edge::new(0, 0, 0.3), Edge::new(0, 1, -0.2)]).unwrap();
        let before = l.clone();
        sgd_momentum_step(&mut l, &[0.0, 0.0], 0.1, 0.9).unwrap();
        assert_eq!(l, before);

        let mut l = SparseLayer::from_edges(1, 1, vec![Edge::new(0, 0, 0.0)]).unwrap();
        sgd_momentum_step(&mut l, &[1.0], 0.1, 0.9).unwrap();
        assert!((l.edges()[0].weight + 0.1).abs() < 1e-15);
        sgd_momentum_step(&mut l, &[1.0], 0.1, 0.9).unwrap();
        assert!((l.edges()[0].weight + 0.29).abs() < 1e-15);
    }

    #[test]
    fn momentum_step_reports_non_finite() {
        let mut l = SparseLayer::from_edges(2, 2, vec![Edge::new(0, 0, 1.0), Edge::new(1, 1, 1.0)]).unwrap();
        let before = l.clone();
        let err = sgd_momentum_step(&mut l, &[0.5, f64::NAN], 0.1, 0.9).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { row: 1, col: 1, .. }));
        assert_eq!(l, before);
    }

    #[test]
    fn csv_dump() {
        let l = SparseLayer::from_edges(2, 2, vec![Edge::new(1, 0, 0.5), Edge::new(0, 1, -1.0)]).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "row,col,weight\n0,1,-1\n1,0,0.5\n");
    }
}
