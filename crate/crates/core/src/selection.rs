//! Turning input-neuron importance into a feature subset.

use std::collections::BTreeSet;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Features ordered by descending importance; ties by ascending index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub order: Vec<usize>,
    /// `scores[r]` is the importance of `order[r]`.
    pub scores: Vec<f64>,
}

impl FeatureRanking {
    pub fn from_importance(importance: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..importance.len()).collect();
        order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
        let scores = order.iter().map(|&i| importance[i]).collect();
        Self { order, scores }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The `k` best features, best first.
    pub fn top(&self, k: usize) -> Result<&[usize]> {
        if k == 0 || k > self.len() {
            return Err(Error::Config(format!("cannot select {k} of {} features", self.len())));
        }
        Ok(&self.order[..k])
    }

    /// `rank,feature,score` with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "rank,feature,score")?;
        for (rank, (f, s)) in self.order.iter().zip(&self.scores).enumerate() {
            writeln!(out, "{rank},{f},{s}")?;
        }
        Ok(())
    }
}

/// Indices of the `k` largest input importances, best first.
pub fn select_features(input_importance: &[f64], k: usize) -> Result<Vec<usize>> {
    Ok(FeatureRanking::from_importance(input_importance).top(k)?.to_vec())
}

/// Newline-delimited indices.
pub fn write_selected<W: Write>(mut out: W, selected: &[usize]) -> io::Result<()> {
    for f in selected {
        writeln!(out, "{f}")?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub precision: f64,
    pub recall: f64,
}

/// Overlap of a selected set with the ground-truth informative set.
pub fn recovery_metrics(selected: &[usize], truth: &[usize]) -> Result<Recovery> {
    if truth.is_empty() {
        return Err(Error::Input("ground-truth set is empty".into()));
    }
    if selected.is_empty() {
        return Err(Error::Input("selected set is empty".into()));
    }
    let truth: BTreeSet<_> = truth.iter().collect();
    let selected: BTreeSet<_> = selected.iter().collect();
    let hits = selected.intersection(&truth).count() as f64;
    Ok(Recovery {
        precision: hits / selected.len() as f64,
        recall: hits / truth.len() as f64,
    })
}
