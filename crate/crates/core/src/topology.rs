//! Neuron importance and the drop-and-grow cycle.
//!
//! Input and output neuron importance accumulate a blend of reconstruction
//! sensitivity (`|dL/d output|`) and connected weight magnitude. Dropping
//! removes the connections with the smallest `|w| * importance`; growth
//! either fills vacant slots of the most important neurons (attention-guided)
//! or samples vacant slots uniformly (random regrowth).

use std::io::{self, Write};

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseLayer;

/// Accumulated importance of the `m` input and `m` output neurons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceState {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    /// Weight of the gradient term; `1 - lambda` weighs the magnitude term.
    pub lambda: f64,
}

impl ImportanceState {
    pub fn new(features: usize, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            input: vec![0.0; features],
            output: vec![0.0; features],
            lambda,
        })
    }

    pub fn features(&self) -> usize {
        self.input.len()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

#[macro_export]
#[doc(hidden)]
macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($(#[$vmeta:meta])* $variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ::serde::Serialize, ::serde::Deserialize)]
        pub enum $name {
            $($(#[$vmeta])* #[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl ::std::fmt::Display for $name {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl ::std::str::FromStr for $name {
            type Err = $crate::Error;

            fn from_str(s: &str) -> $crate::Result<Self> {
                let key = s.trim().replace('-', "_").to_ascii_lowercase();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == key)
                    .ok_or_else(|| {
                        let names: Vec<_> = $name::ALL.iter().map(|v| v.as_str()).collect();
                        $crate::Error::Config(format!(
                            "unknown {} '{s}' (expected one of: {})",
                            stringify!($name),
                            names.join(", ")
                        ))
                    })
            }
        }
    };
}

named_enum! {
    /// Where regrown connections are placed.
    GrowRule {
        Wast => "wast",
        Random => "random",
    }
}

named_enum! {
    /// When the topology is updated.
    Schedule {
        PerBatch => "per_batch",
        PerEpoch => "per_epoch",
    }
}

named_enum! {
    /// Ablations of the importance criteria.
    Variant {
        Full => "full",
        NoGradient => "no_gradient",
        NoWeight => "no_weight",
        NoMomentum => "no_momentum",
        NoNeuronInDrop => "no_neuron_in_drop",
        /// Weight magnitude only: drop by `|w|`, rank by current strength
        /// `sum_k |W1[i, k]|` (the random-regrowth baseline's criteria).
        Strength => "strength",
    }
}

impl Variant {
    /// `no_gradient` pins lambda to 0 and `no_weight` pins it to 1.
    pub fn effective_lambda(self, lambda: f64) -> f64 {
        match self {
            Variant::NoGradient | Variant::Strength => 0.0,
            Variant::NoWeight => 1.0,
            _ => lambda,
        }
    }

    fn keeps_history(self) -> bool {
        !matches!(self, Variant::NoMomentum | Variant::Strength)
    }

    fn neuron_in_drop(self) -> bool {
        !matches!(self, Variant::NoNeuronInDrop | Variant::Strength)
    }

    /// The four ablations of the attention criteria.
    pub const ABLATIONS: &'static [Variant] = &[
        Variant::NoGradient,
        Variant::NoWeight,
        Variant::NoMomentum,
        Variant::NoNeuronInDrop,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyPolicy {
    pub grow_rule: GrowRule,
    pub schedule: Schedule,
    /// Fraction of each layer's connections replaced per step.
    pub alpha: f64,
    pub variant: Variant,
}

impl TopologyPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// Adds one step of evidence to both importance vectors.
///
/// `grad_output[j, i]` is the gradient of sample `j`'s loss with respect to
/// its reconstruction of feature `i`; the gradient term of feature `i` is the
/// batch mean of its absolute value.
/// Input neurons use `sum_k |W1[i, k]|`, output neurons `sum_k |W2[k, i]|`.
pub fn accumulate_importance(
    state: &mut ImportanceState,
    grad_output: &Array2<f64>,
    w1: &SparseLayer,
    w2: &SparseLayer,
    variant: Variant,
) -> Result<()> {
    check_lambda(state.lambda)?;
    let m = state.features();
    if grad_output.ncols() != m || w1.n_rows() != m || w2.n_cols() != m {
        return Err(Error::Shape(format!(
            "importance over {m} features, gradient has {} columns, layers {}x{} / {}x{}",
            grad_output.ncols(),
            w1.n_rows(),
            w1.n_cols(),
            w2.n_rows(),
            w2.n_cols()
        )));
    }
    let b = grad_output.nrows();
    if b == 0 {
        return Err(Error::Shape("empty gradient batch".into()));
    }

    let mut grad_term = vec![0.0; m];
    for row in grad_output.rows() {
        for (acc, g) in grad_term.iter_mut().zip(row.iter()) {
            *acc += g.abs();
        }
    }
    grad_term.iter_mut().for_each(|g| *g /= b as f64);

    let lambda = state.lambda;
    let keep = variant.keeps_history();
    let update = |acc: &mut [f64], magnitudes: Vec<f64>| {
        for ((a, g), w) in acc.iter_mut().zip(&grad_term).zip(magnitudes) {
            let prior = if keep { *a } else { 0.0 };
            *a = prior + lambda * g + (1.0 - lambda) * w;
        }
    };
    update(&mut state.input, w1.abs_row_sums());
    update(&mut state.output, w2.abs_col_sums());
    Ok(())
}

/// Which end of an edge carries the neuron whose importance is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeuronSide {
    /// Neuron is the edge's row (encoder input features).
    Row,
    /// Neuron is the edge's column (decoder output features).
    Col,
}

/// `|w| * importance[neuron]`, or just `|w|` when the variant ignores neurons.
pub fn connection_scores(
    layer: &SparseLayer,
    importance: &[f64],
    side: NeuronSide,
    variant: Variant,
) -> Result<Vec<f64>> {
    let expected = match side {
        NeuronSide::Row => layer.n_rows(),
        NeuronSide::Col => layer.n_cols(),
    };
    if importance.len() != expected {
        return Err(Error::Shape(format!(
            "{} importance values for {expected} neurons",
            importance.len()
        )));
    }
    let scores = layer
        .edges()
        .iter()
        .map(|e| {
            let mag = e.weight.abs();
            if !variant.neuron_in_drop() {
                return mag;
            }
            let neuron = match side {
                NeuronSide::Row => e.row,
                NeuronSide::Col => e.col,
            };
            mag * importance[neuron]
        })
        .collect();
    Ok(scores)
}

/// `floor(alpha * nnz)`, tolerant of representation error in `alpha`.
pub fn drop_count(alpha: f64, nnz: usize) -> usize {
    (alpha * nnz as f64 + 1e-9).floor() as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropOutcome {
    pub count: usize,
    pub removed: Vec<(usize, usize)>,
    /// Set when `floor(alpha * nnz) == 0` and nothing was done.
    pub skipped: bool,
}

/// Removes the `floor(alpha * nnz)` lowest-scored edges. Equal scores fall
/// back to ascending `(row, col)`.
pub fn drop_lowest(layer: &mut SparseLayer, scores: &[f64], alpha: f64) -> Result<DropOutcome> {
    if scores.len() != layer.nnz() {
        return Err(Error::Shape(format!(
            "{} scores for {} edges",
            scores.len(),
            layer.nnz()
        )));
    }
    let count = drop_count(alpha, layer.nnz());
    if count == 0 {
        log::warn!("drop fraction {alpha} of {} edges rounds to zero", layer.nnz());
        return Ok(DropOutcome {
            count: 0,
            removed: Vec::new(),
            skipped: true,
        });
    }

    // Edges are already in (row, col) order, so index order is the tie rule.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let by_score = |&a: &usize, &b: &usize| scores[a].total_cmp(&scores[b]).then(a.cmp(&b));
    if count < order.len() {
        order.select_nth_unstable_by(count, by_score);
    }
    let mut victims = order[..count].to_vec();
    victims.sort_unstable();

    let mut flags = vec![false; layer.nnz()];
    let removed = victims
        .iter()
        .map(|&i| {
            flags[i] = true;
            layer.edges()[i].position()
        })
        .collect();
    layer.remove_flagged(&flags);
    Ok(DropOutcome {
        count,
        removed,
        skipped: false,
    })
}

fn vacant_count(layer: &SparseLayer) -> usize {
    layer.grid_size() - layer.nnz()
}

fn check_capacity(layer: &SparseLayer, count: usize) -> Result<()> {
    let vacant = vacant_count(layer);
    if count > vacant {
        return Err(Error::Capacity {
            requested: count,
            vacant,
        });
    }
    Ok(())
}

/// Attention-guided growth: vacant slots of the most important neurons are
/// filled first. With uniform hidden importance every vacant slot of a
/// neuron scores the same, so a group of equally-scored candidates that
/// cannot be taken whole is subsampled uniformly at random.
///
/// Returns the new positions in ascending order.
pub fn grow_wast<R: Rng + ?Sized>(
    layer: &mut SparseLayer,
    importance: &[f64],
    side: NeuronSide,
    count: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let (neurons, fan) = match side {
        NeuronSide::Row => (layer.n_rows(), layer.n_cols()),
        NeuronSide::Col => (layer.n_cols(), layer.n_rows()),
    };
    if importance.len() != neurons {
        return Err(Error::Shape(format!(
            "{} importance values for {neurons} neurons",
            importance.len()
        )));
    }
    check_capacity(layer, count)?;
    if count == 0 {
        return Ok(Vec::new());
    }

    let occupied = layer.occupancy();
    let n_cols = layer.n_cols();
    let cell = |neuron: usize, other: usize| match side {
        NeuronSide::Row => (neuron, other),
        NeuronSide::Col => (other, neuron),
    };
    let vacant_slots = |neuron: usize| {
        (0..fan)
            .map(move |other| cell(neuron, other))
            .filter(|&(r, c)| !occupied[r * n_cols + c])
    };

    let mut ranked: Vec<usize> = (0..neurons).collect();
    ranked.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));

    let mut grown = Vec::with_capacity(count);
    let mut start = 0;
    while grown.len() < count && start < ranked.len() {
        let level = importance[ranked[start]];
        let end = ranked[start..]
            .iter()
            .position(|&n| importance[n] != level)
            .map_or(ranked.len(), |p| start + p);

        let candidates: Vec<(usize, usize)> = ranked[start..end].iter().flat_map(|&n| vacant_slots(n)).collect();
        let need = count - grown.len();
        if candidates.len() <= need {
            grown.extend(candidates);
        } else {
            grown.extend(
                index::sample(rng, candidates.len(), need)
                    .into_iter()
                    .map(|i| candidates[i]),
            );
        }
        start = end;
    }
    debug_assert_eq!(grown.len(), count);

    grown.sort_unstable();
    layer.insert_zero_edges(&grown);
    Ok(grown)
}

/// Random regrowth: `count` vacant positions sampled uniformly without
/// replacement. Returns the new positions in ascending order.
pub fn grow_random<R: Rng + ?Sized>(layer: &mut SparseLayer, count: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    check_capacity(layer, count)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let n_cols = layer.n_cols();
    let grid = layer.grid_size();
    let mut occupied = layer.occupancy();

    let mut cells: Vec<usize> = if 2 * (layer.nnz() + count) <= grid {
        // Sparse grid: rejection sampling visits few cells.
        let mut picked = Vec::with_capacity(count);
        while picked.len() < count {
            let c = rng.random_range(0..grid);
            if !occupied[c] {
                occupied[c] = true;
                picked.push(c);
            }
        }
        picked
    } else {
        let vacant: Vec<usize> = (0..grid).filter(|&c| !occupied[c]).collect();
        index::sample(rng, vacant.len(), count)
            .into_iter()
            .map(|i| vacant[i])
            .collect()
    };
    cells.sort_unstable();
    let grown: Vec<(usize, usize)> = cells.iter().map(|&c| (c / n_cols, c % n_cols)).collect();
    layer.insert_zero_edges(&grown);
    Ok(grown)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepOutcome {
    /// Edges replaced in the encoder and the decoder.
    pub replaced: [usize; 2],
    pub skipped: bool,
}

/// One drop-and-grow cycle on both layers. Each layer regrows exactly as
/// many edges as it lost, so `nnz` is preserved per layer.
pub fn topology_step<R: Rng + ?Sized>(
    w1: &mut SparseLayer,
    w2: &mut SparseLayer,
    state: &ImportanceState,
    policy: &TopologyPolicy,
    rng: &mut R,
) -> Result<StepOutcome> {
    policy.validate()?;
    let mut outcome = StepOutcome::default();
    let layers = [
        (w1, &state.input, NeuronSide::Row),
        (w2, &state.output, NeuronSide::Col),
    ];
    for (slot, (layer, importance, side)) in layers.into_iter().enumerate() {
        let scores = connection_scores(layer, importance, side, policy.variant)?;
        let dropped = drop_lowest(layer, &scores, policy.alpha)?;
        outcome.skipped |= dropped.skipped;
        match policy.grow_rule {
            GrowRule::Wast => grow_wast(layer, importance, side, dropped.count, rng)?,
            GrowRule::Random => grow_random(layer, dropped.count, rng)?,
        };
        outcome.replaced[slot] = dropped.count;
    }
    Ok(outcome)
}

/// Writes the per-input-neuron outgoing edge histogram as `step,neuron,edge_count`
/// rows (no header; see [`TRACE_HEADER`]).
pub fn write_edge_histogram<W: Write>(out: &mut W, step: usize, w1: &SparseLayer) -> io::Result<()> {
    for (neuron, count) in w1.row_counts().into_iter().enumerate() {
        writeln!(out, "{step},{neuron},{count}")?;
    }
    Ok(())
}

pub const TRACE_HEADER: &str = "step,neuron,edge_count";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Edge;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(n_rows: usize, n_cols: usize, cells: &[(usize, usize, f64)]) -> SparseLayer {
        SparseLayer::from_edges(
            n_rows,
            n_cols,
            cells.iter().map(|&(r, c, w)| Edge::new(r, c, w)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn accumulate_gradient_only() {
        let mut s = ImportanceState {
            input: vec![1.0, 1.0],
            output: vec![1.0, 1.0],
            lambda: 1.0,
        };
        let w1 = layer(2, 1, &[(0, 0, 5.0), (1, 0, -3.0)]);
        let w2 = layer(1, 2, &[(0, 0, 7.0)]);
        // batch mean |g| = [0.2, 0.0]
        let g = array![[0.3, 0.0], [-0.1, 0.0]];
        accumulate_importance(&mut s, &g, &w1, &w2, Variant::Full).unwrap();
        assert!((s.input[0] - 1.2).abs() < 1e-15 && s.input[1] == 1.0);
        assert!((s.output[0] - 1.2).abs() < 1e-15 && s.output[1] == 1.0);
    }

    #[test]
    fn accumulate_weight_only() {
        let mut s = ImportanceState::new(2, 0.0).unwrap();
        let w1 = layer(2, 2, &[(0, 0, 0.1), (0, 1, -0.3), (1, 1, 0.2)]);
        let w2 = layer(2, 2, &[(1, 0, -0.25)]);
        let g = array![[9.0, 9.0]];
        accumulate_importance(&mut s, &g, &w1, &w2, Variant::Full).unwrap();
        assert!((s.input[0] - 0.4).abs() < 1e-15);
        assert!((s.input[1] - 0.2).abs() < 1e-15);
        assert_eq!(s.output, vec![0.25, 0.0]);
    }

    #[test]
    fn accumulate_mixed() {
        let mut s = ImportanceState {
            input: vec![1.0],
            output: vec![0.0],
            lambda: 0.5,
        };
        let w1 = layer(1, 2, &[(0, 0, 0.1), (0, 1, -0.3)]);
        let w2 = layer(2, 1, &[]);
        accumulate_importance(&mut s, &array![[0.2]], &w1, &w2, Variant::Full).unwrap();
        assert!((s.input[0] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn accumulate_without_momentum_discards_history() {
        let mut s = ImportanceState {
            input: vec![10.0],
            output: vec![10.0],
            lambda: 0.5,
        };
        let w1 = layer(1, 1, &[(0, 0, 0.4)]);
        let w2 = layer(1, 1, &[(0, 0, 0.4)]);
        accumulate_importance(&mut s, &array![[0.2]], &w1, &w2, Variant::NoMomentum).unwrap();
        assert!((s.input[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn accumulate_rejects_bad_lambda() {
        let mut s = ImportanceState {
            input: vec![0.0],
            output: vec![0.0],
            lambda: 1.5,
        };
        let w = layer(1, 1, &[]);
        assert!(matches!(
            accumulate_importance(&mut s, &array![[0.0]], &w, &w, Variant::Full),
            Err(Error::Config(_))
        ));
        assert!(ImportanceState::new(3, -0.1).is_err());
    }

    #[test]
    fn score_examples() {
        let l = layer(2, 1, &[(0, 0, 0.5), (1, 0, 0.0)]);
        let s = connection_scores(&l, &[2.0, 50.0], NeuronSide::Row, Variant::Full).unwrap();
        assert_eq!(s, vec![1.0, 0.0]);
        let l = layer(1, 1, &[(0, 0, -0.5)]);
        let s = connection_scores(&l, &[100.0], NeuronSide::Col, Variant::NoNeuronInDrop).unwrap();
        assert_eq!(s, vec![0.5]);
    }

    #[test]
    fn drop_count_floor() {
        assert_eq!(drop_count(0.3, 20000), 6000);
        assert_eq!(drop_count(0.29, 100), 29);
        assert_eq!(drop_count(0.3, 3), 0);
    }

    #[test]
    fn drop_equal_scores_uses_position_order() {
        let mut l = layer(2, 2, &[(1, 1, 1.0), (0, 1, 1.0), (1, 0, 1.0), (0, 0, 1.0)]);
        let out = drop_lowest(&mut l, &[1.0; 4], 0.5).unwrap();
        assert_eq!(out.removed, vec![(0, 0), (0, 1)]);
        assert_eq!(l.nnz(), 2);
    }

    #[test]
    fn drop_zero_is_flagged() {
        let mut l = layer(2, 2, &[(0, 0, 1.0)]);
        let out = drop_lowest(&mut l, &[1.0], 0.3).unwrap();
        assert!(out.skipped);
        assert_eq!(l.nnz(), 1);
    }

    #[test]
    fn wast_growth_prefers_dominant_neuron() {
        let mut l = layer(3, 2, &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let grown = grow_wast(&mut l, &[5.0, 1.0, 1.0], NeuronSide::Row, 2, &mut rng).unwrap();
        assert_eq!(grown, vec![(0, 0), (0, 1)]);
        assert!(l.edges().iter().all(|e| e.weight == 0.0 && e.momentum == 0.0));
    }

    #[test]
    fn wast_growth_on_output_side() {
        let mut l = layer(2, 3, &[(0, 2, 0.1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let grown = grow_wast(&mut l, &[0.0, 1.0, 9.0], NeuronSide::Col, 2, &mut rng).unwrap();
        // column 2 has one vacancy, then column 1 gets one of its two
        assert!(grown.contains(&(1, 2)));
        assert_eq!(grown.iter().filter(|p| p.1 == 1).count(), 1);
    }

    #[test]
    fn growth_capacity_error() {
        let mut l = layer(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            grow_random(&mut l, 3, &mut rng),
            Err(Error::Capacity {
                requested: 3,
                vacant: 2
            })
        ));
        assert!(grow_wast(&mut l, &[1.0, 1.0], NeuronSide::Row, 3, &mut rng).is_err());
    }

    #[test]
    fn random_growth_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut l = layer(2, 2, &[(0, 1, 0.3)]);
        let before = l.clone();
        assert!(grow_random(&mut l, 0, &mut rng).unwrap().is_empty());
        assert_eq!(l, before);

        let mut l = layer(2, 2, &[]);
        grow_random(&mut l, 4, &mut rng).unwrap();
        assert_eq!(l.nnz(), 4);
    }

    #[test]
    fn step_with_tiny_alpha_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut w1 = layer(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]);
        let mut w2 = layer(2, 2, &[(0, 0, 1.0)]);
        let state = ImportanceState::new(2, 0.5).unwrap();
        let policy = TopologyPolicy {
            grow_rule: GrowRule::Wast,
            schedule: Schedule::PerBatch,
            alpha: 0.3,
            variant: Variant::Full,
        };
        let out = topology_step(&mut w1, &mut w2, &state, &policy, &mut rng).unwrap();
        assert!(out.skipped);
        assert_eq!((w1.nnz(), w2.nnz()), (2, 1));
    }

    #[test]
    fn enum_parsing() {
        assert_eq!("per-batch".parse::<Schedule>().unwrap(), Schedule::PerBatch);
        assert_eq!("Random".parse::<GrowRule>().unwrap(), GrowRule::Random);
        assert_eq!("no_neuron_in_drop".parse::<Variant>().unwrap(), Variant::NoNeuronInDrop);
        assert!("sometimes".parse::<Schedule>().is_err());
        assert_eq!(Variant::NoGradient.effective_lambda(0.9), 0.0);
        assert_eq!(Variant::NoWeight.effective_lambda(0.9), 1.0);
        assert_eq!(Variant::NoMomentum.effective_lambda(0.9), 0.9);
    }
}
