//! The sparse denoising-autoencoder training loop with topology evolution.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{LossReduction, TrainConfig};
use crate::data::{add_gaussian_noise, Dataset};
use crate::error::{Error, Result};
use crate::eval::{cost_report, knn_accuracy, CostReport};
use crate::selection::{recovery_metrics, select_features};
use crate::sparse::{backward, forward, mse_loss, sgd_momentum_step, SparseLayer};
use crate::topology::{accumulate_importance, topology_step, ImportanceState, Schedule};

/// Encoder `m x h` and decoder `h x m`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAutoencoder {
    pub w1: SparseLayer,
    pub w2: SparseLayer,
}

impl SparseAutoencoder {
    pub fn init<R: Rng + ?Sized>(features: usize, config: &TrainConfig, rng: &mut R) -> Result<Self> {
        let w1 = SparseLayer::init(features, config.hidden, config.sparsity, rng)?;
        let w2 = SparseLayer::init(config.hidden, features, config.sparsity, rng)?;
        Ok(Self { w1, w2 })
    }

    pub fn features(&self) -> usize {
        self.w1.n_rows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.n_cols()
    }

    pub fn params(&self) -> usize {
        self.w1.nnz() + self.w2.nnz()
    }

    /// Mean squared reconstruction error of `x` without corruption.
    pub fn reconstruction_loss(&self, x: &Array2<f64>) -> Result<f64> {
        let acts = forward(&self.w1, &self.w2, x.clone(), x.clone())?;
        mse_loss(&acts)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochEval {
    pub accuracy: Option<f64>,
    pub precision_at_k: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training-batch loss over the epoch.
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub precision_at_k: Option<f64>,
}

/// Callbacks invoked during [`fit`]. All methods default to no-ops.
pub trait TrainObserver {
    fn on_start(&mut self, _model: &SparseAutoencoder) {}

    fn on_batch(&mut self, _epoch: usize, _batch: usize, _loss: f64) {}

    /// Called after the epoch's last topology step.
    fn on_epoch(
        &mut self,
        _epoch: usize,
        _importance: &ImportanceState,
        _model: &SparseAutoencoder,
    ) -> Result<EpochEval> {
        Ok(EpochEval::default())
    }
}

impl TrainObserver for () {}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: SparseAutoencoder,
    pub importance: ImportanceState,
    pub history: Vec<EpochRecord>,
    pub cost: CostReport,
    pub topology_steps: usize,
    /// Topology steps that replaced nothing because `alpha * nnz < 1`.
    pub skipped_steps: usize,
    pub config: TrainConfig,
}

impl TrainedModel {
    pub fn select(&self, k: usize) -> Result<Vec<usize>> {
        select_features(&self.importance.input, k)
    }
}

/// Seeded permutation of `0..n` cut into batches of `batch`; the last batch
/// keeps the remainder.
pub fn epoch_batches<R: Rng + ?Sized>(n: usize, batch: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch.max(1)).map(<[usize]>::to_vec).collect()
}

/// Initializes a model and trains it.
pub fn train<R: Rng + ?Sized>(config: &TrainConfig, data: &Dataset, rng: &mut R) -> Result<TrainedModel> {
    train_with(config, data, rng, &mut ())
}

pub fn train_with<R: Rng + ?Sized>(
    config: &TrainConfig,
    data: &Dataset,
    rng: &mut R,
    observer: &mut dyn TrainObserver,
) -> Result<TrainedModel> {
    config.validate()?;
    check_data(config, data)?;
    let model = SparseAutoencoder::init(data.features(), config, rng)?;
    fit(config, data, model, rng, observer)
}

fn check_data(config: &TrainConfig, data: &Dataset) -> Result<()> {
    if data.samples() == 0 || data.features() == 0 {
        return Err(Error::Input("empty dataset".into()));
    }
    if config.batch > data.samples() {
        return Err(Error::Config(format!(
            "batch {} exceeds the {} training samples",
            config.batch,
            data.samples()
        )));
    }
    Ok(())
}

/// Trains an existing model: per batch, corrupt the input, reconstruct,
/// take a momentum-SGD step, accumulate importance, and (per schedule)
/// rewire both layers.
///
/// Under [`LossReduction::FeatureMean`] the weights follow the gradient of the
/// reconstruction loss divided by the feature count (the mean over all `b x m`
/// entries); history always records the unscaled batch loss.
pub fn fit<R: Rng + ?Sized>(
    config: &TrainConfig,
    data: &Dataset,
    mut model: SparseAutoencoder,
    rng: &mut R,
    observer: &mut dyn TrainObserver,
) -> Result<TrainedModel> {
    config.validate()?;
    check_data(config, data)?;
    if model.features() != data.features() || model.hidden() != config.hidden {
        return Err(Error::Shape(format!(
            "model is {}x{}, data has {} features and config {} hidden units",
            model.features(),
            model.hidden(),
            data.features(),
            config.hidden
        )));
    }

    let policy = config.policy();
    let mut importance = ImportanceState::new(data.features(), config.effective_lambda())?;
    let mut history = Vec::with_capacity(config.epochs);
    let mut topology_steps = 0;
    let mut skipped_steps = 0;
    let mut steps_per_epoch = data.samples().div_ceil(config.batch);

    observer.on_start(&model);

    for epoch in 1..=config.epochs {
        let batches = epoch_batches(data.samples(), config.batch, rng);
        steps_per_epoch = batches.len();
        let mut loss_sum = 0.0;
        for (b, idx) in batches.iter().enumerate() {
            let clean = data.x.select(Axis(0), idx);
            let noisy = add_gaussian_noise(&clean, config.noise_std, rng)?;
            let target = if config.noisy_target { noisy.clone() } else { clean };

            let acts = forward(&model.w1, &model.w2, noisy, target)?;
            let loss = mse_loss(&acts)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: b, loss });
            }
            let mut grads = backward(&model.w1, &model.w2, &acts)?;
            if config.loss_reduction == LossReduction::FeatureMean {
                let scale = 1.0 / data.features() as f64;
                grads.w1.iter_mut().chain(grads.w2.iter_mut()).for_each(|g| *g *= scale);
            }
            sgd_momentum_step(&mut model.w1, &grads.w1, config.lr, config.momentum)?;
            sgd_momentum_step(&mut model.w2, &grads.w2, config.lr, config.momentum)?;
            // Importance uses each sample's own loss gradient, 2 * (output - target).
            let sample_grads = grads.output * idx.len() as f64;
            accumulate_importance(&mut importance, &sample_grads, &model.w1, &model.w2, config.variant)?;

            let last = b + 1 == batches.len();
            if config.schedule == Schedule::PerBatch || last {
                let step = topology_step(&mut model.w1, &mut model.w2, &importance, &policy, rng)?;
                topology_steps += 1;
                skipped_steps += usize::from(step.skipped);
            }
            loss_sum += loss;
            observer.on_batch(epoch, b, loss);
        }
        let eval = observer.on_epoch(epoch, &importance, &model)?;
        history.push(EpochRecord {
            epoch,
            loss: loss_sum / batches.len() as f64,
            accuracy: eval.accuracy,
            precision_at_k: eval.precision_at_k,
        });
    }

    let cost = cost_report(
        model.w1.nnz(),
        model.w2.nnz(),
        config.hidden,
        data.samples(),
        config.epochs,
        steps_per_epoch,
    );
    Ok(TrainedModel {
        model,
        importance,
        history,
        cost,
        topology_steps,
        skipped_steps,
        config: config.clone(),
    })
}

/// Observer that scores the current top-`k` features after every epoch:
/// precision against a known informative set and/or k-NN test accuracy.
pub struct EpochEvaluator<'a> {
    pub k: usize,
    pub truth: Option<&'a [usize]>,
    /// `(train, test, neighbours)` for k-NN accuracy.
    pub classifier: Option<(&'a Dataset, &'a Dataset, usize)>,
}

impl TrainObserver for EpochEvaluator<'_> {
    fn on_epoch(
        &mut self,
        _epoch: usize,
        importance: &ImportanceState,
        _model: &SparseAutoencoder,
    ) -> Result<EpochEval> {
        let selected = select_features(&importance.input, self.k)?;
        let precision_at_k = match self.truth {
            Some(t) => Some(recovery_metrics(&selected, t)?.precision),
            None => None,
        };
        let accuracy = match self.classifier {
            Some((train, test, nn)) => Some(knn_accuracy(
                train.columns(&selected).view(),
                train.labels_or_err()?,
                test.columns(&selected).view(),
                test.labels_or_err()?,
                nn,
            )?),
            None => None,
        };
        Ok(EpochEval {
            accuracy,
            precision_at_k,
        })
    }
}
