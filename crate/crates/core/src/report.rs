//! Self-contained run reports and the single-run driver used by the CLI.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{knn_accuracy, CostReport};
use crate::model::{train_with, EpochEvaluator, EpochRecord, TrainObserver, TrainedModel};
use crate::selection::{recovery_metrics, FeatureRanking, Recovery};

pub const FORMAT_VERSION: u32 = 1;

/// The evaluation classifier. Reports always carry it so that accuracies
/// are never mistaken for numbers obtained with a different model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierInfo {
    pub kind: String,
    pub k: usize,
    pub note: String,
}

impl ClassifierInfo {
    pub fn knn(k: usize) -> Self {
        Self {
            kind: "knn".into(),
            k,
            note: "deterministic Euclidean k-NN on the selected columns (not an SVM)".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub name: String,
    pub train_samples: usize,
    pub test_samples: usize,
    pub features: usize,
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub method: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub weight_init: String,
    pub momentum_form: String,
    pub classifier: ClassifierInfo,
    pub data: DataSummary,
    /// Selected feature indices per K, best first.
    pub selected: BTreeMap<usize, Vec<usize>>,
    /// Precision/recall per K, when ground truth is known.
    pub recovery: BTreeMap<usize, Recovery>,
    /// Test accuracy per K, when both splits carry labels.
    pub accuracy: BTreeMap<usize, f64>,
    pub history: Vec<EpochRecord>,
    pub cost: CostReport,
    pub topology_steps: usize,
    pub skipped_topology_steps: usize,
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// `epoch,loss,accuracy,precision_at_k`; missing values are empty cells.
    pub fn history_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let mut s = String::from("epoch,loss,accuracy,precision_at_k\n");
        for r in &self.history {
            s += &format!("{},{},{},{}\n", r.epoch, r.loss, opt(r.accuracy), opt(r.precision_at_k));
        }
        s
    }
}

/// One seeded run: train on `train`, then evaluate every K in `ks`.
/// `config.seed` seeds the only random stream used.
pub struct Run<'a> {
    pub config: &'a TrainConfig,
    pub name: &'a str,
    pub train: &'a Dataset,
    pub test: Option<&'a Dataset>,
    pub ks: &'a [usize],
}

pub struct RunOutput {
    pub report: RunReport,
    pub trained: TrainedModel,
    pub ranking: FeatureRanking,
}

impl Run<'_> {
    pub fn execute(&self) -> Result<RunOutput> {
        self.execute_with(&mut ())
    }

    /// `extra` receives batch and start callbacks; epoch callbacks go to the
    /// per-epoch evaluator when `config.eval_k` is set.
    pub fn execute_with(&self, extra: &mut dyn TrainObserver) -> Result<RunOutput> {
        let cfg = self.config;
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

        let labelled = self.test.filter(|t| t.labels.is_some() && self.train.labels.is_some());
        let truth = self.train.informative.as_deref();

        let trained = match cfg.eval_k {
            Some(k) => {
                let mut obs = Chain {
                    first: extra,
                    eval: EpochEvaluator {
                        k,
                        truth,
                        classifier: labelled.map(|t| (self.train, t, cfg.knn_k)),
                    },
                };
                train_with(cfg, self.train, &mut rng, &mut obs)?
            }
            None => train_with(cfg, self.train, &mut rng, extra)?,
        };

        let ranking = FeatureRanking::from_importance(&trained.importance.input);
        let mut selected = BTreeMap::new();
        let mut recovery = BTreeMap::new();
        let mut accuracy = BTreeMap::new();
        for &k in self.ks {
            let sel = ranking.top(k)?.to_vec();
            if let Some(t) = truth {
                recovery.insert(k, recovery_metrics(&sel, t)?);
            }
            if let Some(test) = labelled {
                let acc = knn_accuracy(
                    self.train.columns(&sel).view(),
                    self.train.labels_or_err()?,
                    test.columns(&sel).view(),
                    test.labels_or_err()?,
                    cfg.knn_k,
                )?;
                accuracy.insert(k, acc);
            }
            selected.insert(k, sel);
        }

        let classes = self.train.classes().max(self.test.map_or(0, Dataset::classes));
        let report = RunReport {
            format_version: FORMAT_VERSION,
            method: cfg.method().to_string(),
            seed: cfg.seed,
            config: cfg.clone(),
            weight_init: "glorot_uniform".into(),
            momentum_form: "classical".into(),
            classifier: ClassifierInfo::knn(cfg.knn_k),
            data: DataSummary {
                name: self.name.to_string(),
                train_samples: self.train.samples(),
                test_samples: self.test.map_or(0, Dataset::samples),
                features: self.train.features(),
                classes,
            },
            selected,
            recovery,
            accuracy,
            history: trained.history.clone(),
            cost: trained.cost.clone(),
            topology_steps: trained.topology_steps,
            skipped_topology_steps: trained.skipped_steps,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        };
        Ok(RunOutput {
            report,
            trained,
            ranking,
        })
    }
}

struct Chain<'a, 'b> {
    first: &'a mut dyn TrainObserver,
    eval: EpochEvaluator<'b>,
}

impl TrainObserver for Chain<'_, '_> {
    fn on_start(&mut self, model: &crate::model::SparseAutoencoder) {
        self.first.on_start(model);
    }

    fn on_batch(&mut self, epoch: usize, batch: usize, loss: f64) {
        self.first.on_batch(epoch, batch, loss);
    }

    fn on_epoch(
        &mut self,
        epoch: usize,
        importance: &crate::topology::ImportanceState,
        model: &crate::model::SparseAutoencoder,
    ) -> Result<crate::model::EpochEval> {
        self.first.on_epoch(epoch, importance, model)?;
        self.eval.on_epoch(epoch, importance, model)
    }
}
