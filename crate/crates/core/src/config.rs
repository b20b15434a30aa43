//! Training configuration and its flat `key = value` text form.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::named_enum;
use crate::topology::{GrowRule, Schedule, TopologyPolicy, Variant};

named_enum! {
    /// How the optimized objective is normalized over features.
    LossReduction {
        /// Mean over all `b x m` entries; stable at the default learning rate.
        FeatureMean => "feature_mean",
        /// Sum over features, mean over samples.
        FeatureSum => "feature_sum",
    }
}

/// Every knob of a training run. Defaults reproduce the reference setup:
/// 200 hidden units, 80% sparsity, 30% rewiring, 10 epochs of momentum SGD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub sparsity: f64,
    pub alpha: f64,
    /// 0.4 suits image-like data; 0.9 is the default for everything else.
    pub lambda: f64,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Standard deviation of the Gaussian corruption applied to encoder inputs.
    pub noise_std: f64,
    /// Reconstruct the corrupted input instead of the clean one.
    pub noisy_target: bool,
    pub loss_reduction: LossReduction,
    pub schedule: Schedule,
    pub grow_rule: GrowRule,
    pub variant: Variant,
    pub seed: u64,
    /// Neighbours used by the k-NN evaluator.
    pub knn_k: usize,
    /// Feature count for per-epoch evaluation; `None` disables it.
    pub eval_k: Option<usize>,
    /// Train share when a single data file has to be split.
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 200,
            sparsity: 0.8,
            alpha: 0.3,
            lambda: 0.9,
            lr: 0.1,
            momentum: 0.9,
            batch: 128,
            epochs: 10,
            noise_std: 0.2,
            noisy_target: false,
            loss_reduction: LossReduction::FeatureMean,
            schedule: Schedule::PerBatch,
            grow_rule: GrowRule::Wast,
            variant: Variant::Full,
            seed: 0,
            knn_k: 5,
            eval_k: None,
            train_fraction: 0.8,
        }
    }
}

pub const IMAGE_LAMBDA: f64 = 0.4;

const KEYS: &[&str] = &[
    "hidden",
    "sparsity",
    "alpha",
    "lambda",
    "lr",
    "momentum",
    "batch",
    "epochs",
    "noise_std",
    "noisy_target",
    "loss_reduction",
    "schedule",
    "grow_rule",
    "variant",
    "seed",
    "knn_k",
    "eval_k",
    "train_fraction",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

impl TrainConfig {
    /// The random-regrowth baseline with its own criteria: magnitude-only
    /// drop, features ranked by current input-neuron strength, and one
    /// topology update per epoch.
    pub fn qs() -> Self {
        Self {
            grow_rule: GrowRule::Random,
            variant: Variant::Strength,
            schedule: Schedule::PerEpoch,
            ..Self::default()
        }
    }

    pub fn method(&self) -> &'static str {
        match self.grow_rule {
            GrowRule::Wast => "wast",
            GrowRule::Random => "qs",
        }
    }

    pub fn policy(&self) -> TopologyPolicy {
        TopologyPolicy {
            grow_rule: self.grow_rule,
            schedule: self.schedule,
            alpha: self.alpha,
            variant: self.variant,
        }
    }

    /// Lambda after applying the ablation variant.
    pub fn effective_lambda(&self) -> f64 {
        self.variant.effective_lambda(self.lambda)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "hidden" => self.hidden = parse(&key, value)?,
            "sparsity" => self.sparsity = parse(&key, value)?,
            "alpha" => self.alpha = parse(&key, value)?,
            "lambda" => self.lambda = parse(&key, value)?,
            "lr" => self.lr = parse(&key, value)?,
            "momentum" => self.momentum = parse(&key, value)?,
            "batch" => self.batch = parse(&key, value)?,
            "epochs" => self.epochs = parse(&key, value)?,
            "noise_std" => self.noise_std = parse(&key, value)?,
            "noisy_target" => self.noisy_target = parse(&key, value)?,
            "loss_reduction" => self.loss_reduction = value.parse()?,
            "schedule" => self.schedule = value.parse()?,
            "grow_rule" => self.grow_rule = value.parse()?,
            "variant" => self.variant = value.parse()?,
            "seed" => self.seed = parse(&key, value)?,
            "knn_k" => self.knn_k = parse(&key, value)?,
            "eval_k" => {
                self.eval_k = match value {
                    "" | "none" | "off" => None,
                    v => Some(parse(&key, v)?),
                }
            }
            "train_fraction" => self.train_fraction = parse(&key, value)?,
            _ => {
                return Err(Error::Config(format!(
                    "unknown key '{key}' (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text)
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let eval_k = self.eval_k.map_or("none".to_string(), |k| k.to_string());
        let pairs: [(&str, String); 18] = [
            ("hidden", self.hidden.to_string()),
            ("sparsity", self.sparsity.to_string()),
            ("alpha", self.alpha.to_string()),
            ("lambda", self.lambda.to_string()),
            ("lr", self.lr.to_string()),
            ("momentum", self.momentum.to_string()),
            ("batch", self.batch.to_string()),
            ("epochs", self.epochs.to_string()),
            ("noise_std", self.noise_std.to_string()),
            ("noisy_target", self.noisy_target.to_string()),
            ("loss_reduction", self.loss_reduction.to_string()),
            ("schedule", self.schedule.to_string()),
            ("grow_rule", self.grow_rule.to_string()),
            ("variant", self.variant.to_string()),
            ("seed", self.seed.to_string()),
            ("knn_k", self.knn_k.to_string()),
            ("eval_k", eval_k),
            ("train_fraction", self.train_fraction.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Checks everything that does not depend on the dataset.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.hidden == 0 {
            return bad("hidden must be positive".into());
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return bad(format!("sparsity {} outside [0, 1)", self.sparsity));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if self.batch == 0 {
            return bad("batch must be positive".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std {} must be non-negative", self.noise_std));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if self.knn_k == 0 {
            return bad("knn_k must be positive".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        self.policy().validate()
    }
}
