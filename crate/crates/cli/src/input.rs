//! Loading, splitting, and standardizing the datasets named on the command line.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wast_core::data::{load_any, split, standardize, synth_informative, GroundTruth};
use wast_core::{Dataset, SynthParams};

use crate::args::DataArgs;
use crate::error::{CliError, Result};

pub struct Prepared {
    pub name: String,
    pub train: Dataset,
    pub test: Option<Dataset>,
}

impl Prepared {
    pub fn labelled_test(&self) -> Result<&Dataset> {
        match &self.test {
            Some(t) if t.labels.is_some() && self.train.labels.is_some() => Ok(t),
            _ => Err(CliError::Usage(format!(
                "dataset '{}' needs labelled train and test data for accuracy",
                self.name
            ))),
        }
    }
}

/// `data.csv` -> `data.truth.json`.
pub fn truth_path(data: &Path) -> PathBuf {
    data.with_extension("truth.json")
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn prepare(args: &DataArgs, train_fraction: f64) -> Result<Vec<Prepared>> {
    if args.synth {
        let mut rng = ChaCha8Rng::seed_from_u64(args.data_seed);
        let data = synth_informative(SynthParams::madelon_like(), &mut rng)?;
        return Ok(vec![finish(
            "synth".into(),
            data,
            None,
            args,
            train_fraction,
            &mut rng,
        )?]);
    }
    if !args.test.is_empty() && args.test.len() != args.data.len() {
        return Err(CliError::Usage(format!(
            "{} --test files for {} --data files",
            args.test.len(),
            args.data.len()
        )));
    }
    let mut out = Vec::with_capacity(args.data.len());
    for (i, path) in args.data.iter().enumerate() {
        let load = |p: &Path| load_any(p, args.header, args.label_col);
        let mut train = load(path)?;
        let mut test = args.test.get(i).map(|p| load(p)).transpose()?;

        let truth_file = match &args.truth {
            Some(p) => Some(p.clone()),
            None => Some(truth_path(path)).filter(|p| p.exists()),
        };
        if let Some(p) = truth_file {
            let truth = GroundTruth::load(&p)?;
            if let Some(&bad) = truth.informative.iter().find(|&&f| f >= train.features()) {
                return Err(CliError::Usage(format!(
                    "{}: feature {bad} out of range for {} features",
                    p.display(),
                    train.features()
                )));
            }
            train.informative = Some(truth.informative.clone());
            if let Some(t) = test.as_mut() {
                t.informative = Some(truth.informative);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(args.data_seed);
        out.push(finish(dataset_name(path), train, test, args, train_fraction, &mut rng)?);
    }
    Ok(out)
}

fn finish(
    name: String,
    data: Dataset,
    test: Option<Dataset>,
    args: &DataArgs,
    train_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Prepared> {
    let (mut train, mut test) = match test {
        Some(t) => {
            if t.features() != data.features() {
                return Err(CliError::Usage(format!(
                    "'{name}': train has {} features, test {}",
                    data.features(),
                    t.features()
                )));
            }
            (data, Some(t))
        }
        None if data.labels.is_some() => {
            let (a, b) = split(&data, train_fraction, rng)?;
            (a, Some(b))
        }
        None => (data, None),
    };
    if !args.raw {
        match test.as_mut() {
            Some(t) => standardize(&mut train, &mut [t])?,
            None => standardize(&mut train, &mut [])?,
        }
    }
    Ok(Prepared { name, train, test })
}
