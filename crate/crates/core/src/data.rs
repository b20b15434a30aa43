//! Datasets: CSV and libsvm ingestion, standardization, splitting, noise
//! corruption and a synthetic generator with known informative features.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix (one sample per row) with optional labels and ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    /// Indices of the truly informative features, when known.
    pub informative: Option<Vec<usize>>,
    /// Standardization statistics, set by [`standardize`].
    pub feature_means: Option<Vec<f64>>,
    pub feature_stds: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != x.nrows() {
                return Err(Error::Input(format!("{} labels for {} samples", l.len(), x.nrows())));
            }
        }
        Ok(Self {
            x,
            labels,
            informative: None,
            feature_means: None,
            feature_stds: None,
        })
    }

    pub fn samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn features(&self) -> usize {
        self.x.ncols()
    }

    /// `max(label) + 1`, or 0 without labels.
    pub fn classes(&self) -> usize {
        self.labels.as_ref().and_then(|l| l.iter().max()).map_or(0, |&c| c + 1)
    }

    pub fn labels_or_err(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Input("dataset has no labels".into()))
    }

    /// Copy of the rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), idx),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            informative: self.informative.clone(),
            feature_means: self.feature_means.clone(),
            feature_stds: self.feature_stds.clone(),
        }
    }

    /// The feature matrix restricted to `features`, in that order.
    pub fn columns(&self, features: &[usize]) -> Array2<f64> {
        self.x.select(Axis(1), features)
    }

    /// Writes `f0..f{m-1}[,label]` with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header: Vec<String> = (0..self.features()).map(|i| format!("f{i}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for (i, row) in self.x.rows().into_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Which CSV column holds class labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    None,
    First,
    Last,
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" | "" => Ok(LabelColumn::None),
            "first" => Ok(LabelColumn::First),
            "last" => Ok(LabelColumn::Last),
            n => n
                .parse()
                .map(LabelColumn::Index)
                .map_err(|_| Error::Config(format!("bad label column '{s}'"))),
        }
    }
}

/// Integer labels; negative values trigger a remap of the distinct sorted
/// labels onto `0..classes` (e.g. `{-1, +1}` becomes `{0, 1}`).
fn normalize_labels(raw: Vec<i64>) -> Vec<usize> {
    if raw.iter().all(|&l| l >= 0) {
        return raw.into_iter().map(|l| l as usize).collect();
    }
    let distinct: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    raw.iter()
        .map(|l| distinct.binary_search(l).expect("label present"))
        .collect()
}

fn parse_label(token: &str) -> Option<i64> {
    let v: f64 = token.trim().parse().ok()?;
    (v.is_finite() && v.fract() == 0.0).then_some(v as i64)
}

/// Reads a rectangular numeric CSV table.
pub fn load_csv(path: &Path, has_header: bool, label_column: LabelColumn) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(file);

    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    parse_err(line, format!("row {line} has {len} fields, expected {expected_len}"))
                }
                _ => parse_err(line, e.to_string()),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let cols = rec.len();
        let label_idx = match label_column {
            LabelColumn::None => None,
            LabelColumn::First => Some(0),
            LabelColumn::Last => Some(cols.saturating_sub(1)),
            LabelColumn::Index(i) if i < cols => Some(i),
            LabelColumn::Index(i) => {
                return Err(parse_err(
                    line,
                    format!("label column {i} out of range ({cols} fields)"),
                ))
            }
        };
        let features = cols - usize::from(label_idx.is_some());
        match width {
            None => width = Some(features),
            Some(w) if w != features => {
                return Err(parse_err(
                    line,
                    format!(
                        "row {line} has {cols} fields, expected {}",
                        w + usize::from(label_idx.is_some())
                    ),
                ))
            }
            _ => {}
        }
        for (c, cell) in rec.iter().enumerate() {
            if Some(c) == label_idx {
                let l =
                    parse_label(cell).ok_or_else(|| parse_err(line, format!("label '{cell}' is not an integer")))?;
                labels.push(l);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(line, format!("non-numeric cell '{cell}' in column {c}")))?;
                values.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    }
    let m = width.unwrap_or(0);
    let x = Array2::from_shape_vec((rows, m), values).expect("rectangular by construction");
    let labels = (label_column != LabelColumn::None).then(|| normalize_labels(labels));
    Dataset::new(x, labels)
}

/// Reads `label idx:val ...` lines with 1-based feature indices. Absent
/// features are zero and the width is the largest index seen.
pub fn load_libsvm(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut labels = Vec::new();
    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut width = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line");
        let label = parse_label(label_tok)
            .ok_or_else(|| parse_err(line_no, format!("label '{label_tok}' is not an integer")))?;
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("malformed token '{tok}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(line_no, format!("malformed index in '{tok}'")))?;
            if idx == 0 {
                return Err(parse_err(line_no, "feature indices are 1-based; found 0".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(line_no, format!("malformed value in '{tok}'")))?;
            width = width.max(idx);
            row.push((idx - 1, val));
        }
        labels.push(label);
        sparse_rows.push(row);
    }
    if sparse_rows.is_empty() {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    }
    let mut x = Array2::zeros((sparse_rows.len(), width));
    for (i, row) in sparse_rows.into_iter().enumerate() {
        for (j, v) in row {
            x[[i, j]] = v;
        }
    }
    Dataset::new(x, Some(normalize_labels(labels)))
}

/// Loads by extension: `.csv` via [`load_csv`], anything else as libsvm.
pub fn load_any(path: &Path, has_header: bool, label_column: LabelColumn) -> Result<Dataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => load_csv(path, has_header, label_column),
        _ => load_libsvm(path),
    }
}

const MIN_STD: f64 = 1e-12;

/// Fits per-feature mean and population standard deviation on `train` and
/// applies them to `train` and every split in `others`. Features with a
/// standard deviation below `1e-12` are only centred.
pub fn standardize(train: &mut Dataset, others: &mut [&mut Dataset]) -> Result<()> {
    let n = train.samples();
    if n == 0 {
        return Err(Error::Input("cannot standardize an empty training split".into()));
    }
    let m = train.features();
    for o in others.iter() {
        if o.features() != m {
            return Err(Error::Shape(format!(
                "split has {} features, training split {m}",
                o.features()
            )));
        }
    }
    let means: Vec<f64> = train.x.columns().into_iter().map(|c| c.sum() / n as f64).collect();
    let stds: Vec<f64> = train
        .x
        .columns()
        .into_iter()
        .zip(&means)
        .map(|(c, mu)| {
            let var = c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            if sd < MIN_STD {
                1.0
            } else {
                sd
            }
        })
        .collect();

    let apply = |d: &mut Dataset| {
        for mut row in d.x.rows_mut() {
            for ((v, mu), sd) in row.iter_mut().zip(&means).zip(&stds) {
                *v = (*v - mu) / sd;
            }
        }
        d.feature_means = Some(means.clone());
        d.feature_stds = Some(stds.clone());
    };
    apply(train);
    for o in others.iter_mut() {
        apply(o);
    }
    Ok(())
}

/// `x + eps` with `eps ~ N(0, std^2)` i.i.d., drawn in row-major order.
pub fn add_gaussian_noise<R: Rng + ?Sized>(x: &Array2<f64>, std: f64, rng: &mut R) -> Result<Array2<f64>> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::Config(format!("noise std {std} must be non-negative")));
    }
    if std == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, std).expect("valid std");
    let mut out = x.to_owned();
    out.iter_mut().for_each(|v| *v += normal.sample(rng));
    Ok(out)
}

/// Parameters of [`synth_informative`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub samples: usize,
    pub features: usize,
    pub informative: usize,
    pub classes: usize,
    /// Half-width of the hypercube the class means sit on.
    pub cluster_sep: f64,
    /// Standard deviation of the pure-noise features.
    pub noise_std: f64,
}

impl SynthParams {
    /// 2000 samples, 500 features of which 20 informative, two classes.
    pub fn madelon_like() -> Self {
        Self {
            samples: 2000,
            features: 500,
            informative: 20,
            classes: 2,
            cluster_sep: 2.0,
            noise_std: 1.0,
        }
    }
}

/// Class-conditional Gaussian clusters on `informative` randomly placed
/// features, i.i.d. noise on the rest.
///
/// Each class mean is a hypercube vertex `±cluster_sep` on the informative
/// coordinates; a coordinate on which every class agrees is flipped for one
/// class so that every informative feature separates at least two classes.
/// Classes are balanced (sizes differ by at most one).
pub fn synth_informative<R: Rng + ?Sized>(params: SynthParams, rng: &mut R) -> Result<Dataset> {
    let SynthParams {
        samples: n,
        features: m,
        informative: k,
        classes,
        cluster_sep,
        noise_std,
    } = params;
    let bad = |msg: String| Err(Error::Config(msg));
    if k == 0 || k > m {
        return bad(format!("informative count {k} must be in 1..={m}"));
    }
    if classes < 2 || n < classes {
        return bad(format!(
            "need at least 2 classes and one sample per class (n={n}, classes={classes})"
        ));
    }
    if !(cluster_sep >= 0.0 && cluster_sep.is_finite()) || !(noise_std >= 0.0 && noise_std.is_finite()) {
        return bad("cluster_sep and noise_std must be finite and non-negative".into());
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut informative = order[..k].to_vec();
    informative.sort_unstable();

    let mut signs: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..k).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect())
        .collect();
    for t in 0..k {
        if signs.iter().all(|s| s[t] == signs[0][t]) {
            let c = rng.random_range(0..classes);
            signs[c][t] = -signs[c][t];
        }
    }

    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(rng);

    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut is_informative = vec![None; m];
    for (t, &f) in informative.iter().enumerate() {
        is_informative[f] = Some(t);
    }
    let mut x = Array2::zeros((n, m));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let y = labels[i];
        for (f, v) in row.iter_mut().enumerate() {
            let z = std_normal.sample(rng);
            *v = match is_informative[f] {
                Some(t) => cluster_sep * signs[y][t] + z,
                None => noise_std * z,
            };
        }
    }

    let mut data = Dataset::new(x, Some(labels))?;
    data.informative = Some(informative);
    Ok(data)
}

/// Ground-truth sidecar written next to exported synthetic data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub informative: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SynthParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GroundTruth {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Seeded train/test split, stratified by label when labels exist.
/// Index order within each split is ascending.
pub fn split<R: Rng + ?Sized>(data: &Dataset, train_fraction: f64, rng: &mut R) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let n = data.samples();
    let groups: Vec<Vec<usize>> = match &data.labels {
        Some(labels) => {
            let mut g = vec![Vec::new(); data.classes()];
            for (i, &l) in labels.iter().enumerate() {
                g[l].push(i);
            }
            g
        }
        None => vec![(0..n).collect()],
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut g in groups {
        g.shuffle(rng);
        let cut = (train_fraction * g.len() as f64).round() as usize;
        train.extend_from_slice(&g[..cut]);
        test.extend_from_slice(&g[cut..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Input(format!(
            "split of {n} samples at {train_fraction} leaves an empty side"
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}
