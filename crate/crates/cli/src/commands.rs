//! The subcommands. Every run writes its own directory of artifacts:
//! `report.json`, `history.csv`, `ranking.csv`, `selected_k<K>.txt`, and
//! optionally `trace.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use wast_core::data::{add_gaussian_noise, synth_informative, GroundTruth};
use wast_core::eval::{aggregate_scores, mean_std, CellResult, ScoreBoard};
use wast_core::model::{EpochEval, SparseAutoencoder, TrainObserver};
use wast_core::report::{Run, RunOutput};
use wast_core::selection::write_selected;
use wast_core::topology::{write_edge_histogram, ImportanceState, TRACE_HEADER};
use wast_core::{Dataset, RunReport, SynthParams, TrainConfig, Variant};

use crate::args::{AblateArgs, HeatmapArgs, Method, NoiseSweepArgs, SweepArgs, SynthArgs, TrainArgs};
use crate::error::{CliError, Result};
use crate::heatmap;
use crate::input::{prepare, truth_path, Prepared};

/// Input-neuron edge counts at the start and after every epoch.
#[derive(Default)]
struct TraceRecorder {
    rows: Vec<u8>,
}

impl TrainObserver for TraceRecorder {
    fn on_start(&mut self, model: &SparseAutoencoder) {
        write_edge_histogram(&mut self.rows, 0, &model.w1).expect("writing to memory");
    }

    fn on_epoch(
        &mut self,
        epoch: usize,
        _importance: &ImportanceState,
        model: &SparseAutoencoder,
    ) -> wast_core::Result<EpochEval> {
        write_edge_histogram(&mut self.rows, epoch, &model.w1).expect("writing to memory");
        Ok(EpochEval::default())
    }
}

/// One training run of a grid.
#[derive(Clone, Debug)]
struct Job {
    dataset: usize,
    label: String,
    config: TrainConfig,
    /// Std of Gaussian noise added to the training features.
    data_noise: f64,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn check_ks(ks: &[usize], data: &[Prepared]) -> Result<()> {
    if ks.is_empty() {
        return Err(CliError::Usage("at least one K is required".into()));
    }
    for d in data {
        if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > d.train.features()) {
            return Err(CliError::Usage(format!(
                "K = {k} outside 1..={} for dataset '{}'",
                d.train.features(),
                d.name
            )));
        }
    }
    Ok(())
}

fn corrupted(train: &Dataset, std: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut noisy = train.clone();
    noisy.x = add_gaussian_noise(&train.x, std, &mut rng)?;
    Ok(noisy)
}

fn run_dir(out: &Path, dataset: &str, label: &str, seed: u64) -> PathBuf {
    out.join(dataset).join(label).join(format!("seed{seed}"))
}

fn execute(job: &Job, data: &Prepared, ks: &[usize], trace: bool, out: &Path) -> Result<RunReport> {
    let noisy;
    let train = if job.data_noise > 0.0 {
        noisy = corrupted(&data.train, job.data_noise, job.config.seed)?;
        &noisy
    } else {
        &data.train
    };
    let run = Run {
        config: &job.config,
        name: &data.name,
        train,
        test: data.test.as_ref(),
        ks,
    };
    let mut recorder = TraceRecorder::default();
    let RunOutput { report, ranking, .. } = if trace {
        run.execute_with(&mut recorder)?
    } else {
        run.execute()?
    };

    let dir = run_dir(out, &data.name, &job.label, job.config.seed);
    create_dir(&dir)?;
    report.save(&dir.join("report.json"))?;
    write_file(&dir.join("history.csv"), report.history_csv().as_bytes())?;
    let mut ranking_csv = Vec::new();
    ranking.write_csv(&mut ranking_csv).map_err(|e| CliError::io(&dir, e))?;
    write_file(&dir.join("ranking.csv"), &ranking_csv)?;
    for (k, selected) in &report.selected {
        let mut text = Vec::new();
        write_selected(&mut text, selected).map_err(|e| CliError::io(&dir, e))?;
        write_file(&dir.join(format!("selected_k{k}.txt")), &text)?;
    }
    if trace {
        let mut text = format!("{TRACE_HEADER}\n").into_bytes();
        text.extend_from_slice(&recorder.rows);
        write_file(&dir.join("trace.csv"), &text)?;
    }
    log::info!(
        "{} {} seed {} done in {:.1}s -> {}",
        data.name,
        job.label,
        job.config.seed,
        report.wall_clock_secs,
        dir.display()
    );
    Ok(report)
}

fn run_grid(jobs: &[Job], data: &[Prepared], ks: &[usize], threads: usize, out: &Path) -> Result<Vec<RunReport>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|job| execute(job, &data[job.dataset], ks, false, out))
            .collect()
    })
}

fn seeds(config: &TrainConfig, count: u64) -> Result<Vec<u64>> {
    if count == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    Ok((0..count).map(|i| config.seed + i).collect())
}

fn accuracy_cells(jobs: &[Job], reports: &[RunReport], data: &[Prepared], ks: &[usize]) -> Vec<CellResult> {
    let mut cells: Vec<CellResult> = Vec::new();
    for (job, report) in jobs.iter().zip(reports) {
        for &k in ks {
            let acc = report.accuracy[&k];
            let name = &data[job.dataset].name;
            match cells
                .iter_mut()
                .find(|c| c.method == job.label && &c.dataset == name && c.k == k)
            {
                Some(c) => c.accuracies.push(acc),
                None => cells.push(CellResult {
                    method: job.label.clone(),
                    dataset: name.clone(),
                    k,
                    accuracies: vec![acc],
                }),
            }
        }
    }
    cells
}

pub fn train(args: &TrainArgs, out: &Path) -> Result<Vec<RunReport>> {
    let mut config = args.config.resolve(args.method)?;
    if config.eval_k.is_none() {
        config.eval_k = args.ks.first().copied();
    }
    let data = prepare(&args.data, config.train_fraction)?;
    check_ks(&args.ks, &data)?;
    let mut reports = Vec::new();
    for (i, d) in data.iter().enumerate() {
        for seed in seeds(&config, args.seeds)? {
            let job = Job {
                dataset: i,
                label: config.method().to_string(),
                config: TrainConfig { seed, ..config.clone() },
                data_noise: 0.0,
            };
            let report = execute(&job, d, &args.ks, args.trace, out)?;
            let summary: Vec<String> = args
                .ks
                .iter()
                .map(|k| {
                    let mut s = format!("K={k}");
                    if let Some(a) = report.accuracy.get(k) {
                        s += &format!(" acc={a:.4}");
                    }
                    if let Some(r) = report.recovery.get(k) {
                        s += &format!(" precision={:.3}", r.precision);
                    }
                    s
                })
                .collect();
            println!(
                "{} {} seed {seed}: {} -> {}",
                d.name,
                report.method,
                summary.join(", "),
                run_dir(out, &d.name, &job.label, seed).display()
            );
            reports.push(report);
        }
    }
    Ok(reports)
}

pub fn sweep(args: &SweepArgs, out: &Path) -> Result<ScoreBoard> {
    if args.methods.is_empty() {
        return Err(CliError::Usage("at least one method is required".into()));
    }
    let first = args.config.resolve(args.methods[0])?;
    let data = prepare(&args.data, first.train_fraction)?;
    check_ks(&args.ks, &data)?;
    for d in &data {
        d.labelled_test()?;
    }
    let mut jobs = Vec::new();
    for (i, _) in data.iter().enumerate() {
        for &method in &args.methods {
            let config = args.config.resolve(method)?;
            for seed in seeds(&config, args.seeds)? {
                jobs.push(Job {
                    dataset: i,
                    label: method_label(method),
                    config: TrainConfig { seed, ..config.clone() },
                    data_noise: 0.0,
                });
            }
        }
    }
    let reports = run_grid(&jobs, &data, &args.ks, args.jobs, &out.join("runs"))?;
    let board = aggregate_scores(&accuracy_cells(&jobs, &reports, &data, &args.ks));

    let mut table = Vec::new();
    board.write_table(&mut table).map_err(|e| CliError::io(out, e))?;
    write_file(&out.join("scores.csv"), &table)?;
    let json = serde_json::to_string_pretty(&board).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out.join("scoreboard.json"), (json + "\n").as_bytes())?;
    print!("{}", String::from_utf8_lossy(&table));
    for (method, score) in &board.scores {
        println!("score {method}: {score}");
    }
    Ok(board)
}

fn method_label(method: Method) -> String {
    match method {
        Method::Wast => "wast".into(),
        Method::Qs => "qs".into(),
    }
}

/// One row of the ablation table.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub dataset: String,
    pub k: usize,
    pub mean: f64,
    pub std: f64,
    pub precision_mean: Option<f64>,
}

pub const ABLATION_HEADER: &str = "variant,dataset,K,mean,std,precision_mean";

pub fn ablate(args: &AblateArgs, out: &Path) -> Result<Vec<AblationRow>> {
    if args.variants.is_empty() {
        return Err(CliError::Usage("at least one variant is required".into()));
    }
    let base = args.config.resolve(Method::Wast)?;
    let data = prepare(&args.data, base.train_fraction)?;
    check_ks(&args.ks, &data)?;
    for d in &data {
        d.labelled_test()?;
    }
    let mut jobs = Vec::new();
    for (i, _) in data.iter().enumerate() {
        for &variant in &args.variants {
            for seed in seeds(&base, args.seeds)? {
                jobs.push(Job {
                    dataset: i,
                    label: variant.to_string(),
                    config: TrainConfig {
                        seed,
                        variant,
                        ..base.clone()
                    },
                    data_noise: 0.0,
                });
            }
        }
    }
    let reports = run_grid(&jobs, &data, &args.ks, args.jobs, &out.join("runs"))?;

    let mut rows = Vec::new();
    let mut text = format!("{ABLATION_HEADER}\n");
    for (i, d) in data.iter().enumerate() {
        for &variant in &args.variants {
            let label = variant.to_string();
            let runs: Vec<&RunReport> = jobs
                .iter()
                .zip(&reports)
                .filter(|(j, _)| j.dataset == i && j.label == label)
                .map(|(_, r)| r)
                .collect();
            for &k in &args.ks {
                let accs: Vec<f64> = runs.iter().map(|r| r.accuracy[&k]).collect();
                let (mean, std) = mean_std(&accs);
                let precision: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| r.recovery.get(&k))
                    .map(|r| r.precision)
                    .collect();
                let precision_mean = (!precision.is_empty()).then(|| mean_std(&precision).0);
                let p = precision_mean.map_or(String::new(), |p| p.to_string());
                text += &format!("{variant},{},{k},{mean},{std},{p}\n", d.name);
                rows.push(AblationRow {
                    variant,
                    dataset: d.name.clone(),
                    k,
                    mean,
                    std,
                    precision_mean,
                });
            }
        }
    }
    write_file(&out.join("ablation.csv"), text.as_bytes())?;
    print!("{text}");
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct NoiseRow {
    pub noise_std: f64,
    pub dataset: String,
    pub k: usize,
    pub mean: f64,
    pub std: f64,
}

pub const NOISE_HEADER: &str = "noise_std,dataset,K,mean,std";

pub fn noise_sweep(args: &NoiseSweepArgs, out: &Path) -> Result<Vec<NoiseRow>> {
    if args.stds.is_empty() {
        return Err(CliError::Usage("at least one noise std is required".into()));
    }
    if let Some(bad) = args.stds.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(CliError::Usage(format!(
            "noise std {bad} must be finite and non-negative"
        )));
    }
    let config = args.config.resolve(args.method)?;
    let data = prepare(&args.data, config.train_fraction)?;
    check_ks(&args.ks, &data)?;
    for d in &data {
        d.labelled_test()?;
    }
    let mut jobs = Vec::new();
    for (i, _) in data.iter().enumerate() {
        for &std in &args.stds {
            for seed in seeds(&config, args.seeds)? {
                jobs.push(Job {
                    dataset: i,
                    label: format!("{}_noise{std}", config.method()),
                    config: TrainConfig { seed, ..config.clone() },
                    data_noise: std,
                });
            }
        }
    }
    let reports = run_grid(&jobs, &data, &args.ks, args.jobs, &out.join("runs"))?;

    let mut rows = Vec::new();
    let mut text = format!("{NOISE_HEADER}\n");
    for (i, d) in data.iter().enumerate() {
        for &std in &args.stds {
            for &k in &args.ks {
                let accs: Vec<f64> = jobs
                    .iter()
                    .zip(&reports)
                    .filter(|(j, _)| j.dataset == i && j.data_noise == std)
                    .map(|(_, r)| r.accuracy[&k])
                    .collect();
                let (mean, sd) = mean_std(&accs);
                text += &format!("{std},{},{k},{mean},{sd}\n", d.name);
                rows.push(NoiseRow {
                    noise_std: std,
                    dataset: d.name.clone(),
                    k,
                    mean,
                    std: sd,
                });
            }
        }
    }
    write_file(&out.join("noise.csv"), text.as_bytes())?;
    print!("{text}");
    Ok(rows)
}

pub fn heatmap(args: &HeatmapArgs, out: &Path) -> Result<Vec<PathBuf>> {
    let written = heatmap::render(&args.trace, args.rows, args.cols, out)?;
    println!("wrote {} images to {}", written.len(), out.display());
    Ok(written)
}

pub fn synth(args: &SynthArgs, out: &Path) -> Result<PathBuf> {
    let params = SynthParams {
        samples: args.samples,
        features: args.features,
        informative: args.informative,
        classes: args.classes,
        cluster_sep: args.sep,
        noise_std: args.noise,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let data = synth_informative(params, &mut rng)?;
    create_dir(out)?;
    let path = out.join(&args.name);
    data.write_csv(&path)?;
    let truth = GroundTruth {
        informative: data.informative.clone().unwrap_or_default(),
        params: Some(params),
        seed: Some(args.seed),
    };
    truth.save(&truth_path(&path))?;
    println!("wrote {} and {}", path.display(), truth_path(&path).display());
    Ok(path)
}
