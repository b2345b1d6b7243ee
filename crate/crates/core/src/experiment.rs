//! Evaluation protocol: seeded 70/30 split, 10-fold model selection on the
//! training part, test-set metrics, repeats averaged per sequence length.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::firegraph::Wildfire;
use crate::nn::train::{accuracy, train};
use crate::nn::{Activation, Model, ModelKind, ModelSpec, RmsPropConfig};
use crate::sequence::{Dataset, Task, MAX_LW, MIN_LW};

pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::Config(format!("test fraction must be in (0, 1), got {test_fraction}")));
        }
        Ok(Self { test_fraction, seed })
    }

    pub fn test_size(&self, n: usize) -> usize {
        ((n as f64 * self.test_fraction + 1e-9).floor() as usize).max(1)
    }
}

/// Shuffled `(train, test)` index sets over `0..n`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { need: MIN_SAMPLES, have: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = order.split_off(n - spec.test_size(n));
    Ok((order, test))
}

pub fn train_test_split<T: Clone>(samples: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    let (train, test) = split_indices(samples.len(), spec)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| samples[i].clone()).collect();
    Ok((pick(train), pick(test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvSpec {
    pub folds: usize,
}

impl Default for CvSpec {
    fn default() -> Self {
        Self { folds: 10 }
    }
}

/// The model kept by cross-validation.
#[derive(Debug, Clone)]
pub struct Selection {
    pub model: Model,
    pub fold: usize,
    pub validation_accuracy: Vec<f64>,
}

/// Contiguous folds of a seeded permutation of `0..n`.
pub fn fold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::TooFewSamples { need: folds, have: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..folds).map(|f| order[f * n / folds..(f + 1) * n / folds].to_vec()).collect())
}

/// Trains one fresh model per fold on the remaining folds and keeps the
/// one with the best validation accuracy (lowest fold on ties). Fold `f`
/// initializes its model from `derive_seed(seed, f)`.
pub fn kfold_select(
    inputs: ArrayView2<'_, f64>,
    labels: &[usize],
    cv: &CvSpec,
    template: &ModelSpec,
    seed: u64,
) -> Result<Selection> {
    let folds = fold_indices(labels.len(), cv.folds, seed)?;
    let mut best: Option<(usize, Model)> = None;
    let mut scores = Vec::with_capacity(folds.len());
    for (f, validation) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        let spec = ModelSpec {
            seed: derive_seed(seed, f as u64),
            ..template.clone()
        };
        let x = inputs.select(Axis(0), &train_idx);
        let y: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let model = train(&spec, x.view(), &y)?.model;
        let vx = inputs.select(Axis(0), validation);
        let vy: Vec<usize> = validation.iter().map(|&i| labels[i]).collect();
        let acc = accuracy(&model, vx.view(), &vy)?;
        log::debug!("{} fold {f}: validation accuracy {acc:.4}", template.kind);
        if best.is_none() || acc > scores.iter().copied().fold(f64::MIN, f64::max) {
            best = Some((f, model));
        }
        scores.push(acc);
    }
    let (fold, model) = best.expect("at least two folds");
    Ok(Selection {
        model,
        fold,
        validation_accuracy: scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub support: Vec<usize>,
}

/// Accuracy plus macro precision and recall over the classes that occur in
/// `labels`. A class that is never predicted has precision 0.
pub fn compute_metrics(predictions: &[usize], labels: &[usize], n_classes: usize) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(format!("{} predictions", labels.len()), predictions.len()));
    }
    if labels.is_empty() {
        return Err(Error::Empty("no labels to score"));
    }
    if let Some(&bad) = predictions.iter().chain(labels).find(|&&c| c >= n_classes) {
        return Err(Error::OutOfRange {
            what: "class index",
            value: bad.to_string(),
        });
    }
    let mut tp = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    let mut support = vec![0usize; n_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        predicted[p] += 1;
        support[l] += 1;
        if p == l {
            tp[l] += 1;
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let per_class_precision: Vec<f64> = (0..n_classes).map(|c| ratio(tp[c], predicted[c])).collect();
    let per_class_recall: Vec<f64> = (0..n_classes).map(|c| ratio(tp[c], support[c])).collect();
    let present: Vec<usize> = (0..n_classes).filter(|&c| support[c] > 0).collect();
    let macro_mean = |v: &[f64]| present.iter().map(|&c| v[c]).sum::<f64>() / present.len() as f64;
    Ok(Metrics {
        accuracy: ratio(tp.iter().sum(), labels.len()),
        precision: macro_mean(&per_class_precision),
        recall: macro_mean(&per_class_recall),
        per_class_precision,
        per_class_recall,
        support,
    })
}

/// Splitmix64 over `parent ^ tag`-style mixing; independent child seeds.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    let mut z = parent
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(tag.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Network settings shared by every model in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub hidden: [usize; 2],
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs_lr: usize,
    pub epochs_rnn: usize,
    pub activation: Activation,
    pub optimizer: RmsPropConfig,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            hidden: crate::nn::model::DEFAULT_HIDDEN,
            dropout: crate::nn::model::DEFAULT_DROPOUT,
            batch_size: crate::nn::model::DEFAULT_BATCH,
            epochs_lr: crate::nn::model::LR_EPOCHS,
            epochs_rnn: crate::nn::model::RNN_EPOCHS,
            activation: Activation::Relu,
            optimizer: RmsPropConfig::default(),
        }
    }
}

impl Hyperparams {
    pub fn model_spec(&self, kind: ModelKind, task: Task, lw: usize, seed: u64) -> ModelSpec {
        ModelSpec {
            hidden: self.hidden,
            dropout: self.dropout,
            batch_size: self.batch_size,
            epochs: if kind.is_recurrent() { self.epochs_rnn } else { self.epochs_lr },
            activation: self.activation,
            optimizer: self.optimizer,
            ..ModelSpec::for_task(kind, task, lw, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub models: Vec<ModelKind>,
    pub lw_min: usize,
    pub lw_max: usize,
    pub repeats: usize,
    pub master_seed: u64,
    pub test_fraction: f64,
    pub cv: CvSpec,
    /// Reuse the master seed for every repeat instead of deriving new ones.
    pub identical_repeats: bool,
    /// Downsample binary datasets to equal class counts.
    pub balance_binary: bool,
    pub hyper: Hyperparams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::Multiclass,
            models: ModelKind::ALL.to_vec(),
            lw_min: MIN_LW,
            lw_max: MAX_LW,
            repeats: 10,
            master_seed: 0,
            test_fraction: 0.3,
            cv: CvSpec::default(),
            identical_repeats: false,
            balance_binary: false,
            hyper: Hyperparams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lw_min < MIN_LW || self.lw_max > MAX_LW || self.lw_min > self.lw_max {
            return Err(Error::Config(format!(
                "l_w range {}..={} must lie within {MIN_LW}..={MAX_LW}",
                self.lw_min, self.lw_max
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models requested".into()));
        }
        SplitSpec::new(self.test_fraction, 0)?;
        if self.cv.folds < 2 {
            return Err(Error::Config("need at least 2 folds".into()));
        }
        Ok(())
    }

    pub fn lws(&self) -> Vec<usize> {
        (self.lw_min..=self.lw_max).collect()
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        if self.identical_repeats {
            self.master_seed
        } else {
            derive_seed(self.master_seed, repeat as u64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub samples: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub repeats: Vec<RepeatResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub seed: u64,
    pub selected_fold: usize,
    pub validation_accuracy: Vec<f64>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Present(CellResult),
    Absent { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Accuracy, Metric::Precision, Metric::Recall];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
        }
    }

    fn of(self, cell: &CellResult) -> Summary {
        match self {
            Metric::Accuracy => cell.accuracy,
            Metric::Precision => cell.precision,
            Metric::Recall => cell.recall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    /// Keyed by `l_w`, then model.
    pub cells: BTreeMap<usize, BTreeMap<ModelKind, Cell>>,
}

impl RunReport {
    pub fn cell(&self, lw: usize, kind: ModelKind) -> Option<&CellResult> {
        match self.cells.get(&lw)?.get(&kind)? {
            Cell::Present(c) => Some(c),
            Cell::Absent { .. } => None,
        }
    }
}

/// Runs the full protocol over pre-built datasets, one per `l_w`.
pub fn run_on_datasets(datasets: &BTreeMap<usize, Dataset>, config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let mut cells = BTreeMap::new();
    for lw in config.lws() {
        let row: BTreeMap<ModelKind, Cell> = match datasets.get(&lw) {
            None => absent_row(config, format!("no dataset for l_w = {lw}")),
            Some(data) => run_lw(data, config)?,
        };
        cells.insert(lw, row);
    }
    Ok(RunReport {
        config: config.clone(),
        cells,
    })
}

/// Builds each requested dataset from `fires` and runs the protocol.
pub fn run_experiment(fires: &[Wildfire], config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let mut datasets = BTreeMap::new();
    for lw in config.lws() {
        let mut data = Dataset::build(fires, config.task, lw)?;
        if config.balance_binary && config.task == Task::Binary {
            data = data.balanced(derive_seed(config.master_seed, 1_000 + lw as u64));
        }
        datasets.insert(lw, data);
    }
    run_on_datasets(&datasets, config)
}

fn absent_row(config: &ExperimentConfig, reason: String) -> BTreeMap<ModelKind, Cell> {
    config
        .models
        .iter()
        .map(|&k| (k, Cell::Absent { reason: reason.clone() }))
        .collect()
}

fn run_lw(data: &Dataset, config: &ExperimentConfig) -> Result<BTreeMap<ModelKind, Cell>> {
    let lw = data.lw;
    let n = data.len();
    let split0 = SplitSpec::new(config.test_fraction, 0)?;
    if n < MIN_SAMPLES {
        return Ok(absent_row(config, format!("{n} samples, need at least {MIN_SAMPLES}")));
    }
    let train_n = n - split0.test_size(n);
    if train_n < config.cv.folds {
        return Ok(absent_row(
            config,
            format!("{train_n} training samples, fewer than {} folds", config.cv.folds),
        ));
    }
    let inputs = Array2::from_shape_vec((n, data.dim()), data.inputs.concat()).map_err(|e| Error::shape(data.dim(), e))?;
    let mut results: BTreeMap<ModelKind, Vec<RepeatResult>> = BTreeMap::new();
    for r in 0..config.repeats {
        let seed = config.repeat_seed(r);
        let (train_idx, test_idx) = split_indices(n, &SplitSpec::new(config.test_fraction, seed)?)?;
        debug_assert!(test_idx.iter().all(|i| !train_idx.contains(i)));
        let x_train = inputs.select(Axis(0), &train_idx);
        let y_train: Vec<usize> = train_idx.iter().map(|&i| data.labels[i]).collect();
        let x_test = inputs.select(Axis(0), &test_idx);
        let y_test: Vec<usize> = test_idx.iter().map(|&i| data.labels[i]).collect();
        for &kind in &config.models {
            let model_seed = derive_seed(seed, 100 + kind as u64);
            let template = config.hyper.model_spec(kind, config.task, lw, model_seed);
            let selection = kfold_select(x_train.view(), &y_train, &config.cv, &template, model_seed)?;
            let predictions = selection.model.predict_batch(x_test.view())?;
            let metrics = compute_metrics(&predictions, &y_test, config.task.n_classes())?;
            log::info!(
                "{} l_w={lw} {kind} repeat {r}: accuracy {:.4} (fold {})",
                config.task,
                metrics.accuracy,
                selection.fold
            );
            results.entry(kind).or_default().push(RepeatResult {
                seed,
                selected_fold: selection.fold,
                validation_accuracy: selection.validation_accuracy,
                metrics,
            });
        }
    }
    let test_n = n - train_n;
    Ok(results
        .into_iter()
        .map(|(kind, repeats)| {
            let pick = |f: fn(&Metrics) -> f64| Summary::of(&repeats.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>());
            let cell = CellResult {
                accuracy: pick(|m| m.accuracy),
                precision: pick(|m| m.precision),
                recall: pick(|m| m.recall),
                samples: n,
                train_size: train_n,
                test_size: test_n,
                repeats,
            };
            (kind, Cell::Present(cell))
        })
        .collect())
}

/// Results table: `l_w` then every metric for every model, 4 decimals.
pub fn format_table(report: &RunReport) -> String {
    let models = &report.config.models;
    let mut out = String::from("l_w");
    for metric in Metric::ALL {
        for kind in models {
            write!(out, ",{}_{}", metric.name(), kind).unwrap();
        }
    }
    out.push('\n');
    for lw in report.cells.keys() {
        write!(out, "{lw}").unwrap();
        for metric in Metric::ALL {
            for &kind in models {
                match report.cell(*lw, kind) {
                    Some(c) => write!(out, ",{:.4}", metric.of(c).mean).unwrap(),
                    None => out.push_str(",NA"),
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Plot data for one metric: `l_w`, then mean and std per model.
pub fn format_plot(report: &RunReport, metric: Metric) -> String {
    let models = &report.config.models;
    let mut out = String::from("l_w");
    for kind in models {
        write!(out, ",{kind}_mean,{kind}_std").unwrap();
    }
    out.push('\n');
    for lw in report.cells.keys() {
        write!(out, "{lw}").unwrap();
        for &kind in models {
            match report.cell(*lw, kind) {
                Some(c) => {
                    let s = metric.of(c);
                    write!(out, ",{},{}", s.mean, s.std).unwrap();
                }
                None => out.push_str(",NA,NA"),
            }
        }
        out.push('\n');
    }
    out
}

/// Writes the table, one plot file per metric, a manifest of the resolved
/// configuration, and the full report as JSON. Returns the written paths.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let task = report.config.task.name();
    let mut files = vec![(out_dir.join(format!("{task}_table.csv")), format_table(report))];
    for metric in Metric::ALL {
        files.push((
            out_dir.join(format!("{task}_{}_plot.csv", metric.name())),
            format_plot(report, metric),
        ));
    }
    let manifest = RunManifest::new(report);
    files.push((out_dir.join(format!("{task}_manifest.json")), serde_json::to_string_pretty(&manifest)? + "\n"));
    files.push((out_dir.join(format!("{task}_report.json")), serde_json::to_string_pretty(report)? + "\n"));
    for (path, text) in &files {
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub repeat_seeds: Vec<u64>,
    pub samples: BTreeMap<usize, usize>,
    pub absent: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(report: &RunReport) -> Self {
        let mut samples = BTreeMap::new();
        let mut absent = BTreeMap::new();
        for (lw, row) in &report.cells {
            for (kind, cell) in row {
                match cell {
                    Cell::Present(c) => {
                        samples.insert(*lw, c.samples);
                    }
                    Cell::Absent { reason } => {
                        absent.insert(format!("{lw}/{kind}"), reason.clone());
                    }
                }
            }
        }
        Self {
            config: report.config.clone(),
            repeat_seeds: (0..report.config.repeats).map(|r| report.config.repeat_seed(r)).collect(),
            samples,
            absent,
        }
    }
}
