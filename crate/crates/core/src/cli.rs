//! Pipeline stages behind the command-line subcommands. Each stage reads
//! and writes files under the configured directories and returns a short
//! human-readable summary.
//!
//! | stage         | reads                          | writes                                   |
//! |---------------|--------------------------------|------------------------------------------|
//! | synth-gen     |                                | `detections.csv`                         |
//! | ingest        | `input` or `detections.csv`    | `points.csv`, `normalization.json`       |
//! | build-fires   | `points.csv`                   | `fires.csv`                              |
//! | stats         | `points.csv`, `fires.csv`      | `stats.csv`                              |
//! | make-dataset  | `points.csv`, `fires.csv`      | `<task>_lw<n>.csv`, `<task>_lw<n>.json`  |
//! | train         | `points.csv`, `fires.csv`      | `<task>_lw<n>_<model>.ckpt`, `..._loss.csv` |
//! | evaluate      | `points.csv`, `fires.csv`      | tables, plot data, manifest, report      |
//! | report        | `<task>_report.json`           | tables, plot data, manifest              |

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiment::{compute_metrics, emit_report, run_experiment, split_indices, RunReport, SplitSpec};
use crate::firegraph::{build_fires, compute_stats, read_fires, write_fires, Wildfire};
use crate::ingest::{
    encode_all, filter_bbox, parse_detections, read_encoded_file, write_detections, write_encoded, ColumnMap,
    ElevationLookup, EncodedPoint, ParseOptions,
};
use crate::nn::checkpoint::{save, write_loss_history};
use crate::nn::train::train;
use crate::nn::ModelKind;
use crate::sequence::Dataset;
use crate::synth::synth_generate;

pub const DETECTIONS: &str = "detections.csv";
pub const POINTS: &str = "points.csv";
pub const NORMALIZATION: &str = "normalization.json";
pub const FIRES: &str = "fires.csv";
pub const STATS: &str = "stats.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn load_fires(config: &RunConfig) -> Result<(Vec<EncodedPoint>, Vec<Wildfire>)> {
    let points = read_encoded_file(&config.work_dir().join(POINTS))?;
    let fires = read_fires(open(&config.work_dir().join(FIRES))?, &points)?;
    Ok((points, fires))
}

pub fn cmd_synth_gen(config: &RunConfig) -> Result<String> {
    let spec = config.synth();
    let out = synth_generate(&spec)?;
    let path = config.work_dir().join(DETECTIONS);
    write_detections(create(&path)?, &out.detections)?;
    Ok(format!(
        "synth-gen: {} detections in {} fires -> {}",
        out.detections.len(),
        out.fires.len(),
        path.display()
    ))
}

pub fn cmd_ingest(config: &RunConfig) -> Result<String> {
    let input: PathBuf = config.input.clone().unwrap_or_else(|| config.work_dir().join(DETECTIONS));
    let options = ParseOptions {
        mode: config.parse_mode,
        ..ParseOptions::default()
    };
    let parsed = parse_detections(open(&input)?, &ColumnMap::default(), options)?;
    for e in &parsed.skipped {
        log::warn!("skipped {e}");
    }
    let mut detections = parsed.detections;
    let mut missing = 0;
    if let Some(path) = &config.elevation {
        let lookup = ElevationLookup::read(open(path)?, config.elevation_decimals)?;
        missing = lookup.fill(&mut detections);
    }
    let kept = filter_bbox(&detections, &config.bbox()?);
    let (stats, points) = encode_all(&kept)?;
    let dir = config.work_dir();
    write_encoded(create(&dir.join(POINTS))?, &points)?;
    std::fs::write(dir.join(NORMALIZATION), serde_json::to_string_pretty(&stats)? + "\n")
        .map_err(|e| Error::io(dir.join(NORMALIZATION), e))?;
    Ok(format!(
        "ingest: {} rows read, {} skipped, {} outside the box, {} without elevation, {} points -> {}",
        detections.len() + parsed.skipped.len(),
        parsed.skipped.len(),
        detections.len() - kept.len(),
        missing,
        points.len(),
        dir.join(POINTS).display()
    ))
}

pub fn cmd_build_fires(config: &RunConfig) -> Result<String> {
    let points = read_encoded_file(&config.work_dir().join(POINTS))?;
    let fires = build_fires(&points, &config.graph_params())?;
    let path = config.work_dir().join(FIRES);
    write_fires(create(&path)?, &fires)?;
    Ok(format!("build-fires: {} points -> {} fires -> {}", points.len(), fires.len(), path.display()))
}

pub fn cmd_stats(config: &RunConfig) -> Result<String> {
    let (_, fires) = load_fires(config)?;
    let stats = compute_stats(&fires)?;
    stats.write_csv(create(&config.out_dir.join(STATS))?)?;
    let rows: Vec<String> = stats.rows().iter().map(|(k, v)| format!("{k}: {v}")).collect();
    Ok(rows.join("\n"))
}

fn dataset_stem(config: &RunConfig, lw: usize) -> String {
    format!("{}_lw{lw}", config.task.name())
}

pub fn cmd_make_dataset(config: &RunConfig) -> Result<String> {
    config.validate()?;
    let (_, fires) = load_fires(config)?;
    let mut lines = Vec::new();
    for lw in config.lw_min..=config.lw_max {
        let data = Dataset::build(&fires, config.task, lw)?;
        let stem = dataset_stem(config, lw);
        let dir = config.work_dir();
        data.write(create(&dir.join(format!("{stem}.csv")))?)?;
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&data.manifest())? + "\n",
        )
        .map_err(|e| Error::io(dir.join(format!("{stem}.json")), e))?;
        lines.push(format!(
            "make-dataset: l_w={lw} {} samples of dimension {} ({} skipped)",
            data.len(),
            data.dim(),
            data.skipped
        ));
    }
    Ok(lines.join("\n"))
}

/// Trains one model on the 70% split of one dataset and scores the rest.
pub fn cmd_train(config: &RunConfig, kind: ModelKind, lw: usize) -> Result<String> {
    config.validate()?;
    let (_, fires) = load_fires(config)?;
    let data = Dataset::build(&fires, config.task, lw)?;
    let (train_idx, test_idx) = split_indices(data.len(), &SplitSpec::new(config.test_fraction, config.seed)?)?;
    let inputs = Array2::from_shape_vec((data.len(), data.dim()), data.inputs.concat())
        .map_err(|e| Error::shape(data.dim(), e))?;
    let spec = config.hyperparams().model_spec(kind, config.task, lw, config.seed);
    let y_train: Vec<usize> = train_idx.iter().map(|&i| data.labels[i]).collect();
    let outcome = train(&spec, inputs.select(Axis(0), &train_idx).view(), &y_train)?;
    let y_test: Vec<usize> = test_idx.iter().map(|&i| data.labels[i]).collect();
    let predictions = outcome.model.predict_batch(inputs.select(Axis(0), &test_idx).view())?;
    let metrics = compute_metrics(&predictions, &y_test, config.task.n_classes())?;

    let stem = format!("{}_{}", dataset_stem(config, lw), kind.name().to_lowercase());
    let ckpt = config.out_dir.join(format!("{stem}.ckpt"));
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    save(&outcome.model, &ckpt)?;
    write_loss_history(&outcome.loss_history, create(&config.out_dir.join(format!("{stem}_loss.csv")))?)?;
    Ok(format!(
        "train: {kind} l_w={lw} on {} samples, test accuracy {:.4} precision {:.4} recall {:.4} -> {}",
        y_train.len(),
        metrics.accuracy,
        metrics.precision,
        metrics.recall,
        ckpt.display()
    ))
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<String> {
    config.validate()?;
    let (_, fires) = load_fires(config)?;
    let report = run_experiment(&fires, &config.experiment())?;
    let files = emit_report(&report, &config.out_dir)?;
    Ok(format!(
        "evaluate: {} l_w rows x {} models -> {}",
        report.cells.len(),
        config.models.len(),
        files[0].display()
    ))
}

/// Re-renders tables and plot data from a saved report.
pub fn cmd_report(config: &RunConfig) -> Result<String> {
    let path = config.out_dir.join(format!("{}_report.json", config.task.name()));
    let report: RunReport = serde_json::from_reader(open(&path)?)?;
    let files = emit_report(&report, &config.out_dir)?;
    Ok(format!("report: {} files from {}", files.len(), path.display()))
}
